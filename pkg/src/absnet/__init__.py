"""Interference-aware mobility for aerial base station (ABS) relay networks.

Capacity graphs under static interference, weighted Laplacian spectra and
Cheeger constants, network flows, a distributed Fiedler-vector solver,
gradient mobility, propulsion energy and a scenario harness.
"""
from ._backend import BACKEND
from .channel import ChannelParams, NodeKind, channel_gain, los_probability
from .distfiedler import MessageTrace, distributed_fiedler
from .energy import EnergyParams, energy_savings, horizontal_power, induced_velocity_mu, trajectory_energy, vertical_power
from .flow import max_concurrent_flow, max_flow, multicast_flow
from .mobility import MobilityConfig, TrajectoryLog, lambda2_gradients, run_trajectory, step, straight_line_trajectory
from .netgraph import CapacityGraph, NetworkState, WeightMatrix, build_capacity_graph, laplacians
from .scenario import Scenario, load_scenario, random_stationary_baseline, run_experiment
from .spectral import CommoditySpec, cheeger_exact, graph_fiedler, multi_weighted_cheeger_exact, weighted_cheeger_exact

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChannelParams", "NodeKind", "channel_gain", "los_probability",
    "MessageTrace", "distributed_fiedler", "EnergyParams", "energy_savings",
    "horizontal_power", "induced_velocity_mu", "trajectory_energy", "vertical_power",
    "max_concurrent_flow", "max_flow", "multicast_flow", "MobilityConfig", "TrajectoryLog",
    "lambda2_gradients", "run_trajectory", "step", "straight_line_trajectory",
    "CapacityGraph", "NetworkState", "WeightMatrix", "build_capacity_graph", "laplacians",
    "Scenario", "load_scenario", "random_stationary_baseline", "run_experiment",
    "CommoditySpec", "cheeger_exact", "graph_fiedler", "multi_weighted_cheeger_exact",
    "weighted_cheeger_exact",
]
