"""Scenario files, experiment harness and CSV outputs.

A scenario file is INI text with one ``[scenario]`` section of flat dotted
keys. Values are JSON literals (bare words are read as strings)::

    [scenario]
    schema_version = 1
    name = fig1_single_si
    abs.line = {"count": 8, "start": [0, 25, 20], "step": [0, 25, 0]}
    sources = [[0, 0, 0]]
    destinations = [[200, 0, 0]]
    interferers = [[30, 0, 0]]
    mobility.v_max = 5          # m/s

See ``SCHEMA`` for every key, its default and unit.
"""
from __future__ import annotations

import configparser
import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ChannelParams, ChannelError, NodeKind
from .energy import EnergyParams, EnergyError, energy_savings, segment_energy, trajectory_energy
from .flow import max_concurrent_flow, max_flow, multicast_flow
from .mobility import MobilityConfig, TrajectoryLog, run_trajectory, straight_line_trajectory
from .netgraph import GraphError, NetworkState, WeightMatrix, build_capacity_graph
from .spectral import CommoditySpec, aggregate_weights

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODES = ("weighted", "unweighted", "random-baseline", "energy-efficient")
FLOW_EVALS = ("single", "multicast", "multi-unicast")
FLOW_METRIC = {"single": "max_flow", "multicast": "multicast_flow", "multi-unicast": "concurrent_flow"}

# key -> (default, unit/description)
SCHEMA = {
    "schema_version": (SCHEMA_VERSION, "schema version"),
    "name": ("scenario", "label"),
    "region": ([[0, 200], [0, 200], [0, 100]], "m, [[xmin,xmax],[ymin,ymax],[zmin,zmax]]"),
    "abs.initial": (None, "m, list of [x,y,z]"),
    "abs.line": (None, 'm, {"count": n, "start": [x,y,z], "step": [dx,dy,dz]}'),
    "abs.jitter_m": (0.0, "m, uniform per-run perturbation of initial ABS positions"),
    "sources": ([[0, 0, 0]], "m"),
    "destinations": ([[200, 0, 0]], "m"),
    "interferers": ([], "m"),
    "commodities": (None, "[[source_idx, destination_idx, demand], ...]"),
    "mode": ("weighted", "|".join(MODES)),
    "flow_eval": ("single", "|".join(FLOW_EVALS)),
    "monte_carlo_runs": (1, "count"),
    "rng_seed": (0, "integer"),
    "network.bandwidth_hz": (1.0, "Hz"),
    "network.r_int_m": (5.0, "m"),
    "network.zeta": (1.0, ""),
    "network.kappa": (10.0, ""),
    "network.y0": (1e-6, ""),
    "network.range_m": (None, "m per ABS; null = unbounded"),
    "network.sir_cap": (1e12, ""),
    "network.ground_links": (True, "allow the direct source-destination link"),
    "channel.carrier_frequency_hz": (2e9, "Hz"),
    "channel.path_loss_exponent": (2.0, ""),
    "channel.mu_los_db": (5.0, "dB"),
    "channel.mu_nlos_db": (20.0, "dB"),
    "channel.psi": (11.95, ""),
    "channel.eta": (0.14, ""),
    "mobility.step_time_s": (1.0, "s"),
    "mobility.v_max": (5.0, "m/s"),
    "mobility.height_floor_m": (0.0, "m"),
    "mobility.max_iterations": (300, "slots"),
    "mobility.convergence_tol": (1e-6, "gradient norm"),
    "mobility.fd_step_m": (1e-3, "m"),
    "mobility.fiedler_source": ("centralized", "centralized|distributed"),
    "mobility.dist_outer_iters": (5000, "per-slot cap"),
    "mobility.dist_tol": (1e-12, "per-slot stopping tolerance on the largest entry change"),
    "mobility.dist_gossip_rounds": (30, "per outer iteration"),
    "mobility.flow_every": (1, "slots"),
    "mobility.clip_to_region": (True, "keep ABSs inside region"),
    "weights.terminal": (1.0, "weight of sources/destinations"),
    "weights.relay": (0.01, "weight of ABSs"),
    "weights.p": (0.5, "multi-commodity exponent"),
    "energy.air_density": (1.225, "kg/m^3"),
    "energy.drag_coeff_cd0": (0.05, ""),
    "energy.reference_area_m2": (0.3, "m^2"),
    "energy.blade_chord_m": (0.1, "m"),
    "energy.n_blades": (4, "count"),
    "energy.angular_velocity": (20.0, "rad/s"),
    "energy.rotor_radius_m": (0.5, "m"),
    "energy.weight_n": (50.0, "N"),
    "energy.clamp_descent": (True, "floor descending power at 0"),
    "energy.speed_model": ("cruise", "cruise|common_time"),
    "energy.cruise_speed": (None, "m/s; null = mobility.v_max"),
    "flow.concurrent_eps": (0.01, ""),
    "baseline.height_m": (20.0, "m"),
    "distfiedler.iters": (200, "outer iterations for the exported error trace"),
    "distfiedler.gossip_rounds": (30, ""),
}


class ScenarioError(ValueError):
    """Invalid scenario; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class ScenarioParseError(ScenarioError):
    pass


@dataclass
class Scenario:
    name: str
    region: tuple
    abs_initial: np.ndarray
    sources: np.ndarray
    destinations: np.ndarray
    interferers: np.ndarray
    commodity_pairs: list  # (source_idx, destination_idx, demand) into sources/destinations
    mode: str = "weighted"
    flow_eval: str = "single"
    monte_carlo_runs: int = 1
    rng_seed: int = 0
    abs_jitter_m: float = 0.0
    network: dict = field(default_factory=dict)
    channel: ChannelParams = field(default_factory=ChannelParams)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    flow_every: int = 1
    weights: dict = field(default_factory=dict)
    energy: EnergyParams = field(default_factory=EnergyParams)
    energy_speed_model: str = "cruise"
    cruise_speed: float | None = None
    concurrent_eps: float = 0.01
    baseline_height_m: float = 20.0
    distfiedler_iters: int = 200
    distfiedler_rounds: int = 30

    # node order in the flow graph: sources, destinations, ABSs
    @property
    def kinds(self) -> tuple:
        return ((NodeKind.SOURCE,) * len(self.sources) + (NodeKind.DESTINATION,) * len(self.destinations)
                + (NodeKind.ABS,) * len(self.abs_initial))

    def source_node(self, k: int = 0) -> int:
        return k

    def destination_node(self, k: int = 0) -> int:
        return len(self.sources) + k

    def commodities(self) -> list:
        out = []
        n = len(self.kinds)
        for s, d, dem in self.commodity_pairs:
            src, dst = self.source_node(s), self.destination_node(d)
            w = np.full(n, self.weights["relay"])
            w[[src, dst]] = self.weights["terminal"]
            out.append(CommoditySpec(src, dst, dem, WeightMatrix(w)))
        return out

    def state(self, abs_positions=None) -> NetworkState:
        abs_positions = self.abs_initial if abs_positions is None else abs_positions
        pos = np.vstack([self.sources, self.destinations, np.asarray(abs_positions, dtype=float)])
        net = self.network
        return NetworkState(pos, self.kinds, self.interferers, net["bandwidth_hz"], net["r_int_m"],
                            net["zeta"], net["kappa"], net["y0"], net["range_m"], self.channel,
                            net["sir_cap"], net["ground_links"])

    def weight_matrix(self) -> WeightMatrix:
        if self.flow_eval == "single":
            return WeightMatrix.practical(self.kinds, self.weights["terminal"], self.weights["relay"])
        return aggregate_weights(self.commodities(), self.weights["p"])

    def flow_metrics(self, state: NetworkState) -> dict:
        g = build_capacity_graph(state)
        if self.flow_eval == "single":
            val = max_flow(g, self.source_node(), self.destination_node()).value
        elif self.flow_eval == "multicast":
            val = multicast_flow(g, self.source_node(),
                                 [self.destination_node(k) for k in range(len(self.destinations))])
        else:
            val = max_concurrent_flow(g, self.commodities(), self.concurrent_eps).value
        return {FLOW_METRIC[self.flow_eval]: val}

    @property
    def metric(self) -> str:
        return FLOW_METRIC[self.flow_eval]

    def mobility_for(self, mode: str) -> MobilityConfig:
        objective = "L_norm" if mode == "unweighted" else "L_unnorm_weighted"
        return replace(self.mobility, objective=objective)

    def initial_positions(self, run: int) -> np.ndarray:
        """ABS start positions for Monte-Carlo run ``run`` (jittered, clipped to the region)."""
        pos = np.array(self.abs_initial, dtype=float)
        if self.abs_jitter_m > 0:
            rng = np.random.default_rng([self.rng_seed, run])
            pos = pos + rng.uniform(-self.abs_jitter_m, self.abs_jitter_m, pos.shape)
            lo = np.array([b[0] for b in self.region], dtype=float)
            hi = np.array([b[1] for b in self.region], dtype=float)
            lo[2] = max(lo[2], self.mobility.height_floor_m)
            pos = np.clip(pos, lo, hi)
        return pos


# loading -------------------------------------------------------------------

def _parse_value(key, raw):
    raw = raw.split(" #", 1)[0].strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        if raw.lower() in ("true", "false"):
            return raw.lower() == "true"
        if raw.lower() in ("inf", "infinity"):
            return math.inf
        if raw.startswith(("[", "{", '"')):
            raise ScenarioParseError(key, f"cannot parse value {raw!r}")
        return raw


def _points(key, value, allow_empty=True):
    try:
        arr = np.array(value, dtype=float).reshape(-1, 3)
    except (TypeError, ValueError):
        raise ScenarioError(key, "expected a list of [x, y, z] points") from None
    if not allow_empty and arr.shape[0] == 0:
        raise ScenarioError(key, "at least one point is required")
    return arr


def _positive(key, value, allow_zero=False):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(key, f"expected a number, got {value!r}") from None
    if not (v >= 0 if allow_zero else v > 0):
        raise ScenarioError(key, f"must be {'nonnegative' if allow_zero else 'positive'}, got {v}")
    return v


def _count(key, value, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ScenarioError(key, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ScenarioError(key, f"must be >= {minimum}")
    return int(value)


def scenario_from_dict(raw: dict) -> Scenario:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ScenarioError(unknown[0], "unknown key")
    cfg = {k: raw.get(k, d) for k, (d, _) in SCHEMA.items()}
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {cfg['schema_version']!r}")

    region = cfg["region"]
    try:
        region = tuple((float(a), float(b)) for a, b in region)
    except (TypeError, ValueError):
        raise ScenarioError("region", "expected [[xmin,xmax],[ymin,ymax],[zmin,zmax]]") from None
    if len(region) != 3 or any(b <= a for a, b in region):
        raise ScenarioError("region", "need three increasing intervals")

    if cfg["abs.initial"] is not None and cfg["abs.line"] is not None:
        raise ScenarioError("abs.line", "give either abs.initial or abs.line, not both")
    if cfg["abs.line"] is not None:
        spec = cfg["abs.line"]
        try:
            n = _count("abs.line", spec["count"])
            start = np.array(spec["start"], dtype=float)
            stepv = np.array(spec["step"], dtype=float)
        except (KeyError, TypeError):
            raise ScenarioError("abs.line", "needs count, start and step") from None
        abs_pos = start + np.arange(n)[:, None] * stepv
    elif cfg["abs.initial"] is not None:
        abs_pos = _points("abs.initial", cfg["abs.initial"], allow_empty=False)
    else:
        raise ScenarioError("abs.initial", "no ABS positions given")

    lo = np.array([a for a, _ in region])
    hi = np.array([b for _, b in region])
    if np.any(abs_pos < lo - 1e-9) or np.any(abs_pos > hi + 1e-9):
        raise ScenarioError("abs.initial", "initial ABS positions must lie inside the region")

    sources = _points("sources", cfg["sources"], allow_empty=False)
    dests = _points("destinations", cfg["destinations"], allow_empty=False)
    interf = _points("interferers", cfg["interferers"])
    for key, pts in (("sources", sources), ("destinations", dests), ("interferers", interf)):
        if pts.size and np.any(pts[:, 2] != 0):
            raise ScenarioError(key, "terrestrial nodes must have height 0")

    mode = cfg["mode"]
    if mode not in MODES:
        raise ScenarioError("mode", f"must be one of {MODES}")
    flow_eval = cfg["flow_eval"]
    if flow_eval not in FLOW_EVALS:
        raise ScenarioError("flow_eval", f"must be one of {FLOW_EVALS}")

    pairs = cfg["commodities"]
    if pairs is None:
        if flow_eval == "multi-unicast":
            if len(sources) != len(dests):
                raise ScenarioError("commodities", "multi-unicast default pairs sources[k] with destinations[k]")
            pairs = [[k, k, 1.0] for k in range(len(sources))]
        else:
            pairs = [[0, k, 1.0] for k in range(len(dests) if flow_eval == "multicast" else 1)]
    parsed = []
    for item in pairs:
        try:
            s, d = int(item[0]), int(item[1])
            dem = float(item[2]) if len(item) > 2 else 1.0
        except (TypeError, ValueError, IndexError):
            raise ScenarioError("commodities", f"bad entry {item!r}") from None
        if not (0 <= s < len(sources) and 0 <= d < len(dests)):
            raise ScenarioError("commodities", f"index out of range in {item!r}")
        _positive("commodities", dem)
        parsed.append((s, d, dem))

    network = {
        "bandwidth_hz": _positive("network.bandwidth_hz", cfg["network.bandwidth_hz"]),
        "r_int_m": _positive("network.r_int_m", cfg["network.r_int_m"]),
        "zeta": _positive("network.zeta", cfg["network.zeta"]),
        "kappa": _positive("network.kappa", cfg["network.kappa"]),
        "y0": _positive("network.y0", cfg["network.y0"]),
        "range_m": math.inf if cfg["network.range_m"] is None else _positive("network.range_m", cfg["network.range_m"]),
        "sir_cap": _positive("network.sir_cap", cfg["network.sir_cap"]),
        "ground_links": bool(cfg["network.ground_links"]),
    }
    try:
        channel = ChannelParams(
            _positive("channel.carrier_frequency_hz", cfg["channel.carrier_frequency_hz"]),
            _positive("channel.path_loss_exponent", cfg["channel.path_loss_exponent"]),
            float(cfg["channel.mu_los_db"]), float(cfg["channel.mu_nlos_db"]),
            _positive("channel.psi", cfg["channel.psi"]), _positive("channel.eta", cfg["channel.eta"]))
    except ChannelError as exc:
        raise ScenarioError("channel", str(exc)) from None

    floor = _positive("mobility.height_floor_m", cfg["mobility.height_floor_m"], allow_zero=True)
    try:
        mobility = MobilityConfig(
            step_time_s=_positive("mobility.step_time_s", cfg["mobility.step_time_s"]),
            v_max=_positive("mobility.v_max", cfg["mobility.v_max"]),
            height_floor_m=floor,
            max_iterations=_count("mobility.max_iterations", cfg["mobility.max_iterations"]),
            convergence_tol=_positive("mobility.convergence_tol", cfg["mobility.convergence_tol"]),
            fd_step_m=_positive("mobility.fd_step_m", cfg["mobility.fd_step_m"]),
            fiedler_source=cfg["mobility.fiedler_source"],
            dist_outer_iters=_count("mobility.dist_outer_iters", cfg["mobility.dist_outer_iters"]),
            dist_gossip_rounds=_count("mobility.dist_gossip_rounds", cfg["mobility.dist_gossip_rounds"]),
            dist_tol=_positive("mobility.dist_tol", cfg["mobility.dist_tol"]),
            region=region if cfg["mobility.clip_to_region"] else None,
        )
    except ValueError as exc:
        raise ScenarioError("mobility", str(exc)) from None
    if np.any(abs_pos[:, 2] < floor - 1e-9):
        raise ScenarioError("abs.initial", "initial ABS heights are below mobility.height_floor_m")

    try:
        energy = EnergyParams(
            float(cfg["energy.air_density"]), float(cfg["energy.drag_coeff_cd0"]),
            float(cfg["energy.reference_area_m2"]), float(cfg["energy.blade_chord_m"]),
            _count("energy.n_blades", cfg["energy.n_blades"]), float(cfg["energy.angular_velocity"]),
            float(cfg["energy.rotor_radius_m"]), float(cfg["energy.weight_n"]),
            bool(cfg["energy.clamp_descent"]))
    except EnergyError as exc:
        raise ScenarioError("energy", str(exc)) from None
    if cfg["energy.speed_model"] not in ("cruise", "common_time"):
        raise ScenarioError("energy.speed_model", "must be cruise or common_time")

    weights = {"terminal": _positive("weights.terminal", cfg["weights.terminal"]),
               "relay": _positive("weights.relay", cfg["weights.relay"]),
               "p": float(cfg["weights.p"])}
    eps = float(cfg["flow.concurrent_eps"])
    if not 0 < eps < 0.5:
        raise ScenarioError("flow.concurrent_eps", "must lie in (0, 0.5)")

    return Scenario(
        name=str(cfg["name"]), region=region, abs_initial=abs_pos, sources=sources,
        destinations=dests, interferers=interf, commodity_pairs=parsed, mode=mode,
        flow_eval=flow_eval,
        monte_carlo_runs=_count("monte_carlo_runs", cfg["monte_carlo_runs"]),
        rng_seed=_count("rng_seed", cfg["rng_seed"], minimum=0),
        abs_jitter_m=_positive("abs.jitter_m", cfg["abs.jitter_m"], allow_zero=True),
        network=network, channel=channel, mobility=mobility,
        flow_every=_count("mobility.flow_every", cfg["mobility.flow_every"]),
        weights=weights, energy=energy, energy_speed_model=cfg["energy.speed_model"],
        cruise_speed=None if cfg["energy.cruise_speed"] is None else _positive("energy.cruise_speed", cfg["energy.cruise_speed"]),
        concurrent_eps=eps,
        baseline_height_m=_positive("baseline.height_m", cfg["baseline.height_m"], allow_zero=True),
        distfiedler_iters=_count("distfiedler.iters", cfg["distfiedler.iters"]),
        distfiedler_rounds=_count("distfiedler.gossip_rounds", cfg["distfiedler.gossip_rounds"]),
    )


def parse_scenario_text(text: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioParseError("<file>", f"parse error: {exc}") from None
    if not parser.has_section("scenario"):
        raise ScenarioParseError("<file>", "missing [scenario] section")
    raw = {k: _parse_value(k, v) for k, v in parser.items("scenario")}
    return scenario_from_dict(raw)


def bundled_scenarios() -> list:
    root = resources.files("absnet") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_scenario_path(path) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    if not p.stem:
        raise FileNotFoundError(f"no scenario file {str(path)!r}")
    candidate = resources.files("absnet") / "scenarios" / f"{p.stem}.ini"
    if candidate.is_file():
        return Path(str(candidate))
    raise FileNotFoundError(f"no scenario file {path!s} and no bundled scenario {p.stem!r}")


def load_scenario(path) -> Scenario:
    p = resolve_scenario_path(path)
    return parse_scenario_text(p.read_text())


# experiments -----------------------------------------------------------------

@dataclass
class BaselineResult:
    mean: float
    std: float
    values: np.ndarray


def random_stationary_baseline(scenario: Scenario, runs: int | None = None,
                               seed: int | None = None) -> BaselineResult:
    """Flow with ABSs dropped uniformly on the region's floor plan at a fixed height."""
    runs = scenario.monte_carlo_runs if runs is None else runs
    seed = scenario.rng_seed if seed is None else seed
    if runs < 1:
        raise ScenarioError("runs", "must be >= 1")
    n_abs = len(scenario.abs_initial)
    (x0, x1), (y0, y1), _ = scenario.region
    vals = np.empty(runs)
    for r in range(runs):
        rng = np.random.default_rng([seed, r, 1])
        pos = np.column_stack([rng.uniform(x0, x1, n_abs), rng.uniform(y0, y1, n_abs),
                               np.full(n_abs, scenario.baseline_height_m)])
        vals[r] = scenario.flow_metrics(scenario.state(pos))[scenario.metric]
    return BaselineResult(float(vals.mean()), float(vals.std()), vals)


@dataclass
class RunResult:
    run: int
    log: TrajectoryLog
    straight: TrajectoryLog | None = None
    energy_maxflow: np.ndarray | None = None
    energy_efficient: np.ndarray | None = None
    path_maxflow: np.ndarray | None = None
    path_straight: np.ndarray | None = None


@dataclass
class ResultBundle:
    scenario: Scenario
    mode: str
    runs: list = field(default_factory=list)
    baseline: BaselineResult | None = None
    distfiedler_trace: object = None
    warnings: list = field(default_factory=list)

    def final_flows(self) -> np.ndarray:
        return np.array([r.log.slots[-1].flow[self.scenario.metric] for r in self.runs])

    @property
    def mean_final_flow(self) -> float:
        return float(self.final_flows().mean())

    def savings(self) -> np.ndarray:
        """Per-run, per-ABS percent energy savings (runs, n_abs)."""
        return np.array([energy_savings(r.energy_efficient, r.energy_maxflow) for r in self.runs])


def _trajectory_energy(traj: TrajectoryLog, scenario: Scenario) -> np.ndarray:
    if scenario.energy_speed_model == "common_time":
        return trajectory_energy(traj, scenario.energy).energy
    # every leg flown at the cruise speed; waiting between legs is not charged
    v = scenario.cruise_speed or scenario.mobility.v_max
    seg, _ = traj.segments()
    out = np.zeros(seg.shape[1])
    for t in range(seg.shape[0]):
        for i in range(seg.shape[1]):
            d = float(np.linalg.norm(seg[t, i]))
            if d > 0:
                out[i] += segment_energy(seg[t, i], d / v, scenario.energy)
    return out


def _run_single(scenario: Scenario, mode: str, run: int) -> RunResult:
    state = scenario.state(scenario.initial_positions(run))
    cfg = scenario.mobility_for(mode)
    w = scenario.weight_matrix()
    log_, final = run_trajectory(state, cfg, w, scenario.flow_metrics, scenario.flow_every)
    res = RunResult(run, log_)
    if mode == "energy-efficient":
        q0 = log_.abs_positions()[0]
        qL = log_.abs_positions()[-1]
        segments = max(len(log_) - 1, 1)
        straight = straight_line_trajectory(q0, qL, cfg, segments=segments)
        for s in straight.slots:
            full = scenario.state(s.positions)
            s.flow = scenario.flow_metrics(full)
            s.positions = np.array(full.positions)
        straight.abs_indices = log_.abs_indices
        res.straight = straight
        res.energy_maxflow = _trajectory_energy(log_, scenario)
        res.energy_efficient = _trajectory_energy(straight, scenario)
        res.path_maxflow = log_.path_lengths
        res.path_straight = straight.path_lengths
    return res


def run_experiment(scenario: Scenario, mode: str | None = None, runs: int | None = None,
                   out_dir=None, iterations: int | None = None, seed: int | None = None) -> ResultBundle:
    """Execute one mode of a scenario and optionally write its CSV outputs."""
    mode = scenario.mode if mode is None else mode
    if mode not in MODES:
        raise ScenarioError("mode", f"must be one of {MODES}")
    if iterations is not None:
        scenario = replace(scenario, mobility=replace(scenario.mobility, max_iterations=iterations))
    if seed is not None:
        scenario = replace(scenario, rng_seed=seed)
    runs = scenario.monte_carlo_runs if runs is None else runs
    bundle = ResultBundle(scenario, mode)
    if mode == "random-baseline":
        bundle.baseline = random_stationary_baseline(scenario, runs)
    else:
        cache = None
        for r in range(runs):
            if scenario.abs_jitter_m == 0 and cache is not None:
                # identical start positions give identical runs
                bundle.runs.append(replace(cache, run=r))
                continue
            cache = _run_single(scenario, mode, r)
            bundle.runs.append(cache)
            if cache.log.diagnostic:
                msg = f"run {r}: {cache.log.diagnostic}"
                log.warning(msg)
                bundle.warnings.append(msg)
        if mode == "energy-efficient":
            for rr in bundle.runs:
                worse = np.flatnonzero(rr.energy_efficient > rr.energy_maxflow * (1 + 1e-12))
                if worse.size:
                    msg = f"run {rr.run}: straight line costs more than the max-flow path for ABS {worse.tolist()}"
                    log.warning(msg)
                    bundle.warnings.append(msg)
    if scenario.mobility.fiedler_source == "distributed" and mode != "random-baseline":
        from .distfiedler import distributed_fiedler
        g = build_capacity_graph(scenario.state(scenario.initial_positions(0)))
        variant = scenario.mobility_for(mode).objective
        bundle.distfiedler_trace = distributed_fiedler(
            g, scenario.weight_matrix(), scenario.distfiedler_iters, scenario.distfiedler_rounds,
            variant=variant)
    if out_dir is not None:
        write_outputs(bundle, out_dir)
    return bundle


def _fmt(x) -> str:
    return repr(float(x))


def write_outputs(bundle: ResultBundle, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    sc = bundle.scenario
    if bundle.mode == "random-baseline":
        path = out / "flow.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "slot", "metric_name", "value"])
            for r, v in enumerate(bundle.baseline.values):
                w.writerow([r, 0, sc.metric, _fmt(v)])
        return [path]

    path = out / "trajectories.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "slot", "node_id", "x", "y", "z"])
        for rr in bundle.runs:
            for t, s in enumerate(rr.log.slots):
                for i in rr.log.abs_indices:
                    w.writerow([rr.run, t, int(i), *(_fmt(c) for c in s.positions[i])])
    written.append(path)

    path = out / "flow.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "slot", "metric_name", "value"])
        for rr in bundle.runs:
            for t, s in enumerate(rr.log.slots):
                for name, v in sorted(s.flow.items()):
                    w.writerow([rr.run, t, name, _fmt(v)])
                w.writerow([rr.run, t, "lambda2", _fmt(s.lambda2)])
            if rr.straight is not None:
                for t, s in enumerate(rr.straight.slots):
                    for name, v in sorted(s.flow.items()):
                        w.writerow([rr.run, t, f"{name}_energy_efficient", _fmt(v)])
    written.append(path)

    if bundle.mode == "energy-efficient":
        path = out / "energy.csv"
        e_max = np.mean([rr.energy_maxflow for rr in bundle.runs], axis=0)
        e_eff = np.mean([rr.energy_efficient for rr in bundle.runs], axis=0)
        d_max = np.mean([rr.path_maxflow for rr in bundle.runs], axis=0)
        sav = np.mean(bundle.savings(), axis=0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["abs_id", "D_m", "E_maxflow_J", "E_efficient_J", "savings_pct"])
            for k, i in enumerate(bundle.runs[0].log.abs_indices):
                w.writerow([int(i), _fmt(d_max[k]), _fmt(e_max[k]), _fmt(e_eff[k]), _fmt(sav[k])])
        written.append(path)

    if bundle.distfiedler_trace is not None:
        path = out / "distfiedler_error.csv"
        bundle.distfiedler_trace.to_csv(path)
        written.append(path)
    return written


def read_trajectories_csv(path) -> dict:
    """run -> (slots, n_abs, 3) array, plus node ids, from trajectories.csv."""
    rows = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(int(rec["run"]), {}).setdefault(int(rec["slot"]), []).append(
                (int(rec["node_id"]), float(rec["x"]), float(rec["y"]), float(rec["z"])))
    out = {}
    for run, slots in rows.items():
        out[run] = np.array([[p[1:] for p in sorted(slots[t])] for t in sorted(slots)])
    return out


def validate_trajectories(path, cfg: MobilityConfig, floor_active: bool = True) -> list:
    """Re-check speed and height limits on a written trajectories.csv; returns violations."""
    problems = []
    limit = cfg.v_max * cfg.step_time_s + 1e-9
    for run, arr in read_trajectories_csv(path).items():
        if arr.shape[0] > 1:
            step = np.linalg.norm(np.diff(arr, axis=0), axis=2)
            if np.any(step > limit):
                problems.append(f"run {run}: displacement {step.max():.6g} m exceeds {limit:.6g} m")
        if floor_active and np.any(arr[..., 2] < cfg.height_floor_m - 1e-9):
            problems.append(f"run {run}: ABS below height floor")
    return problems
