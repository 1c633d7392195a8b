"""SIR-weighted capacity graphs and their Laplacians."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from . import _pykernels as pk
from .channel import ChannelParams, NodeKind, channel_gain

DEFAULT_SIR_CAP = 1e12
CAPACITY_FLOOR = 1e-12


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkState:
    """Flow-graph nodes, interferers and all link-model parameters.

    ``range_threshold`` is one value for every ABS or a per-node sequence;
    ``math.inf`` disables range gating. Terrestrial nodes are never gated by
    their own range.
    """

    positions: np.ndarray
    kinds: tuple
    interferers: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    bandwidth_b: float = 1.0
    r_int: float = 5.0
    zeta: float = 1.0
    kappa: float = 10.0
    y0: float = 1e-6
    range_threshold: object = math.inf
    channel: ChannelParams = field(default_factory=ChannelParams)
    sir_cap: float = DEFAULT_SIR_CAP
    ground_links: bool = True  # False removes links between two terrestrial nodes

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        ints = np.array(self.interferers, dtype=float).reshape(-1, 3)
        ints.setflags(write=False)
        object.__setattr__(self, "interferers", ints)
        kinds = tuple(NodeKind(k) for k in self.kinds)
        object.__setattr__(self, "kinds", kinds)
        if len(kinds) != pos.shape[0]:
            raise GraphError("kinds and positions differ in length")
        if pos.shape[0] < 2:
            raise GraphError("need at least two flow-graph nodes")
        if NodeKind.SOURCE not in kinds or NodeKind.DESTINATION not in kinds:
            raise GraphError("need at least one source and one destination")
        if NodeKind.INTERFERER in kinds:
            raise GraphError("interferers belong in `interferers`, not the flow graph")
        for i, k in enumerate(kinds):
            if not k.aerial and pos[i, 2] != 0.0:
                raise GraphError(f"terrestrial node {i} must have height 0")
        if ints.size and np.any(ints[:, 2] != 0.0):
            raise GraphError("interferers must have height 0")
        if self.y0 <= 0:
            raise GraphError("y0 must be positive")
        for name in ("bandwidth_b", "r_int", "zeta", "kappa"):
            if getattr(self, name) <= 0:
                raise GraphError(f"{name} must be positive")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def aerial(self) -> np.ndarray:
        return np.array([k.aerial for k in self.kinds])

    @property
    def abs_indices(self) -> np.ndarray:
        return np.flatnonzero(self.aerial)

    def index_of(self, kind: NodeKind) -> list:
        return [i for i, k in enumerate(self.kinds) if k is kind]

    def ranges(self) -> np.ndarray:
        r = np.broadcast_to(np.asarray(self.range_threshold, dtype=float), (self.n,)).copy()
        r[~self.aerial] = np.inf
        return r

    def with_positions(self, positions) -> "NetworkState":
        return replace(self, positions=positions)


def kernel_params(state: NetworkState) -> np.ndarray:
    ch = state.channel
    prm = np.empty(pk.N_PARAMS)
    prm[pk.K_O] = ch.k_o
    prm[pk.ALPHA] = ch.path_loss_exponent_alpha
    prm[pk.MU_LOS] = ch.mu_los
    prm[pk.MU_NLOS] = ch.mu_nlos
    prm[pk.PSI] = ch.psi
    prm[pk.ETA] = ch.eta
    prm[pk.BANDWIDTH] = state.bandwidth_b
    prm[pk.R_INT] = state.r_int
    prm[pk.ZETA] = state.zeta
    prm[pk.KAPPA] = state.kappa
    prm[pk.LOG_Y0] = math.log(state.y0)
    prm[pk.SIR_CAP] = state.sir_cap
    prm[pk.CAP_FLOOR] = CAPACITY_FLOOR
    return prm


def smoothed_step(y, zeta=1.0, kappa=10.0, y0=1e-6):
    """Collision-avoidance penalty, decreasing from ~zeta at y=0 towards 0."""
    if y0 <= 0:
        raise GraphError("y0 must be positive")
    t = kappa * np.asarray(y, dtype=float) + math.log(y0)
    out = zeta * np.exp(-np.logaddexp(0.0, t))
    return float(out) if out.ndim == 0 else out


def _gain(state: NetworkState, a, ka, b, kb):
    return channel_gain(a, ka, b, kb, state.channel)


def sir(i: int, j: int, state: NetworkState) -> float:
    """SIR at receiver ``j`` for transmitter ``i`` with unit powers.

    Scalar reference path, independent of the vectorized kernels.
    """
    if i == j:
        raise GraphError("sir needs two distinct nodes")
    pos, kinds = state.positions, state.kinds
    g = _gain(state, pos[i], kinds[i], pos[j], kinds[j])
    den = sum(_gain(state, p, NodeKind.INTERFERER, pos[j], kinds[j]) for p in state.interferers)
    for k in range(state.n):
        if k not in (i, j):
            den += smoothed_step(math.dist(pos[j], pos[k]) / state.r_int,
                                 state.zeta, state.kappa, state.y0)
    if den <= 0.0:
        return state.sir_cap
    return min(g / den, state.sir_cap)


def link_capacity(i: int, j: int, state: NetworkState) -> float:
    if i == j or not (state.ground_links or state.aerial[i] or state.aerial[j]):
        return 0.0
    l1 = math.log1p(sir(i, j, state))
    l2 = math.log1p(sir(j, i, state))
    if l1 <= 0.0 or l2 <= 0.0:
        return 0.0
    a = state.bandwidth_b * l1 * l2 / (l1 + l2)
    if a < CAPACITY_FLOOR * state.bandwidth_b:
        return 0.0
    r = state.ranges()
    if math.dist(state.positions[i], state.positions[j]) > min(r[i], r[j]):
        return 0.0
    return a


@dataclass(frozen=True)
class CapacityGraph:
    adjacency: np.ndarray
    kinds: tuple = ()

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be square")
        if np.any(a < 0):
            raise GraphError("capacities must be nonnegative")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0))):
            raise GraphError("adjacency must be symmetric")
        np.fill_diagonal(a, 0.0)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def scaled(self, c: float) -> "CapacityGraph":
        return CapacityGraph(self.adjacency * c, self.kinds)

    def is_connected(self) -> bool:
        return len(components(self.adjacency)) == 1


def components(adjacency) -> list:
    """Connected components via union-find on positive entries."""
    a = np.asarray(adjacency)
    n = a.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(np.triu(a, 1) > 0)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def capacity_matrix(state: NetworkState, gated: bool = True) -> np.ndarray:
    ranges = state.ranges() if gated else np.full(state.n, np.inf)
    a = _backend.capacity_matrix(state.positions, state.aerial, state.interferers,
                                 kernel_params(state), ranges)
    if not state.ground_links:
        ground = ~state.aerial
        a[np.ix_(ground, ground)] = 0.0
    return a


def build_capacity_graph(state: NetworkState) -> CapacityGraph:
    return CapacityGraph(capacity_matrix(state), state.kinds)


@dataclass(frozen=True)
class WeightMatrix:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if np.any(~(w > 0)):
            raise GraphError("all node weights must be positive (W must be invertible)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "WeightMatrix":
        return cls(np.ones(n))

    @classmethod
    def practical(cls, kinds, terminal: float = 1.0, relay: float = 0.01) -> "WeightMatrix":
        """Large weights on sources/destinations, small on ABSs."""
        return cls([relay if NodeKind(k).aerial else terminal for k in kinds])

    def scaled(self, c: float) -> "WeightMatrix":
        return WeightMatrix(self.weights * c)


def laplacian(adjacency) -> np.ndarray:
    a = np.asarray(adjacency, dtype=float)
    return np.diag(a.sum(axis=1)) - a


def laplacians(g: CapacityGraph, w: WeightMatrix | None = None, normalized: bool = True) -> dict:
    """Laplacian variants of a capacity graph.

    Keys: ``L`` (D - A), ``L_unnorm_weighted`` (W^-1/2 L W^-1/2) and, when
    ``normalized`` is set, ``L_norm`` (D^-1/2 L D^-1/2) and ``L_weighted``
    (W^-1/2 L_norm W^-1/2). The normalized forms need every degree positive.
    """
    w = WeightMatrix.uniform(g.n) if w is None else w
    if w.weights.shape[0] != g.n:
        raise GraphError("weight vector length does not match graph")
    lap = laplacian(g.adjacency)
    wi = 1.0 / np.sqrt(w.weights)
    out = {"L": lap, "L_unnorm_weighted": wi[:, None] * lap * wi[None, :]}
    if normalized:
        beta = g.degrees
        isolated = np.flatnonzero(beta <= 0)
        if isolated.size:
            raise GraphError(f"node {int(isolated[0])} is isolated (zero degree)")
        di = 1.0 / np.sqrt(beta)
        norm = di[:, None] * lap * di[None, :]
        out["L_norm"] = norm
        out["L_weighted"] = wi[:, None] * norm * wi[None, :]
    return out
