"""Single-commodity max flow, multicast evaluation and max concurrent flow."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .netgraph import CapacityGraph

RESIDUAL_EPS = 1e-9
FEAS_TOL = 1e-9


class FlowError(ValueError):
    pass


@dataclass
class FlowResult:
    value: float
    edge_flows: dict = field(default_factory=dict)
    cut: frozenset | None = None
    diagnostic: str = ""


def _check_nodes(n, *nodes):
    for v in nodes:
        if not 0 <= v < n:
            raise FlowError(f"node {v} out of range for {n} nodes")


def max_flow(g: CapacityGraph, s: int, d: int) -> FlowResult:
    """Edmonds-Karp on the arc pair (i->j, j->i), each with capacity a_ij.

    Augmenting paths are fewest-hop BFS paths, neighbors scanned in index
    order; residuals below ``RESIDUAL_EPS`` times the largest capacity are
    treated as saturated.
    """
    a = g.adjacency
    n = g.n
    _check_nodes(n, s, d)
    if s == d:
        raise FlowError("source and destination must differ")
    eps = RESIDUAL_EPS * max(a.max(initial=0.0), 1e-300)
    flow = np.zeros((n, n))
    while True:
        resid = a - flow
        parent = [-1] * n
        parent[s] = s
        queue = deque([s])
        while queue and parent[d] < 0:
            u = queue.popleft()
            for v in range(n):
                if parent[v] < 0 and resid[u, v] > eps:
                    parent[v] = u
                    queue.append(v)
        if parent[d] < 0:
            break
        path = []
        v = d
        while v != s:
            path.append((parent[v], v))
            v = parent[v]
        push = min(resid[u, v] for u, v in path)
        for u, v in path:
            # cancel opposing flow first so at most one arc of a pair carries flow
            back = min(flow[v, u], push)
            flow[v, u] -= back
            flow[u, v] += push - back
    reach = frozenset(i for i in range(n) if parent[i] >= 0)
    value = float(flow[s].sum() - flow[:, s].sum())
    edges = {(int(i), int(j)): float(flow[i, j]) for i, j in zip(*np.nonzero(flow > 0))}
    return FlowResult(value, edges, reach)


def cut_capacity(g: CapacityGraph, side) -> float:
    side = list(side)
    rest = [j for j in range(g.n) if j not in set(side)]
    return float(g.adjacency[np.ix_(side, rest)].sum())


def verify_flow(g: CapacityGraph, result: FlowResult, s: int, d: int, tol: float = FEAS_TOL) -> bool:
    n = g.n
    f = np.zeros((n, n))
    for (i, j), x in result.edge_flows.items():
        if not (0 <= i < n and 0 <= j < n) or i == j:
            return False
        if x < -tol or x > g.adjacency[i, j] + tol:
            return False
        f[i, j] += x
    net = f.sum(axis=1) - f.sum(axis=0)
    for v in range(n):
        if v not in (s, d) and abs(net[v]) > tol:
            return False
    return abs(net[s] - result.value) <= tol and abs(-net[d] - result.value) <= tol


def multicast_flow(g: CapacityGraph, s: int, dests) -> float:
    """Multicast rate as the smallest per-destination max flow."""
    dests = list(dests)
    if not dests:
        raise FlowError("need at least one destination")
    if s in dests:
        raise FlowError("source cannot be a destination")
    return min(max_flow(g, s, t).value for t in dests)


# maximum concurrent flow ---------------------------------------------------

@dataclass
class ConcurrentFlowResult:
    value: float
    flows: list  # per commodity: dict (i, j) -> flow, already scaled to be feasible
    upper_bound: float
    diagnostic: str = ""

    @property
    def gap(self) -> float:
        if self.upper_bound == 0:
            return 0.0
        return 1.0 - self.value / self.upper_bound


def max_concurrent_flow(g: CapacityGraph, commodities, eps: float = 0.01,
                        max_phases: int = 200000) -> ConcurrentFlowResult:
    """Garg-Koenemann multiplicative-weights maximum concurrent flow.

    Runs phases of demand routing along shortest paths under exponential arc
    lengths. After each phase the accumulated flow, scaled down to its worst
    congestion, gives a feasible lower bound and the length function gives
    the dual upper bound D(l)/alpha(l); iteration stops once they are within
    ``eps``.
    """
    if not commodities:
        raise FlowError("need at least one commodity")
    if not 0 < eps < 0.5:
        raise FlowError("eps must lie in (0, 0.5)")
    n = g.n
    for c in commodities:
        _check_nodes(n, c.source, c.destination)
        if c.source == c.destination:
            raise FlowError("commodity source and destination must differ")
    cap = np.array(g.adjacency, dtype=float)
    arc = cap > 0
    k = len(commodities)
    hops = np.where(arc, 1.0, np.inf)
    for c in commodities:
        if math.isinf(_backend.shortest_path_length(hops, c.source, c.destination)):
            return ConcurrentFlowResult(0.0, [dict() for _ in commodities], 0.0,
                                        f"commodity {c.source}->{c.destination} is disconnected")
    step = eps / 3.0
    # path choice and D(l)/alpha(l) are scale-free, so the textbook initial
    # length delta/c (which underflows for small eps) is replaced by 1/c and
    # lengths are renormalized after every phase
    length = np.full((n, n), np.inf)
    length[arc] = 1.0 / cap[arc]
    flow = np.zeros((k, n, n))
    safe_cap = np.where(arc, cap, 1.0)
    best_lb, best_ub, best_flows = 0.0, math.inf, None
    next_check = 1
    for phase in range(1, max_phases + 1):
        for idx, c in enumerate(commodities):
            _backend.route_demand(length, cap, flow[idx], c.source, c.destination, c.demand, step)
        if phase < next_check and phase < max_phases:
            continue
        # bounds are checked on a geometric schedule to keep bookkeeping cheap
        next_check = phase + min(256, max(1, phase // 16))
        length[arc] /= length[arc].max()
        alpha = sum(c.demand * _backend.shortest_path_length(length, c.source, c.destination)
                    for c in commodities)
        best_ub = min(best_ub, float((cap[arc] * length[arc]).sum()) / alpha)
        congestion = float(np.max(flow.sum(axis=0) / safe_cap))
        routed = min((flow[i, c.source].sum() - flow[i, :, c.source].sum()) / c.demand
                     for i, c in enumerate(commodities))
        lb = routed / congestion
        if lb > best_lb:
            best_lb = float(lb)
            best_flows = flow / congestion
        if best_lb >= (1.0 - eps) * best_ub:
            break
    out = []
    for idx in range(k):
        ii, jj = np.nonzero(best_flows[idx] > 0)
        out.append({(int(i), int(j)): float(best_flows[idx, i, j]) for i, j in zip(ii, jj)})
    return ConcurrentFlowResult(best_lb, out, best_ub)


def verify_concurrent(g: CapacityGraph, result: ConcurrentFlowResult, commodities,
                      tol: float = 1e-7) -> bool:
    """Joint capacity, per-commodity conservation, and routed >= value * demand."""
    n = g.n
    total = np.zeros((n, n))
    for c, fl in zip(commodities, result.flows):
        f = np.zeros((n, n))
        for (i, j), x in fl.items():
            if x < -tol:
                return False
            f[i, j] += x
        total += f
        net = f.sum(axis=1) - f.sum(axis=0)
        for v in range(n):
            if v not in (c.source, c.destination) and abs(net[v]) > tol * max(1.0, np.abs(f).max()):
                return False
        if net[c.source] < result.value * c.demand * (1 - 1e-9) - tol:
            return False
    scale = max(1.0, g.adjacency.max())
    return bool(np.all(total <= g.adjacency + tol * scale))
