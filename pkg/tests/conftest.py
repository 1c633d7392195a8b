import itertools
import os

import numpy as np
import pytest
from hypothesis import settings

from absnet.channel import NodeKind
from absnet.netgraph import CapacityGraph, NetworkState, WeightMatrix, build_capacity_graph, laplacians

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

S, D, A = NodeKind.SOURCE, NodeKind.DESTINATION, NodeKind.ABS

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_connected_graph(rng, n, p=0.6, lo=0.5, hi=1.5):
    """Erdos-Renyi capacities, resampled until connected."""
    while True:
        upper = np.triu((rng.random((n, n)) < p) * rng.uniform(lo, hi, (n, n)), 1)
        g = CapacityGraph(upper + upper.T)
        if g.is_connected():
            return g


def random_state(rng, n_abs=None, n_int=None, extent=100.0):
    n_abs = int(rng.integers(1, 7)) if n_abs is None else n_abs
    n_int = int(rng.integers(0, 3)) if n_int is None else n_int
    ground = np.column_stack([rng.uniform(0, extent, (2, 2)), np.zeros(2)])
    air = np.column_stack([rng.uniform(0, extent, (n_abs, 2)), rng.uniform(10, 60, n_abs)])
    ints = np.column_stack([rng.uniform(0, extent, (n_int, 2)), np.zeros(n_int)])
    return NetworkState(np.vstack([ground, air]), (S, D) + (A,) * n_abs, ints)


# oracles ---------------------------------------------------------------------

def brute_min_cut(a, s, d):
    """Minimum s-d cut over every vertex subset containing s but not d."""
    n = a.shape[0]
    best = np.inf
    others = [v for v in range(n) if v not in (s, d)]
    for r in range(len(others) + 1):
        for extra in itertools.combinations(others, r):
            side = np.zeros(n, bool)
            side[[s, *extra]] = True
            best = min(best, a[np.ix_(side, ~side)].sum())
    return best


def lp_concurrent(a, commodities):
    """Exact max concurrent flow by linear programming (arc formulation)."""
    from scipy.optimize import linprog

    n = a.shape[0]
    arcs = [(i, j) for i in range(n) for j in range(n) if a[i, j] > 0]
    k, m = len(commodities), len(arcs)
    nv = k * m + 1
    c = np.zeros(nv)
    c[-1] = -1.0
    a_eq = []
    for ci, com in enumerate(commodities):
        for v in range(n):
            row = np.zeros(nv)
            for e, (i, j) in enumerate(arcs):
                if i == v:
                    row[ci * m + e] += 1
                if j == v:
                    row[ci * m + e] -= 1
            if v == com.source:
                row[-1] = -com.demand
            elif v == com.destination:
                row[-1] = com.demand
            a_eq.append(row)
    a_ub = np.zeros((m, nv))
    for e in range(m):
        a_ub[e, [ci * m + e for ci in range(k)]] = 1.0
    b_ub = np.array([a[i, j] for i, j in arcs])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=np.array(a_eq), b_eq=np.zeros(len(a_eq)),
                  bounds=[(0, None)] * nv, method="highs")
    assert res.status == 0
    return -res.fun


def fd_lambda2(state, w, h=1e-3, objective="L_unnorm_weighted"):
    """Central differences of lambda2 with respect to every ABS coordinate."""
    from absnet.mobility import lambda2_value

    out = np.zeros((len(state.abs_indices), 3))
    for a, i in enumerate(state.abs_indices):
        for ax in range(3):
            p = np.array(state.positions)
            p[i, ax] += h
            hi = lambda2_value(state.with_positions(p), w, objective)
            p[i, ax] -= 2 * h
            lo = lambda2_value(state.with_positions(p), w, objective)
            out[a, ax] = (hi - lo) / (2 * h)
    return out


def oracle_states(rng, count, h=1e-3):
    """Random connected states (N <= 10) whose finite-difference oracle is resolvable.

    A state is skipped when eigenvalue rounding (about eps * ||L|| per
    solve) divided by the step is not negligible next to the gradient.
    Returns (state, weights, fd_gradient, skipped).
    """
    out, skipped = [], 0
    while len(out) < count:
        st = random_state(rng, int(rng.integers(1, 9)), int(rng.integers(1, 3)), extent=60.0)
        g = build_capacity_graph(st)
        if st.n > 10 or not g.is_connected():
            continue
        w = WeightMatrix(rng.uniform(0.01, 1, st.n))
        lap = laplacians(g, w, normalized=False)["L_unnorm_weighted"]
        fd = fd_lambda2(st, w, h)
        noise = np.finfo(float).eps * np.linalg.norm(lap, 2) * st.n / h
        if noise > 1e-6 * np.linalg.norm(fd):
            skipped += 1
            continue
        out.append((st, w, fd))
    return out, skipped


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
