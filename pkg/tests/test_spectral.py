import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from absnet.netgraph import CapacityGraph, GraphError, WeightMatrix, laplacians
from absnet.spectral import (CommoditySpec, SpectralError, aggregate_weights, canonical_sign,
                             cheeger_exact, fiedler, graph_fiedler, min_multicut_exact,
                             multi_weighted_cheeger_exact, null_direction,
                             verify_cheeger_bounds, weighted_cheeger_exact)

from conftest import random_connected_graph

K2 = CapacityGraph([[0, 1], [1, 0]])
K3 = CapacityGraph(np.ones((3, 3)) - np.eye(3))


def brute_ratio(a, den):
    """Minimum cut(S)/den(S) over all nonempty proper subsets, by itertools."""
    n = a.shape[0]
    best = np.inf
    for r in range(1, n):
        for s in itertools.combinations(range(n), r):
            mask = np.zeros(n, bool)
            mask[list(s)] = True
            d = den(mask)
            if d > 0:
                best = min(best, a[np.ix_(mask, ~mask)].sum() / d)
    return best


# fiedler ----------------------------------------------------------------------

def test_k2_normalized_lambda2():
    assert graph_fiedler(K2, None, "L_norm").lambda2 == pytest.approx(2.0)


def test_path_p3_lambda2():
    g = CapacityGraph([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert graph_fiedler(g, None, "L").lambda2 == pytest.approx(1.0)


def test_disconnected_lambda2_zero():
    a = np.zeros((4, 4))
    a[0, 1] = a[1, 0] = a[2, 3] = a[3, 2] = 1.0
    assert graph_fiedler(CapacityGraph(a), None, "L").lambda2 == pytest.approx(0.0, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["L", "L_norm", "L_weighted", "L_unnorm_weighted"]))
def test_fiedler_matches_dense_eig(seed, variant):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, int(rng.integers(3, 10)))
    w = WeightMatrix(rng.uniform(0.01, 2, g.n))
    res = graph_fiedler(g, w, variant)
    m = laplacians(g, w)[variant]
    assert res.lambda2 == pytest.approx(np.linalg.eigvalsh(m)[1], rel=1e-8, abs=1e-12)
    v = res.fiedler_vector
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert abs(v @ null_direction(variant, g, w)) < 1e-9 * np.linalg.norm(null_direction(variant, g, w))
    assert np.linalg.norm(m @ v - res.lambda2 * v) <= 1e-8 * np.linalg.norm(m, 2)


def test_sign_convention_and_determinism(rng):
    g = random_connected_graph(rng, 7)
    a = graph_fiedler(g).fiedler_vector
    b = graph_fiedler(g).fiedler_vector
    assert np.array_equal(a, b)
    i = int(np.argmax(np.abs(a)))
    assert a[i] > 0
    np.testing.assert_array_equal(canonical_sign(-a), a)


def test_fiedler_rejects_asymmetric():
    with pytest.raises(SpectralError):
        fiedler(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(SpectralError):
        fiedler(np.eye(2), np.zeros(2))


# exact Cheeger constants ----------------------------------------------------------

def test_cheeger_small_examples():
    assert cheeger_exact(K2) == pytest.approx(1.0)
    assert cheeger_exact(K3) == pytest.approx(1.0)
    assert weighted_cheeger_exact(K2, WeightMatrix.uniform(2)) == pytest.approx(1.0)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
def test_cheeger_scale(seed, c):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, int(rng.integers(2, 8)))
    w = WeightMatrix(rng.uniform(0.1, 2, g.n))
    assert cheeger_exact(g.scaled(c)) == pytest.approx(cheeger_exact(g), rel=1e-9)
    assert weighted_cheeger_exact(g.scaled(c), w) == pytest.approx(c * weighted_cheeger_exact(g, w), rel=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
def test_cheeger_matches_itertools(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, int(rng.integers(2, 8)))
    w = rng.uniform(0.1, 2, g.n)
    beta = g.degrees
    h = brute_ratio(g.adjacency, lambda m: min(beta[m].sum(), beta[~m].sum()))
    hw = brute_ratio(g.adjacency, lambda m: min(w[m].sum(), w[~m].sum()))
    assert cheeger_exact(g) == pytest.approx(h, rel=1e-12)
    assert weighted_cheeger_exact(g, WeightMatrix(w)) == pytest.approx(hw, rel=1e-12)


def test_weight_increase_on_small_side():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = random_connected_graph(rng, 6)
        w = rng.uniform(0.1, 2, 6)
        h0 = weighted_cheeger_exact(g, WeightMatrix(w))
        # find the minimizing set, then grow a node on its lighter side
        a = g.adjacency
        best_set = None
        best = np.inf
        for r in range(1, 6):
            for s in itertools.combinations(range(6), r):
                m = np.zeros(6, bool)
                m[list(s)] = True
                val = a[np.ix_(m, ~m)].sum() / min(w[m].sum(), w[~m].sum())
                if val < best:
                    best, best_set = val, m
        small = best_set if w[best_set].sum() <= w[~best_set].sum() else ~best_set
        w3 = w.copy()
        w3[np.flatnonzero(small)[0]] *= 1.5
        assert weighted_cheeger_exact(g, WeightMatrix(w3)) <= h0 * (1 + 1e-12)


def test_enumeration_limits():
    big = CapacityGraph(np.ones((21, 21)) - np.eye(21))
    with pytest.raises(SpectralError, match="lambda2"):
        cheeger_exact(big)
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1
    with pytest.raises(GraphError):
        cheeger_exact(CapacityGraph(a))


# Cheeger sandwiches ------------------------------------------------------------------

def test_k2_sandwich():
    rep = verify_cheeger_bounds(K2, WeightMatrix.uniform(2))
    assert rep.ok
    assert (rep.lambda2_norm / 2, rep.h, np.sqrt(2 * rep.lambda2_norm)) == pytest.approx((1, 1, 2))


def test_violation_report_serializes_graph(monkeypatch):
    import absnet.spectral as sp
    monkeypatch.setattr(sp, "cheeger_exact", lambda g: 100.0)
    rep = verify_cheeger_bounds(K3, WeightMatrix.uniform(3))
    assert not rep.ok
    assert "adjacency" in rep.graph_json


# multi-commodity ------------------------------------------------------------------

def _commodities(rng, n, k):
    out = []
    for _ in range(k):
        s, d = rng.choice(n, 2, replace=False)
        out.append(CommoditySpec(int(s), int(d), float(rng.uniform(0.5, 2)),
                                 WeightMatrix(rng.uniform(0.1, 2, n))))
    return out


def test_multi_reduces_to_weighted_at_p0(rng):
    g = random_connected_graph(rng, 6)
    c = _commodities(rng, 6, 1)
    assert multi_weighted_cheeger_exact(g, c, p=0.0) == pytest.approx(weighted_cheeger_exact(g, c[0].weight_matrix))


def test_multi_p1_is_mincut_over_k(rng):
    g = random_connected_graph(rng, 6)
    c = _commodities(rng, 6, 3)
    mincut = brute_ratio(g.adjacency, lambda m: 1.0)
    assert multi_weighted_cheeger_exact(g, c, p=1.0) == pytest.approx(mincut / 3)


def test_multi_identical_commodities(rng):
    g = random_connected_graph(rng, 5)
    c = _commodities(rng, 5, 1)
    for p in (0.0, 0.5):
        one = multi_weighted_cheeger_exact(g, c, p)
        two = multi_weighted_cheeger_exact(g, c * 2, p)
        assert two == pytest.approx(one / 2)


def test_aggregate_weights(rng):
    c = _commodities(rng, 4, 2)
    expect = c[0].weight_matrix.weights ** 0.5 + c[1].weight_matrix.weights ** 0.5
    np.testing.assert_allclose(aggregate_weights(c, 0.5).weights, expect)


def test_multicut_examples(rng):
    g = random_connected_graph(rng, 4)
    a = g.adjacency
    single = [CommoditySpec(0, 3)]
    st_cut = brute_ratio(a, lambda m: float(m[0] != m[3]))
    assert min_multicut_exact(g, single) == pytest.approx(st_cut)
    double = [CommoditySpec(0, 3, 2.0)]
    assert min_multicut_exact(g, double) == pytest.approx(st_cut / 2)
    two = [CommoditySpec(0, 3), CommoditySpec(1, 2, 0.5)]
    dem = lambda m: float(m[0] != m[3]) + 0.5 * float(m[1] != m[2])
    assert min_multicut_exact(g, two) == pytest.approx(brute_ratio(a, dem))


def test_commodity_validation():
    with pytest.raises(SpectralError):
        CommoditySpec(1, 1)
    with pytest.raises(SpectralError):
        CommoditySpec(0, 1, 0.0)
