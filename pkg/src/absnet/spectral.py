"""Fiedler pairs and exact (enumerated) Cheeger-type constants."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .netgraph import CapacityGraph, GraphError, WeightMatrix, laplacians

MAX_CHEEGER_NODES = 20
MAX_MULTI_NODES = 16
DEFAULT_P = 0.5


class SpectralError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralResult:
    lambda2: float
    fiedler_vector: np.ndarray
    variant: str = "custom"
    lambda3: float = float("nan")

    @property
    def gap(self) -> float:
        return self.lambda3 - self.lambda2


@dataclass(frozen=True)
class CommoditySpec:
    source: int
    destination: int
    demand: float = 1.0
    weight_matrix: WeightMatrix | None = None

    def __post_init__(self):
        if self.source == self.destination:
            raise SpectralError("commodity source and destination must differ")
        if not self.demand > 0:
            raise SpectralError("commodity demand must be positive")


def canonical_sign(v: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Flip ``v`` so its first largest-magnitude component is positive."""
    mag = np.abs(v)
    idx = int(np.flatnonzero(mag >= mag.max() * (1 - rtol))[0])
    return -v if v[idx] < 0 else v


def fiedler(matrix, null_direction, variant: str = "custom") -> SpectralResult:
    """Minimize the Rayleigh quotient of ``matrix`` orthogonal to ``null_direction``.

    The matrix is restricted to the orthogonal complement of the null
    direction and decomposed densely.
    """
    m = np.asarray(matrix, dtype=float)
    scale = max(1.0, np.abs(m).max(initial=0.0))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SpectralError("matrix must be square")
    if not np.allclose(m, m.T, rtol=0, atol=1e-9 * scale):
        raise SpectralError("matrix is not symmetric")
    n = m.shape[0]
    u = np.asarray(null_direction, dtype=float).ravel()
    if u.shape[0] != n or not np.any(u):
        raise SpectralError("null direction must be a nonzero length-N vector")
    u = u / np.linalg.norm(u)
    # orthonormal basis of the complement of u
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(n)]))
    basis = q[:, 1:n]
    sym = 0.5 * (m + m.T)
    try:
        vals, vecs = np.linalg.eigh(basis.T @ sym @ basis)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed: {exc}") from exc
    v = basis @ vecs[:, 0]
    v -= (u @ v) * u
    v /= np.linalg.norm(v)
    v = canonical_sign(v)
    lam = float(vals[0])
    resid = np.linalg.norm(basis.T @ (sym @ v - lam * v))
    if resid > 1e-8 * max(np.linalg.norm(sym, 2), 1e-300):
        raise ConvergenceError(f"residual {resid:.3e} too large after deflation")
    lam3 = float(vals[1]) if n > 2 else float("inf")
    return SpectralResult(lam, v, variant, lam3)


def null_direction(variant: str, g: CapacityGraph, w: WeightMatrix | None = None) -> np.ndarray:
    w = np.ones(g.n) if w is None else w.weights
    if variant == "L":
        return np.ones(g.n)
    if variant == "L_unnorm_weighted":
        return np.sqrt(w)
    if variant == "L_norm":
        return np.sqrt(g.degrees)
    if variant == "L_weighted":
        return np.sqrt(w * g.degrees)
    raise SpectralError(f"unknown Laplacian variant {variant!r}")


def graph_fiedler(g: CapacityGraph, w: WeightMatrix | None = None,
                  variant: str = "L_unnorm_weighted") -> SpectralResult:
    laps = laplacians(g, w, normalized=variant in ("L_norm", "L_weighted"))
    return fiedler(laps[variant], null_direction(variant, g, w), variant)


# subset enumeration -------------------------------------------------------

def _subset_masks(n: int, chunk: int = 1 << 15):
    """Yield 0/1 membership matrices for every nonempty proper subset S
    that excludes node n-1 (S and its complement give the same ratio)."""
    total = 1 << (n - 1)
    bits = 1 << np.arange(n - 1)
    for start in range(1, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        x = np.zeros((ids.size, n))
        x[:, : n - 1] = (ids[:, None] & bits) > 0
        yield x


def _cut_values(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    # cut(S) = sum_{i in S, j notin S} a_ij
    return np.einsum("si,ij,sj->s", x, a, 1.0 - x)


def _check_enum(g: CapacityGraph, limit: int):
    if g.n > limit:
        raise SpectralError(
            f"exact enumeration limited to N <= {limit} (got {g.n}); use the lambda2 bounds instead")
    if g.n < 2:
        raise SpectralError("need at least two nodes")


def cheeger_exact(g: CapacityGraph) -> float:
    _check_enum(g, MAX_CHEEGER_NODES)
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    a, beta = g.adjacency, g.degrees
    total = beta.sum()
    best = np.inf
    for x in _subset_masks(g.n):
        vol = x @ beta
        best = min(best, float(np.min(_cut_values(a, x) / np.minimum(vol, total - vol))))
    return best


def weighted_cheeger_exact(g: CapacityGraph, w: WeightMatrix) -> float:
    _check_enum(g, MAX_CHEEGER_NODES)
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    ww = w.weights
    total = ww.sum()
    best = np.inf
    for x in _subset_masks(g.n):
        sw = x @ ww
        best = min(best, float(np.min(_cut_values(g.adjacency, x) / np.minimum(sw, total - sw))))
    return best


def aggregate_weights(commodities, p: float = DEFAULT_P) -> WeightMatrix:
    """Per-node aggregate weight sum_k (w_i^(k))^(1-p)."""
    return WeightMatrix(sum(c.weight_matrix.weights ** (1.0 - p) for c in commodities))


def multi_weighted_laplacian(g: CapacityGraph, commodities, p: float = DEFAULT_P) -> np.ndarray:
    return laplacians(g, aggregate_weights(commodities, p))["L_weighted"]


def multi_weighted_cheeger_exact(g: CapacityGraph, commodities, p: float = DEFAULT_P) -> float:
    """Cut over the sum of per-commodity bottlenecks, each raised to 1 - p.

    gamma_k = min(|S|_k, |S-bar|_k)^-p is evaluated per subset, so each
    denominator term is min(...)^(1-p).
    """
    _check_enum(g, MAX_MULTI_NODES)
    if not commodities:
        raise SpectralError("need at least one commodity")
    for c in commodities:
        if c.weight_matrix is None:
            raise SpectralError("every commodity needs a weight matrix")
    best = np.inf
    for x in _subset_masks(g.n):
        den = 0.0
        for c in commodities:
            sw = x @ c.weight_matrix.weights
            den = den + np.minimum(sw, c.weight_matrix.weights.sum() - sw) ** (1.0 - p)
        best = min(best, float(np.min(_cut_values(g.adjacency, x) / den)))
    return best


def min_multicut_exact(g: CapacityGraph, commodities) -> float:
    """Minimum over subsets of cut capacity per unit of separated demand."""
    _check_enum(g, MAX_MULTI_NODES)
    if not commodities:
        raise SpectralError("need at least one commodity")
    best = np.inf
    for x in _subset_masks(g.n):
        sep = np.zeros(x.shape[0])
        for c in commodities:
            sep += c.demand * (x[:, c.source] != x[:, c.destination])
        ok = sep > 0
        if np.any(ok):
            best = min(best, float(np.min(_cut_values(g.adjacency, x[ok]) / sep[ok])))
    if not np.isfinite(best):
        raise SpectralError("no subset separates any commodity")
    return best


# Cheeger inequality checks -------------------------------------------------

@dataclass
class CheegerReport:
    lambda2_norm: float
    h: float
    lambda2_weighted: float
    h_w: float
    delta_max: float
    w_min: float
    ok: bool = True
    violations: list = field(default_factory=list)
    graph_json: str = ""


def verify_cheeger_bounds(g: CapacityGraph, w: WeightMatrix, rtol: float = 1e-9) -> CheegerReport:
    """Check both Cheeger sandwiches against the enumerated constants.

    The weighted sandwich uses lambda2 of W^-1/2 L W^-1/2, the form whose
    quadratic form matches the weighted cut ratio.
    """
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    lam_n = graph_fiedler(g, None, "L_norm").lambda2
    lam_w = graph_fiedler(g, w, "L_unnorm_weighted").lambda2
    h = cheeger_exact(g)
    hw = weighted_cheeger_exact(g, w)
    dmax = float(g.degrees.max())
    wmin = float(w.weights.min())
    rep = CheegerReport(lam_n, h, lam_w, hw, dmax, wmin)
    checks = [
        ("lambda2/2 <= h", lam_n / 2, h),
        ("h <= sqrt(2 lambda2)", h, np.sqrt(2 * lam_n)),
        ("lambda2_W/2 <= h_W", lam_w / 2, hw),
        ("h_W <= sqrt(2 dmax lambda2_W / wmin)", hw, np.sqrt(2 * dmax * lam_w / wmin)),
    ]
    for name, lo, hi in checks:
        if lo > hi * (1 + rtol) + 1e-12:
            rep.violations.append(f"{name}: {lo!r} > {hi!r}")
    if rep.violations:
        rep.ok = False
        rep.graph_json = json.dumps({"adjacency": g.adjacency.tolist(),
                                     "weights": w.weights.tolist()})
    return rep
