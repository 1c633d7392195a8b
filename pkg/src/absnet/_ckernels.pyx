# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: capacity matrix and finite-difference lambda2 gradient.

Same signatures and arithmetic as ``_pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, exp, asin, log1p, fabs, INFINITY

cnp.import_array()

cdef enum:
    K_O = 0
    ALPHA = 1
    MU_LOS = 2
    MU_NLOS = 3
    PSI = 4
    ETA = 5
    BANDWIDTH = 6
    R_INT = 7
    ZETA = 8
    KAPPA = 9
    LOG_Y0 = 10
    SIR_CAP = 11
    CAP_FLOOR = 12

cdef double RAD2DEG = 57.29577951308232


cdef inline double _loss(double d, double dh, bint both_aerial, const double[:] prm) nogil:
    cdef double fs = pow(prm[K_O] * d, prm[ALPHA])
    cdef double s, theta, p_los
    if both_aerial:
        return fs * prm[MU_LOS]
    s = dh / d
    if s > 1.0:
        s = 1.0
    theta = asin(s) * RAD2DEG
    p_los = 1.0 / (1.0 + prm[PSI] * exp(-prm[ETA] * (theta - prm[PSI])))
    return fs * (p_los * prm[MU_LOS] + (1.0 - p_los) * prm[MU_NLOS])


cdef inline double _step(double y, const double[:] prm) nogil:
    cdef double t = prm[KAPPA] * y + prm[LOG_Y0]
    # zeta / (1 + exp(t)) without overflow
    if t > 0:
        return prm[ZETA] * exp(-t) / (1.0 + exp(-t))
    return prm[ZETA] / (1.0 + exp(t))


cdef inline double _dist(const double[:, :] a, Py_ssize_t i, const double[:, :] b, Py_ssize_t j) nogil:
    cdef double dx = a[i, 0] - b[j, 0]
    cdef double dy = a[i, 1] - b[j, 1]
    cdef double dz = a[i, 2] - b[j, 2]
    return sqrt(dx * dx + dy * dy + dz * dz)


cdef void _capacity(const double[:, :] pos, const unsigned char[:] aerial,
                    const double[:, :] interf, const double[:] prm,
                    const double[:] ranges, double[:, :] g, double[:, :] u,
                    double[:] ibuf, double[:, :] out) nogil:
    cdef Py_ssize_t n = pos.shape[0], m = interf.shape[0]
    cdef Py_ssize_t i, j, k, p
    cdef double d, den, crowd, s1, s2, l1, l2, a, reach
    for i in range(n):
        g[i, i] = 0.0
        u[i, i] = 0.0
        for j in range(i + 1, n):
            d = _dist(pos, i, pos, j)
            g[i, j] = 1.0 / _loss(d, fabs(pos[i, 2] - pos[j, 2]), aerial[i] and aerial[j], prm)
            g[j, i] = g[i, j]
            u[i, j] = _step(d / prm[R_INT], prm)
            u[j, i] = u[i, j]
    for j in range(n):
        ibuf[j] = 0.0
        for p in range(m):
            d = _dist(interf, p, pos, j)
            ibuf[j] += 1.0 / _loss(d, fabs(interf[p, 2] - pos[j, 2]), False, prm)
    # reuse the strict lower triangle of ``out`` as scratch for SIR
    for i in range(n):
        out[i, i] = 0.0
        for j in range(n):
            if i == j:
                continue
            crowd = 0.0
            for k in range(n):
                if k != i and k != j:
                    crowd += u[j, k]
            den = ibuf[j] + crowd
            if den > 0.0:
                s1 = g[i, j] / den
                if s1 > prm[SIR_CAP]:
                    s1 = prm[SIR_CAP]
            else:
                s1 = prm[SIR_CAP]
            out[i, j] = s1
    for i in range(n):
        for j in range(i + 1, n):
            l1 = log1p(out[i, j])
            l2 = log1p(out[j, i])
            if l1 > 0.0 and l2 > 0.0:
                a = prm[BANDWIDTH] * l1 * l2 / (l1 + l2)
            else:
                a = 0.0
            if a < prm[CAP_FLOOR] * prm[BANDWIDTH]:
                a = 0.0
            reach = ranges[i] if ranges[i] < ranges[j] else ranges[j]
            if _dist(pos, i, pos, j) > reach:
                a = 0.0
            out[i, j] = a
            out[j, i] = a


def capacity_matrix(pos, aerial, interferers, prm, ranges):
    cdef const double[:, :] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0]
    out = np.zeros((n, n))
    g = np.empty((n, n))
    u = np.empty((n, n))
    ibuf = np.empty(n)
    _capacity(P, np.ascontiguousarray(aerial, dtype=np.uint8),
              np.ascontiguousarray(interferers, dtype=np.float64).reshape(-1, 3),
              np.ascontiguousarray(prm, dtype=np.float64),
              np.ascontiguousarray(ranges, dtype=np.float64), g, u, ibuf, out)
    return out


def lambda2_gradient_fd(pos, aerial, interferers, prm, pair_weight, movable, h):
    cdef double[:, :] P = np.array(pos, dtype=np.float64, order="C")
    cdef Py_ssize_t n = P.shape[0]
    cdef const unsigned char[:] A = np.ascontiguousarray(aerial, dtype=np.uint8)
    cdef const double[:, :] I = np.ascontiguousarray(interferers, dtype=np.float64).reshape(-1, 3)
    cdef const double[:] Q = np.ascontiguousarray(prm, dtype=np.float64)
    cdef const double[:, :] Z = np.ascontiguousarray(pair_weight, dtype=np.float64)
    cdef const long[:] mv = np.ascontiguousarray(movable, dtype=np.int64)
    cdef double[:] R = np.full(n, np.inf)
    cdef double[:, :] g = np.empty((n, n))
    cdef double[:, :] u = np.empty((n, n))
    cdef double[:] ib = np.empty(n)
    cdef double[:, :] ap = np.empty((n, n))
    cdef double[:, :] am = np.empty((n, n))
    res = np.zeros((mv.shape[0], 3))
    cdef double[:, :] out = res
    cdef Py_ssize_t r, ax, p, q, i
    cdef double x0, acc, hh = h
    with nogil:
        for r in range(mv.shape[0]):
            i = mv[r]
            for ax in range(3):
                x0 = P[i, ax]
                P[i, ax] = x0 + hh
                _capacity(P, A, I, Q, R, g, u, ib, ap)
                P[i, ax] = x0 - hh
                _capacity(P, A, I, Q, R, g, u, ib, am)
                P[i, ax] = x0
                acc = 0.0
                for p in range(n):
                    for q in range(p + 1, n):
                        if Z[p, q] != 0.0:
                            acc = acc + Z[p, q] * (ap[p, q] - am[p, q])
                out[r, ax] = acc / (2.0 * hh)
    return res


cdef double _dijkstra(const double[:, :] L, Py_ssize_t s, Py_ssize_t t,
                      double[:] dist, long[:] prev, unsigned char[:] done) noexcept nogil:
    cdef Py_ssize_t n = L.shape[0], it, v, u
    cdef double best, nd
    for v in range(n):
        dist[v] = INFINITY
        prev[v] = -1
        done[v] = 0
    dist[s] = 0.0
    for it in range(n):
        u = -1
        best = INFINITY
        for v in range(n):
            if not done[v] and dist[v] < best:
                best = dist[v]
                u = v
        if u < 0 or u == t:
            break
        done[u] = 1
        for v in range(n):
            if not done[v]:
                nd = best + L[u, v]
                if nd < dist[v]:
                    dist[v] = nd
                    prev[v] = u
    return dist[t]


def shortest_path_length(length, Py_ssize_t s, Py_ssize_t t):
    cdef const double[:, :] L = np.ascontiguousarray(length, dtype=np.float64)
    cdef Py_ssize_t n = L.shape[0]
    cdef double[:] dist = np.empty(n)
    cdef long[:] prev = np.empty(n, dtype=np.int64)
    cdef unsigned char[:] done = np.empty(n, dtype=np.uint8)
    return _dijkstra(L, s, t, dist, prev, done)


def route_demand(double[:, :] length, const double[:, :] cap, double[:, :] flow,
                 Py_ssize_t s, Py_ssize_t t, double demand, double step):
    """Route ``demand`` along successive shortest paths, updating lengths in place."""
    cdef Py_ssize_t n = length.shape[0], u, v
    cdef double[:] dist = np.empty(n)
    cdef long[:] prev = np.empty(n, dtype=np.int64)
    cdef unsigned char[:] done = np.empty(n, dtype=np.uint8)
    cdef double remaining = demand, push
    cdef long count = 0
    with nogil:
        while remaining > 1e-15 * demand:
            if _dijkstra(length, s, t, dist, prev, done) == INFINITY:
                break
            push = remaining
            v = t
            while v != s:
                u = prev[v]
                if cap[u, v] < push:
                    push = cap[u, v]
                v = u
            v = t
            while v != s:
                u = prev[v]
                flow[u, v] += push
                length[u, v] *= 1.0 + step * push / cap[u, v]
                v = u
            remaining -= push
            count += 1
    if remaining > 1e-15 * demand:
        raise ValueError("destination unreachable")
    return count
