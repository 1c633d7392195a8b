"""Pure numpy implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` exactly; selected when the compiled extension is
unavailable. ``prm`` is the packed parameter vector built by
``netgraph.kernel_params``.
"""
import numpy as np

# indices into the packed parameter vector
K_O, ALPHA, MU_LOS, MU_NLOS, PSI, ETA, BANDWIDTH, R_INT, ZETA, KAPPA, LOG_Y0, SIR_CAP, CAP_FLOOR = range(13)
N_PARAMS = 13


def _loss(d, dh, both_aerial, prm):
    fs = (prm[K_O] * d) ** prm[ALPHA]
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.degrees(np.arcsin(np.clip(dh / d, 0.0, 1.0)))
    p_los = 1.0 / (1.0 + prm[PSI] * np.exp(-prm[ETA] * (theta - prm[PSI])))
    mix = p_los * prm[MU_LOS] + (1.0 - p_los) * prm[MU_NLOS]
    return fs * np.where(both_aerial, prm[MU_LOS], mix)


def smoothed_step(y, prm):
    # zeta * e / (1 + e) with e = exp(-kappa*y - ln y0), overflow-safe
    return prm[ZETA] * np.exp(-np.logaddexp(0.0, prm[KAPPA] * y + prm[LOG_Y0]))


def sir_matrix(pos, aerial, interferers, prm):
    """SIR[i, j] at receiver j for transmitter i; zero diagonal."""
    n = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt((diff ** 2).sum(-1))
    dh = np.abs(diff[..., 2])
    both = aerial[:, None] & aerial[None, :]
    eye = np.eye(n, dtype=bool)
    d_safe = np.where(eye, 1.0, d)
    g = np.where(eye, 0.0, 1.0 / _loss(d_safe, dh, both, prm))

    if interferers.shape[0]:
        di = interferers[:, None, :] - pos[None, :, :]
        dpi = np.sqrt((di ** 2).sum(-1))
        g_int = 1.0 / _loss(dpi, np.abs(di[..., 2]), np.zeros_like(dpi, dtype=bool), prm)
        interf = g_int.sum(axis=0)
    else:
        interf = np.zeros(n)

    u = np.where(eye, 0.0, smoothed_step(d / prm[R_INT], prm))
    # crowd[i, j] = sum over k not in {i, j} of u(d_jk / r_int)
    keep = ~(eye[:, None, :] | eye[None, :, :])
    crowd = np.einsum("jk,ijk->ij", u, keep.astype(float))
    den = interf[None, :] + crowd
    with np.errstate(divide="ignore", invalid="ignore"):
        sir = np.where(den > 0.0, g / den, prm[SIR_CAP])
    sir = np.minimum(sir, prm[SIR_CAP])
    sir[eye] = 0.0
    return sir


def capacity_matrix(pos, aerial, interferers, prm, ranges):
    pos = np.asarray(pos, dtype=float)
    sir = sir_matrix(pos, aerial, interferers, prm)
    l = np.log1p(sir)
    lt = l.T
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where((l > 0) & (lt > 0), prm[BANDWIDTH] * l * lt / (l + lt), 0.0)
    a[a < prm[CAP_FLOOR] * prm[BANDWIDTH]] = 0.0
    np.fill_diagonal(a, 0.0)
    d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    reach = np.minimum(ranges[:, None], ranges[None, :])
    a[d > reach] = 0.0
    return a


def lambda2_gradient_fd(pos, aerial, interferers, prm, pair_weight, movable, h):
    """Edge-sum gradient with central-difference capacity derivatives.

    ``pair_weight[p, q]`` holds the squared scaled Fiedler difference for
    connected pairs and zero elsewhere. Capacities are differentiated
    without range gating.
    """
    pos = np.array(pos, dtype=float)
    ungated = np.full(pos.shape[0], np.inf)
    upper = np.triu(pair_weight, 1)
    out = np.zeros((len(movable), 3))
    for r, i in enumerate(movable):
        for ax in range(3):
            x0 = pos[i, ax]
            pos[i, ax] = x0 + h
            ap = capacity_matrix(pos, aerial, interferers, prm, ungated)
            pos[i, ax] = x0 - h
            am = capacity_matrix(pos, aerial, interferers, prm, ungated)
            pos[i, ax] = x0
            out[r, ax] = (upper * (ap - am)).sum() / (2.0 * h)
    return out


def _dijkstra(length, s, t):
    # dense O(n^2) Dijkstra; ties go to the lowest node index
    n = length.shape[0]
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[s] = 0.0
    for _ in range(n):
        cand = np.where(done, np.inf, dist)
        u = int(np.argmin(cand))
        best = cand[u]
        if not np.isfinite(best) or u == t:
            break
        done[u] = True
        nd = best + length[u]
        better = ~done & (nd < dist)
        dist[better] = nd[better]
        prev[better] = u
    return dist[t], prev


def shortest_path_length(length, s, t):
    return float(_dijkstra(np.asarray(length, dtype=float), s, t)[0])


def route_demand(length, cap, flow, s, t, demand, step):
    """Route ``demand`` along successive shortest paths, updating lengths in place."""
    remaining, count = demand, 0
    while remaining > 1e-15 * demand:
        d, prev = _dijkstra(length, s, t)
        if not np.isfinite(d):
            raise ValueError("destination unreachable")
        path = []
        v = t
        while v != s:
            path.append((int(prev[v]), v))
            v = int(prev[v])
        push = min(remaining, min(cap[u, v] for u, v in path))
        for u, v in path:
            flow[u, v] += push
            length[u, v] *= 1.0 + step * push / cap[u, v]
        remaining -= push
        count += 1
    return count
