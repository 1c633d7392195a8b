"""Simulated distributed Fiedler-vector computation.

Synchronous rounds, no message loss. Each node owns one entry of the
estimate. Per outer iteration the nodes run one shifted power step on
sigma*I - L_W (L_W = W^-1/2 L W^-1/2), which needs only neighbor entries,
then deflate the known null direction W^1/2 1 and renormalize. The two
global scalars this needs are estimated by dynamic average consensus:
each node keeps a running average that absorbs the change in its local
term and is mixed ``gossip_rounds`` times with Metropolis weights, so the
estimates become exact as the iteration settles.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .netgraph import CapacityGraph, GraphError, WeightMatrix, laplacians
from .spectral import graph_fiedler, null_direction


SHIFT_MARGIN = 1e-3


class DistributedFiedlerError(RuntimeError):
    pass


@dataclass
class MessageTrace:
    iterations: int = 0
    per_iteration_error: list = field(default_factory=list)
    messages_cumulative: list = field(default_factory=list)
    messages_sent: int = 0
    per_node_entries: np.ndarray | None = None
    diagnostic: str = ""

    @property
    def final_error(self) -> float:
        return self.per_iteration_error[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "error_norm", "messages"])
            for t, (e, m) in enumerate(zip(self.per_iteration_error, self.messages_cumulative), 1):
                w.writerow([t, repr(float(e)), m])


class MessageBus:
    """Counts neighbor-to-neighbor deliveries over the edges of ``adjacency``."""

    def __init__(self, adjacency):
        self.mask = np.asarray(adjacency) > 0
        np.fill_diagonal(self.mask, False)
        self.sent = 0

    def neighbors(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.mask[node])

    def send(self, node: int, payload) -> dict:
        out = {int(j): payload for j in self.neighbors(node)}
        self.sent += len(out)
        return out

    def broadcast(self, values: np.ndarray) -> np.ndarray:
        """Every node sends its value to all neighbors.

        Returns inbox[i, j] = value of j as received by i (zero when j is
        not a neighbor of i).
        """
        values = np.asarray(values, dtype=float)
        self.sent += int(self.mask.sum())
        return np.where(self.mask, values[None, :], 0.0)

    def max_consensus(self, values: np.ndarray, rounds: int) -> np.ndarray:
        """Each node repeatedly keeps the largest value among itself and its
        neighbors; exact global maximum once ``rounds`` >= graph diameter."""
        m = np.asarray(values, dtype=float).copy()
        for _ in range(rounds):
            inbox = self.broadcast(m)
            m = np.maximum(m, np.where(self.mask, inbox, -np.inf).max(axis=1, initial=-np.inf))
        return m


def neighbor_exchange(node: int, payload, g: CapacityGraph, bus: MessageBus | None = None) -> dict:
    bus = MessageBus(g.adjacency) if bus is None else bus
    return bus.send(node, payload)


def metropolis_weights(mask: np.ndarray) -> np.ndarray:
    deg = mask.sum(axis=1)
    mix = np.where(mask, 1.0 / (1.0 + np.maximum(deg[:, None], deg[None, :])), 0.0)
    np.fill_diagonal(mix, 1.0 - mix.sum(axis=1))
    return mix


class _Tracker:
    """Dynamic average consensus on a time-varying local signal.

    ``rounds`` synchronous Metropolis rounds are applied as one precomputed
    matrix power; each round still costs one message per directed edge.
    """

    def __init__(self, bus: MessageBus, mixing: np.ndarray, rounds: int, r0: np.ndarray):
        self.bus, self.mixing, self.rounds = bus, mixing, rounds
        self.r = r0.copy()
        self.z = r0.copy()
        self._gossip()

    def _gossip(self):
        self.bus.sent += self.rounds * int(self.bus.mask.sum())
        self.z = self.mixing @ self.z

    def update(self, r: np.ndarray) -> np.ndarray:
        self.z = self.z + r - self.r
        self.r = r.copy()
        self._gossip()
        return self.z


def local_power_step(x: np.ndarray, lap: np.ndarray, sigma: float, bus: MessageBus) -> np.ndarray:
    """y_i = sigma*x_i - sum_j L_ij x_j using only entries received from neighbors."""
    inbox = bus.broadcast(x)
    off = np.where(bus.mask, lap, 0.0)
    return (sigma - np.diag(lap)) * x - (off * inbox).sum(axis=1)


def distributed_fiedler(g: CapacityGraph, w: WeightMatrix | None = None, outer_iters: int = 200,
                        gossip_rounds: int = 30, x0: np.ndarray | None = None, seed: int = 0,
                        reference: np.ndarray | None = None,
                        variant: str = "L_unnorm_weighted", tol: float | None = None) -> MessageTrace:
    """Run the distributed iteration and trace its error against the centralized vector.

    ``variant`` selects the Laplacian (see ``spectral.null_direction``).
    With ``tol`` set, nodes stop early once the largest change of any
    (unit-RMS) entry, spread by max-consensus over ``gossip_rounds`` rounds,
    falls below ``tol``; ``outer_iters`` is then a cap.

    ``x0`` warm-starts the per-node entries; otherwise each node draws its own
    starting entry from ``seed``.
    """
    if outer_iters < 1 or gossip_rounds < 1:
        raise ValueError("outer_iters and gossip_rounds must be >= 1")
    if not g.is_connected():
        raise GraphError("distributed Fiedler computation needs a connected graph")
    w = WeightMatrix.uniform(g.n) if w is None else w
    lap = laplacians(g, w, normalized=variant == "L_norm")[variant]
    if reference is None:
        reference = graph_fiedler(g, w, variant).fiedler_vector
    n = g.n
    # slightly above the Gershgorin bound so sigma - lambda_max > 0 (K2 would
    # otherwise annihilate the Fiedler component)
    sigma = 2.0 * float(np.max(np.diag(lap))) * (1.0 + SHIFT_MARGIN)
    # null direction: sqrt(w) for the weighted form, sqrt(degree) for the normalized one
    sq = null_direction(variant, g, w)
    sq2 = sq * sq
    bus = MessageBus(g.adjacency)
    mix = np.linalg.matrix_power(metropolis_weights(bus.mask), gossip_rounds)

    if x0 is None:
        x = np.array([np.random.default_rng([seed, i]).standard_normal() for i in range(n)])
    else:
        x = np.array(x0, dtype=float)
    x_rms = np.sqrt(np.mean(x ** 2)) or 1.0
    x = x / x_rms

    w_avg = _Tracker(bus, mix, gossip_rounds, sq2)
    proj = None
    norm = None
    trace = MessageTrace()
    rising = 0
    best = np.inf
    for _ in range(outer_iters):
        y = local_power_step(x, lap, sigma, bus)
        r1 = sq * y
        proj = _Tracker(bus, mix, gossip_rounds, r1) if proj is None else proj
        c = proj.update(r1) / w_avg.update(sq2)
        y = y - c * sq
        r2 = y * y
        norm = _Tracker(bus, mix, gossip_rounds, r2) if norm is None else norm
        ms = norm.update(r2)
        ms = np.where(ms > 0, ms, r2 + 1e-300)
        x_new = y / np.sqrt(ms)
        stop = False
        if tol is not None:
            stop = bool(np.all(bus.max_consensus(np.abs(x_new - x), gossip_rounds) < tol))
        x = x_new

        est = x / np.linalg.norm(x)
        if est @ reference < 0:
            est = -est
        err = float(np.linalg.norm(est - reference))
        if trace.per_iteration_error and err > trace.per_iteration_error[-1]:
            rising += 1
        else:
            rising = 0
        best = min(best, err)
        trace.per_iteration_error.append(err)
        trace.messages_cumulative.append(bus.sent)
        if rising >= 10 and err > 10 * best and err > 1e-6:
            trace.iterations = len(trace.per_iteration_error)
            trace.messages_sent = bus.sent
            trace.per_node_entries = x
            raise DistributedFiedlerError(
                f"error grew for {rising} consecutive iterations (now {err:.3e}, best {best:.3e})")
        if stop:
            break
    trace.iterations = len(trace.per_iteration_error)
    trace.messages_sent = bus.sent
    trace.per_node_entries = x
    return trace
