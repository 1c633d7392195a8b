"""Gradient-ascent ABS positioning on the weighted algebraic connectivity."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .netgraph import (CapacityGraph, GraphError, NetworkState, WeightMatrix,
                       build_capacity_graph, capacity_matrix, kernel_params, laplacians)
from .spectral import SpectralResult, canonical_sign, fiedler, null_direction

AXES = {"x": 0, "y": 1, "z": 2}
DEGENERACY_TOL = 1e-8
OBJECTIVES = ("L_unnorm_weighted", "L_norm")


class DegenerateEigenvalueError(RuntimeError):
    pass


@dataclass(frozen=True)
class MobilityConfig:
    step_time_s: float = 1.0
    v_max: float = 5.0
    height_floor_m: float = 0.0
    max_iterations: int = 300
    convergence_tol: float = 1e-6
    fd_step_m: float = 1e-3
    # meters per unit gradient before the speed cap; None scales the field so
    # the ABS with the steepest gradient moves exactly v_max * step_time_s
    step_gain: float | None = None
    max_backtracks: int = 6
    fiedler_source: str = "centralized"  # or "distributed"
    dist_outer_iters: int = 5000  # per-slot cap when driven by the distributed solver
    dist_gossip_rounds: int = 30
    dist_tol: float = 1e-12  # per-slot stop once no entry changes by more than this
    grow: float = 1.2
    shrink: float = 0.5
    min_step_m: float = 1e-3
    objective: str = "L_unnorm_weighted"  # or "L_norm" (scale-free Cheeger baseline)
    region: tuple | None = None  # ((xmin, xmax), (ymin, ymax), (zmin, zmax)) box for ABSs

    def __post_init__(self):
        if not (self.v_max > 0 and self.fd_step_m > 0 and self.step_time_s > 0):
            raise ValueError("v_max, fd_step_m and step_time_s must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.height_floor_m < 0:
            raise ValueError("height_floor_m must be nonnegative")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.fiedler_source not in ("centralized", "distributed"):
            raise ValueError(f"unknown fiedler_source {self.fiedler_source!r}")

    @property
    def max_step(self) -> float:
        return self.v_max * self.step_time_s


@dataclass
class SlotRecord:
    positions: np.ndarray  # all flow-graph nodes, (N, 3)
    lambda2: float
    flow: dict = field(default_factory=dict)
    displacement: np.ndarray | None = None  # per ABS, distance moved into this slot
    duration: float = 0.0
    fiedler_error: float = float("nan")


@dataclass
class TrajectoryLog:
    abs_indices: np.ndarray
    slots: list = field(default_factory=list)
    kinds: tuple = ()
    converged: bool = False
    diagnostic: str = ""

    def __len__(self):
        return len(self.slots)

    def abs_positions(self) -> np.ndarray:
        """(slots, n_abs, 3) array of ABS positions."""
        return np.array([s.positions[self.abs_indices] for s in self.slots])

    def segments(self):
        """Per-slot ABS displacement vectors (slots-1, n_abs, 3) and durations."""
        p = self.abs_positions()
        return np.diff(p, axis=0), np.array([s.duration for s in self.slots[1:]])

    @property
    def path_lengths(self) -> np.ndarray:
        seg, _ = self.segments()
        if seg.shape[0] == 0:
            return np.zeros(len(self.abs_indices))
        return np.linalg.norm(seg, axis=2).sum(axis=0)

    @property
    def moving_time(self) -> float:
        return float(sum(s.duration for s in self.slots[1:]))

    def flow_trace(self, name: str) -> list:
        return [s.flow.get(name, float("nan")) for s in self.slots]

    def to_csv(self, path, metric: str | None = None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "abs_id", "x", "y", "z", "lambda2", "flow_metric"])
            for t, s in enumerate(self.slots):
                fm = s.flow.get(metric, "") if metric else ""
                for i in self.abs_indices:
                    x, y, z = s.positions[i]
                    w.writerow([t, int(i), repr(float(x)), repr(float(y)), repr(float(z)),
                                repr(float(s.lambda2)), repr(float(fm)) if fm != "" else ""])


def capacity_gradient(p: int, q: int, i: int, axis, state: NetworkState, h: float = 1e-3) -> float:
    """d a_pq / d (coordinate ``axis`` of node ``i``) by central differences.

    Range gating is not differentiated: the smooth capacity expression is
    used for every pair.
    """
    if p == q:
        return 0.0
    ax = AXES[axis] if isinstance(axis, str) else int(axis)
    if not state.kinds[i].aerial:
        raise GraphError(f"node {i} is not an ABS")
    pos = np.array(state.positions)
    pos[i, ax] += h
    ap = capacity_matrix(state.with_positions(pos), gated=False)[p, q]
    pos[i, ax] -= 2 * h
    am = capacity_matrix(state.with_positions(pos), gated=False)[p, q]
    return (ap - am) / (2 * h)


def weighted_fiedler(state: NetworkState, w: WeightMatrix, g: CapacityGraph | None = None,
                     objective: str = "L_unnorm_weighted") -> SpectralResult:
    """Fiedler pair of the objective Laplacian for the current (gated) graph.

    ``L_unnorm_weighted`` is W^-1/2 L W^-1/2; ``L_norm`` is D^-1/2 L D^-1/2
    and ignores ``w``.
    """
    g = build_capacity_graph(state) if g is None else g
    lap = laplacians(g, w, normalized=objective == "L_norm")[objective]
    return fiedler(lap, null_direction(objective, g, w), objective)


def lambda2_value(state: NetworkState, w: WeightMatrix, objective: str = "L_unnorm_weighted") -> float:
    return weighted_fiedler(state, w, objective=objective).lambda2


def pair_weights(g: CapacityGraph, w: WeightMatrix, res: SpectralResult, vector=None) -> np.ndarray:
    """Coefficient of d a_pq in d lambda2, for connected pairs (zero elsewhere).

    Unnormalized weighted: (x_p/sqrt(w_p) - x_q/sqrt(w_q))^2.
    Normalized: (1 - lambda2)(y_p^2 + y_q^2) - 2 y_p y_q with y = D^-1/2 x,
    which also accounts for the degree change in the normalization.
    """
    x = res.fiedler_vector if vector is None else np.asarray(vector, dtype=float)
    if res.variant == "L_norm":
        y = x / np.sqrt(g.degrees)
        z = (1.0 - res.lambda2) * (y[:, None] ** 2 + y[None, :] ** 2) - 2.0 * np.outer(y, y)
    else:
        s = x / np.sqrt(w.weights)
        z = (s[:, None] - s[None, :]) ** 2
    return np.where(g.adjacency > 0, z, 0.0)


def _check_simple(res: SpectralResult):
    scale = max(1.0, abs(res.lambda2))
    if res.gap <= DEGENERACY_TOL * scale:
        raise DegenerateEigenvalueError(
            f"lambda2 is not simple (gap {res.gap:.3e}); perturb the positions and retry")


def lambda2_gradients(state: NetworkState, w: WeightMatrix, fd_step: float = 1e-3,
                      vector: np.ndarray | None = None, g: CapacityGraph | None = None,
                      objective: str = "L_unnorm_weighted", res: SpectralResult | None = None) -> np.ndarray:
    """Spatial gradient of lambda2 for every ABS, shape (n_abs, 3).

    Capacity derivatives come from central differences in the compiled
    kernel. ``vector`` substitutes an externally computed Fiedler vector.
    """
    g = build_capacity_graph(state) if g is None else g
    if res is None:
        res = weighted_fiedler(state, w, g, objective)
    if vector is None:
        _check_simple(res)
    z = pair_weights(g, w, res, vector)
    return _backend.lambda2_gradient_fd(state.positions, state.aerial, state.interferers,
                                        kernel_params(state), z, state.abs_indices, fd_step)


def lambda2_gradient(i: int, state: NetworkState, w: WeightMatrix, fd_step: float = 1e-3,
                     objective: str = "L_unnorm_weighted") -> np.ndarray:
    if not state.kinds[i].aerial:
        raise GraphError(f"node {i} is not an ABS")
    g = build_capacity_graph(state)
    res = weighted_fiedler(state, w, g, objective)
    _check_simple(res)
    z = pair_weights(g, w, res)
    return _backend.lambda2_gradient_fd(state.positions, state.aerial, state.interferers,
                                        kernel_params(state), z, np.array([i]), fd_step)[0]


def _bounds(cfg: MobilityConfig):
    lo = np.array([-np.inf, -np.inf, cfg.height_floor_m])
    hi = np.full(3, np.inf)
    if cfg.region is not None:
        lo = np.maximum(lo, [b[0] for b in cfg.region])
        hi = np.minimum(hi, [b[1] for b in cfg.region])
    return lo, hi


def project_gradients(pos: np.ndarray, grads: np.ndarray, cfg: MobilityConfig) -> np.ndarray:
    """Zero gradient components that push an ABS through an active bound."""
    lo, hi = _bounds(cfg)
    g = np.array(grads, dtype=float)
    g[(pos <= lo) & (g < 0)] = 0.0
    g[(pos >= hi) & (g > 0)] = 0.0
    return g


def _apply(state: NetworkState, moves: np.ndarray, cfg: MobilityConfig) -> NetworkState:
    pos = np.array(state.positions)
    idx = state.abs_indices
    lo, hi = _bounds(cfg)
    pos[idx] = np.clip(pos[idx] + moves, lo, hi)
    return state.with_positions(pos)


@dataclass
class StepMemory:
    """Per-ABS step lengths and last directions carried between slots."""

    size: np.ndarray
    direction: np.ndarray

    @classmethod
    def fresh(cls, n_abs: int, cfg: MobilityConfig) -> "StepMemory":
        return cls(np.full(n_abs, cfg.max_step), np.zeros((n_abs, 3)))


@dataclass
class StepOutcome:
    state: NetworkState
    lambda2: float
    gradients: np.ndarray  # projected onto the feasible box
    accepted: bool
    scale: float
    memory: StepMemory | None = None


def _step_lengths(grads: np.ndarray, memory: StepMemory, cfg: MobilityConfig):
    norm = np.linalg.norm(grads, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(norm[:, None] > 0, grads / norm[:, None], 0.0)
    if cfg.step_gain is not None:
        size = np.minimum(cfg.max_step, cfg.step_gain * norm)
        return unit, size, StepMemory(size, unit)
    # an ABS whose direction reverses has overshot: halve its step; otherwise grow
    reversed_ = (unit * memory.direction).sum(axis=1) < 0
    size = np.where(reversed_, memory.size * cfg.shrink, np.minimum(memory.size * cfg.grow, cfg.max_step))
    size = np.where(norm > 0, size, memory.size)
    return unit, size, StepMemory(size, np.where(norm[:, None] > 0, unit, memory.direction))


def step(state: NetworkState, cfg: MobilityConfig, w: WeightMatrix,
         vector: np.ndarray | None = None, lambda2: float | None = None,
         memory: StepMemory | None = None) -> StepOutcome:
    """One synchronous slot: every ABS moves along its own gradient direction.

    Step lengths are per ABS and capped at v_max * step_time_s. The whole
    move is halved up to ``max_backtracks`` times until lambda2 does not
    decrease; if no trial succeeds the positions stay put.
    """
    g = build_capacity_graph(state)
    res = weighted_fiedler(state, w, g, cfg.objective)
    lambda2 = res.lambda2 if lambda2 is None else lambda2
    raw = lambda2_gradients(state, w, cfg.fd_step_m, vector, g, cfg.objective, res)
    grads = project_gradients(state.positions[state.abs_indices], raw, cfg)
    memory = StepMemory.fresh(len(state.abs_indices), cfg) if memory is None else memory
    unit, size, memory = _step_lengths(grads, memory, cfg)
    moves = unit * size[:, None]
    if not np.any(moves):
        return StepOutcome(state, lambda2, grads, False, 0.0, memory)
    scale = 1.0
    for _ in range(cfg.max_backtracks + 1):
        trial = _apply(state, moves * scale, cfg)
        try:
            lam = weighted_fiedler(trial, w, objective=cfg.objective).lambda2
        except GraphError:
            lam = -math.inf
        if lam >= lambda2:
            return StepOutcome(trial, lam, grads, True, scale, memory)
        scale *= 0.5
    memory.size = memory.size * cfg.shrink
    return StepOutcome(state, lambda2, grads, False, 0.0, memory)


def run_trajectory(state: NetworkState, cfg: MobilityConfig, w: WeightMatrix,
                   flow_fn=None, flow_every: int = 1) -> tuple:
    """Gradient-ascent loop; returns (TrajectoryLog, final NetworkState).

    Stops when the projected gradient norm drops below ``convergence_tol``,
    when every ABS step has shrunk below ``min_step_m``, or after
    ``max_iterations`` slots. ``flow_fn(state) -> dict`` is evaluated every
    ``flow_every`` slots and on the final slot. A repeated lambda2 ends the
    loop early with ``log.diagnostic`` set.
    """
    from .distfiedler import distributed_fiedler

    log = TrajectoryLog(state.abs_indices, kinds=state.kinds)
    lam = lambda2_value(state, w, cfg.objective)
    n_abs = len(state.abs_indices)

    def record(st, lam, disp, dur, err=float("nan")):
        t = len(log.slots)
        flows = flow_fn(st) if flow_fn and t % flow_every == 0 else {}
        log.slots.append(SlotRecord(np.array(st.positions), lam, flows, disp, dur, err))

    record(state, lam, np.zeros(n_abs), 0.0)
    warm = None
    memory = StepMemory.fresh(n_abs, cfg)
    for _ in range(cfg.max_iterations):
        vector, err = None, float("nan")
        if cfg.fiedler_source == "distributed":
            g = build_capacity_graph(state)
            trace = distributed_fiedler(g, w, cfg.dist_outer_iters, cfg.dist_gossip_rounds,
                                        x0=warm, variant=cfg.objective, tol=cfg.dist_tol)
            warm = trace.per_node_entries
            vector = canonical_sign(warm / np.linalg.norm(warm))
            err = trace.final_error
        try:
            out = step(state, cfg, w, vector, lam, memory)
        except DegenerateEigenvalueError as exc:
            # gradient undefined at a repeated lambda2; keep the trajectory so far
            log.diagnostic = f"stopped at slot {len(log.slots) - 1}: {exc}"
            break
        memory = out.memory
        if np.linalg.norm(out.gradients) < cfg.convergence_tol:
            log.converged = True
            break
        if out.accepted:
            before = state.positions[state.abs_indices]
            disp = np.linalg.norm(out.state.positions[state.abs_indices] - before, axis=1)
            state, lam = out.state, out.lambda2
            record(state, lam, disp, cfg.step_time_s, err)
        if np.all(memory.size < cfg.min_step_m):
            log.converged = True
            break
    if flow_fn and not log.slots[-1].flow:
        log.slots[-1].flow = flow_fn(state)
    return log, state


def straight_line_trajectory(q0, qL, cfg: MobilityConfig, segments: int = 1,
                             moving_time: float | None = None) -> TrajectoryLog:
    """Constant-speed straight flights q0 -> qL with a common arrival time.

    ``moving_time`` defaults to the time the longest flight needs at v_max.
    """
    q0 = np.asarray(q0, dtype=float).reshape(-1, 3)
    qL = np.asarray(qL, dtype=float).reshape(-1, 3)
    if q0.shape != qL.shape:
        raise ValueError("start and end position lists differ in length")
    dist = np.linalg.norm(qL - q0, axis=1)
    if moving_time is None:
        moving_time = float(dist.max(initial=0.0)) / cfg.v_max
    n = q0.shape[0]
    log = TrajectoryLog(np.arange(n))
    if not np.any(dist):
        log.slots.append(SlotRecord(q0.copy(), float("nan"), {}, np.zeros(n), 0.0))
        return log
    for k in range(segments + 1):
        f = k / segments
        pos = q0 + f * (qL - q0)
        disp = dist / segments if k else np.zeros(n)
        log.slots.append(SlotRecord(pos, float("nan"), {}, disp, moving_time / segments if k else 0.0))
    return log


def computation_latency(k_bits: float, e_speed: float, iterations: int = 1) -> float:
    """Pre-movement wait: iterations * K^2 / e."""
    if e_speed <= 0:
        raise ValueError("processing speed must be positive")
    return iterations * k_bits ** 2 / e_speed


run_maxflow_trajectory = run_trajectory
