"""Rotary-wing propulsion power and trajectory energy accounting."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class EnergyError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyParams:
    air_density_rho: float = 1.225      # kg/m^3
    drag_coeff_cd0: float = 0.05
    reference_area_ae: float = 0.3      # m^2
    blade_chord_cb: float = 0.1         # m
    n_blades: int = 4
    angular_velocity_omega: float = 20.0  # rad/s
    rotor_radius_r: float = 0.5         # m
    weight_w: float = 50.0              # N
    clamp_descent: bool = False

    def __post_init__(self):
        for name in ("air_density_rho", "drag_coeff_cd0", "reference_area_ae", "blade_chord_cb",
                     "n_blades", "angular_velocity_omega", "rotor_radius_r", "weight_w"):
            if not getattr(self, name) > 0:
                raise EnergyError(f"{name} must be positive")

    @property
    def tip_speed(self) -> float:
        return self.angular_velocity_omega * self.rotor_radius_r


def _thrust_residual(mu: float, v_h: float, p: EnergyParams) -> float:
    k = 2.0 * p.air_density_rho * math.pi * p.angular_velocity_omega ** 2 * p.rotor_radius_r ** 4
    return k * mu * math.sqrt((v_h / p.tip_speed) ** 2 + mu * mu) - p.weight_w


def induced_velocity_mu(v_h: float, p: EnergyParams, lo: float = 1e-8, hi: float = 10.0) -> float:
    """Positive root of the thrust balance for normalized induced velocity.

    Bisection on [lo, hi] followed by one Newton step.
    """
    if v_h < 0:
        raise EnergyError("horizontal speed must be nonnegative")
    f_lo, f_hi = _thrust_residual(lo, v_h, p), _thrust_residual(hi, v_h, p)
    if f_lo > 0 or f_hi < 0:
        raise EnergyError(f"root not bracketed: g({lo})={f_lo:.3e}, g({hi})={f_hi:.3e}")
    tol = 1e-10 * p.weight_w
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = _thrust_residual(mid, v_h, p)
        if f > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15:
            break
    mu = 0.5 * (lo + hi)
    k = 2.0 * p.air_density_rho * math.pi * p.angular_velocity_omega ** 2 * p.rotor_radius_r ** 4
    a2 = (v_h / p.tip_speed) ** 2
    deriv = k * (math.sqrt(a2 + mu * mu) + mu * mu / math.sqrt(a2 + mu * mu))
    polished = mu - _thrust_residual(mu, v_h, p) / deriv
    if abs(_thrust_residual(polished, v_h, p)) <= abs(_thrust_residual(mu, v_h, p)):
        mu = polished
    if abs(_thrust_residual(mu, v_h, p)) > max(tol, 1e-9 * p.weight_w):
        raise EnergyError(f"mu root did not converge on bracket [{lo}, {hi}]")
    return mu


def parasitic_power(v_h: float, p: EnergyParams) -> float:
    rho, cd0 = p.air_density_rho, p.drag_coeff_cd0
    om, r = p.angular_velocity_omega, p.rotor_radius_r
    return (0.5 * rho * cd0 * p.reference_area_ae * v_h ** 3
            + math.pi / 4 * p.n_blades * p.blade_chord_cb * rho * cd0 * om ** 3 * r ** 4
            * (1.0 + 3.0 * (v_h / (om * r)) ** 2))


def induced_power(v_h: float, p: EnergyParams) -> float:
    return p.tip_speed * p.weight_w * induced_velocity_mu(v_h, p)


def horizontal_power(v_h: float, p: EnergyParams) -> float:
    return parasitic_power(v_h, p) + induced_power(v_h, p)


def vertical_power(v_v: float, direction: str, p: EnergyParams) -> float:
    """Climb/descent power; ``v_v`` is the vertical speed magnitude."""
    if v_v < 0:
        raise EnergyError("vertical speed magnitude must be nonnegative")
    w = p.weight_w
    root = math.sqrt(v_v ** 2 + 2.0 * w / (p.air_density_rho * math.pi * p.rotor_radius_r ** 2))
    if direction == "climb":
        return 0.5 * w * v_v + 0.5 * w * root
    if direction == "descend":
        val = 0.5 * w * v_v - 0.5 * w * root
        return max(val, 0.0) if p.clamp_descent else val
    raise EnergyError(f"direction must be 'climb' or 'descend', not {direction!r}")


def segment_powers(displacement, duration: float, p: EnergyParams) -> tuple:
    """(P_vertical, P_horizontal) for a constant-velocity segment.

    Level segments use the descending branch of the vertical power.
    """
    disp = np.asarray(displacement, dtype=float)
    dist = float(np.linalg.norm(disp))
    if duration <= 0:
        raise EnergyError("segment with nonzero displacement has zero duration")
    v = dist / duration
    phi = math.asin(max(-1.0, min(1.0, disp[2] / dist)))
    direction = "climb" if disp[2] > 0 else "descend"
    return (vertical_power(v * abs(math.sin(phi)), direction, p),
            horizontal_power(v * math.cos(phi), p))


def segment_energy(displacement, duration: float, p: EnergyParams) -> float:
    """Energy of one constant-velocity segment; zero when the ABS does not move."""
    if not np.any(np.asarray(displacement, dtype=float)):
        return 0.0
    pv, ph = segment_powers(displacement, duration, p)
    return duration * (pv + ph)


@dataclass
class EnergyReport:
    path_length: np.ndarray
    moving_time: np.ndarray
    energy: np.ndarray
    segment_power: list = field(default_factory=list)  # per segment: (P_vertical, P_horizontal) arrays

    @property
    def total(self) -> float:
        return float(self.energy.sum())


def trajectory_energy(traj, p: EnergyParams) -> EnergyReport:
    """Per-ABS energy summed over the segments of a ``TrajectoryLog``."""
    seg, dur = traj.segments()
    n = len(traj.abs_indices)
    energy = np.zeros(n)
    moving = np.zeros(n)
    powers = []
    for t in range(seg.shape[0]):
        pv, ph = np.zeros(n), np.zeros(n)
        for i in range(n):
            if np.any(seg[t, i]):
                pv[i], ph[i] = segment_powers(seg[t, i], dur[t], p)
                energy[i] += dur[t] * (pv[i] + ph[i])
                moving[i] += dur[t]
        powers.append((pv, ph))
    lengths = np.linalg.norm(seg, axis=2).sum(axis=0) if seg.shape[0] else np.zeros(n)
    return EnergyReport(lengths, moving, energy, powers)


def energy_savings(e_efficient, e_maxflow):
    """Percent saved: 100 * (1 - E_efficient / E_maxflow)."""
    e_max = np.asarray(e_maxflow, dtype=float)
    if np.any(e_max == 0):
        raise EnergyError("max-flow trajectory energy is zero")
    out = 100.0 * (1.0 - np.asarray(e_efficient, dtype=float) / e_max)
    return float(out) if out.ndim == 0 else out


def write_energy_csv(path, abs_ids, report_maxflow: EnergyReport, report_eff: EnergyReport):
    savings = energy_savings(report_eff.energy, report_maxflow.energy)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["abs_id", "D_m", "E_maxflow_J", "E_efficient_J", "savings_pct"])
        for k, i in enumerate(abs_ids):
            w.writerow([int(i), repr(float(report_maxflow.path_length[k])),
                        repr(float(report_maxflow.energy[k])), repr(float(report_eff.energy[k])),
                        repr(float(savings[k]))])
