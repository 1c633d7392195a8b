"""Air-to-air and air-to-ground channel models.

Positions are 3-vectors in meters. Terrestrial nodes sit at height 0; only
``NodeKind.ABS`` nodes are aerial.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 2.998e8  # m/s


class NodeKind(enum.Enum):
    SOURCE = "source"
    DESTINATION = "destination"
    ABS = "abs"
    INTERFERER = "interferer"

    @property
    def aerial(self) -> bool:
        return self is NodeKind.ABS


class ChannelError(ValueError):
    pass


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    carrier_frequency_hz: float = 2e9
    path_loss_exponent_alpha: float = 2.0
    mu_los_db: float = 5.0
    mu_nlos_db: float = 20.0
    psi: float = 11.95
    eta: float = 0.14

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0:
            raise ChannelError("carrier_frequency_hz must be positive")
        if self.path_loss_exponent_alpha <= 0:
            raise ChannelError("path_loss_exponent_alpha must be positive")
        if self.mu_nlos_db < self.mu_los_db:
            raise ChannelError("mu_nlos_db must be >= mu_los_db")
        if self.psi <= 0 or self.eta <= 0:
            raise ChannelError("psi and eta must be positive")

    @property
    def k_o(self) -> float:
        """Free-space wavenumber factor 4*pi*f_c/c."""
        return 4.0 * math.pi * self.carrier_frequency_hz / SPEED_OF_LIGHT

    @property
    def mu_los(self) -> float:
        return float(db_to_linear(self.mu_los_db))

    @property
    def mu_nlos(self) -> float:
        return float(db_to_linear(self.mu_nlos_db))


def _distance(a, b) -> float:
    d = math.dist(a, b)
    if d == 0.0:
        raise ChannelError("zero distance between nodes")
    return d


def elevation_angle_deg(a, b) -> float:
    d = _distance(a, b)
    dh = abs(float(a[2]) - float(b[2]))
    return math.degrees(math.asin(min(dh / d, 1.0)))


def los_probability(theta_deg, params: ChannelParams):
    """LoS probability as a logistic function of elevation angle (degrees).

    Works elementwise on arrays.
    """
    theta = np.asarray(theta_deg, dtype=float)
    p = 1.0 / (1.0 + params.psi * np.exp(-params.eta * (theta - params.psi)))
    return float(p) if p.ndim == 0 else p


def a2a_path_loss(a, b, params: ChannelParams) -> float:
    d = _distance(a, b)
    return (params.k_o * d) ** params.path_loss_exponent_alpha * params.mu_los


def _a2g_loss(d: float, theta: float, params: ChannelParams) -> float:
    p_los = los_probability(theta, params)
    mix = p_los * params.mu_los + (1.0 - p_los) * params.mu_nlos
    return (params.k_o * d) ** params.path_loss_exponent_alpha * mix


def a2g_path_loss_avg(aerial, ground, params: ChannelParams) -> float:
    """Average A2G loss: LoS/NLoS attenuations mixed by the LoS probability."""
    d = _distance(aerial, ground)
    return _a2g_loss(d, elevation_angle_deg(aerial, ground), params)


def channel_gain(a, kind_a: NodeKind, b, kind_b: NodeKind, params: ChannelParams) -> float:
    """Average channel power gain (reciprocal path loss) between two nodes.

    Both aerial: A2A loss. Otherwise the averaged A2G model; a link between
    two terrestrial nodes is the A2G model at zero elevation.
    """
    # order-independent so g(a, b) == g(b, a) bit for bit
    if (tuple(a), kind_a.value) > (tuple(b), kind_b.value):
        a, kind_a, b, kind_b = b, kind_b, a, kind_a
    if kind_a.aerial and kind_b.aerial:
        loss = a2a_path_loss(a, b, params)
    elif kind_a.aerial or kind_b.aerial:
        loss = a2g_path_loss_avg(a, b, params)
    else:
        loss = _a2g_loss(_distance(a, b), 0.0, params)
    if not 0.0 < loss < math.inf:
        raise ChannelError(f"path loss {loss!r} out of range (distance {math.dist(a, b)!r} m)")
    return 1.0 / loss
