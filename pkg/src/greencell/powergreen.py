"""Two-mode BS power model and green (per-joule) throughput.

An active BS draws ``P_ON + delta * P_t`` and a void one sleeps at ``P_OFF``.
The transmit power is set so that the mean received power at the cell edge
meets ``P_min``:

    P_t = P_min * Gamma(1 + alpha/2) / (pi * lambda_b * zeta)^(alpha/2).

``P_min`` must be referenced to unit distance in the length unit of
``lambda_b``; :class:`LinkBudget` does that for a km-referenced path loss.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

from . import analytics
from .analytics import LN2, NetworkScenario, void_prob
from .channel import AssociationScheme, ChannelModel, rho as rho_of, zeta as zeta_of
from .quadrature import QuadratureRule


class MaxPowerWarning(UserWarning):
    pass


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class PowerModel:
    p_on: float  # W
    p_off: float  # W
    delta: float
    p_min: float  # W at unit distance (see LinkBudget)
    p_max: Optional[float] = None  # W, only warned about

    def __post_init__(self):
        if not (self.p_on > self.p_off > 0):
            raise ValueError(f"need p_on > p_off > 0, got {self.p_on}, {self.p_off}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.p_min > 0:
            raise ValueError("p_min must be positive")


@dataclass(frozen=True)
class PowerBudget:
    p_t: float  # W per BS
    mean_psi: float  # W, average consumption per BS


@dataclass(frozen=True)
class LinkBudget:
    """Path loss ``ref_loss_db + 10*alpha*log10(d_km)`` plus building and antenna terms.

    ``penetration_db`` is the mean *linear* penetration loss over users; with a
    fraction ``indoor`` of users behind ``wall_db`` it is
    ``10 log10(indoor * 10^(wall_db/10) + 1 - indoor)``.
    """

    ref_loss_db: float = 140.7
    penetration_db: float = 0.0
    antenna_gain_db: float = 0.0

    @classmethod
    def indoor_mix(cls, ref_loss_db: float, wall_db: float, indoor: float,
                   antenna_gain_db: float) -> "LinkBudget":
        pen = linear_to_db(indoor * db_to_linear(wall_db) + 1.0 - indoor)
        return cls(ref_loss_db, pen, antenna_gain_db)

    @property
    def loss_db(self) -> float:
        return self.ref_loss_db + self.penetration_db - self.antenna_gain_db

    def p_min_at_1km(self, p_min_dbm: float) -> float:
        """Received-power floor in W referred back to 1 km (pairs with lambda in km^-2)."""
        return dbm_to_watts(p_min_dbm + self.loss_db)


# urban micro preset: 140.7 + 37.6 log10(d_km), 20 dB walls for 80% of users, 5 dBi antennas
URBAN_MICRO = LinkBudget.indoor_mix(140.7, 20.0, 0.8, 5.0)
PRESET_POWER = dict(p_on=6.8, p_off=4.3, delta=4.0, p_min_dbm=-106.0)


def preset_power_model(link: LinkBudget = URBAN_MICRO, **over) -> PowerModel:
    c = {**PRESET_POWER, **over}
    return PowerModel(c["p_on"], c["p_off"], c["delta"], link.p_min_at_1km(c["p_min_dbm"]))


def transmit_power(lambda_b: float, zeta: float, alpha: float, p_min: float) -> float:
    if not (lambda_b > 0 and zeta > 0 and p_min > 0):
        raise ValueError("lambda_b, zeta and p_min must be positive")
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")
    return p_min * math.gamma(1.0 + alpha / 2.0) / (math.pi * lambda_b * zeta) ** (alpha / 2.0)


def avg_power(p_void: float, model: PowerModel, p_t: float) -> float:
    """E[Psi] = (1 - p_void)(P_ON + delta P_t) + p_void P_OFF."""
    if not 0.0 <= p_void <= 1.0:
        raise ValueError(f"p_void must lie in [0, 1], got {p_void}")
    return (1.0 - p_void) * (model.p_on + model.delta * p_t) + p_void * model.p_off


def power_budget(scenario: NetworkScenario, channel: ChannelModel, scheme: AssociationScheme,
                 model: PowerModel, p_t: Optional[float] = None) -> PowerBudget:
    z = zeta_of(channel, scheme)
    if p_t is None:
        p_t = transmit_power(scenario.lambda_b, z, channel.alpha, model.p_min)
    if model.p_max is not None and p_t > model.p_max:
        warnings.warn(f"transmit power {p_t:.3g} W exceeds p_max {model.p_max:.3g} W", MaxPowerWarning,
                      stacklevel=2)
    p = void_prob(scenario.v, 3.5 * z)
    return PowerBudget(p_t, avg_power(p, model, p_t))


def green_cell_throughput(scenario: NetworkScenario, channel: ChannelModel, scheme: AssociationScheme,
                          model: PowerModel, quad: Optional[QuadratureRule] = None,
                          p_t: Optional[float] = None) -> float:
    """G_C = T_C / (lambda_b E[Psi]), bits/Hz/J.  ``p_t`` pins the transmit power."""
    budget = power_budget(scenario, channel, scheme, model, p_t)
    t_c = analytics.avg_cell_throughput(scenario, channel, scheme, quad)
    return t_c / (scenario.lambda_b * budget.mean_psi)


def green_user_throughput(scenario: NetworkScenario, channel: ChannelModel, scheme: AssociationScheme,
                          model: PowerModel, quad: Optional[QuadratureRule] = None,
                          p_t: Optional[float] = None) -> float:
    """G_U = T_U / E[Psi], bits/Hz/J per user."""
    budget = power_budget(scenario, channel, scheme, model, p_t)
    return analytics.avg_user_throughput(scenario, channel, scheme, quad) / budget.mean_psi


def green_cell_closed(scenario: NetworkScenario, channel: ChannelModel, scheme: AssociationScheme,
                      model: PowerModel, quad: Optional[QuadratureRule] = None) -> float:
    """G_C written out: (1-p) I / (ln2 (1 - 1/rho) E[Psi]) with I the rate integral."""
    z = zeta_of(channel, scheme)
    r = rho_of(channel, scheme)
    p = void_prob(scenario.v, r)
    p_t = transmit_power(scenario.lambda_b, z, channel.alpha, model.p_min)
    psi = (1.0 - p) * (model.p_on + model.delta * p_t) + p * model.p_off
    return (1.0 - p) * analytics.rate_integral(p, channel, z, quad) / (LN2 * (1.0 - 1.0 / r) * psi)


def green_user_closed(scenario: NetworkScenario, channel: ChannelModel, scheme: AssociationScheme,
                      model: PowerModel, quad: Optional[QuadratureRule] = None) -> float:
    """G_U written out: (1-p)^2 I / (v ln2 E[Psi])."""
    z = zeta_of(channel, scheme)
    p = void_prob(scenario.v, 3.5 * z)
    p_t = transmit_power(scenario.lambda_b, z, channel.alpha, model.p_min)
    psi = (1.0 - p) * (model.p_on + model.delta * p_t) + p * model.p_off
    return (1.0 - p) ** 2 * analytics.rate_integral(p, channel, z, quad) / (scenario.v * LN2 * psi)
