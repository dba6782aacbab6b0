"""Composite Rayleigh / log-normal channel and association weights.

The channel power gain of a link is ``H = X * S`` with ``X`` a unit-mean
exponential (Rayleigh power) and ``S = exp(Z)``, ``Z ~ N(mu_s, sigma_s**2)``.
Users associate with the BS maximising ``W * H * d**-alpha``; the weight law
``W`` only reaches the closed-form results through

    zeta = E[(WH)^(2/alpha)] * E[(WH)^(-2/alpha)]  >= 1,   rho = 3.5 * zeta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

NEAREST = "nearest"
MAX_POWER = "max_power"
WEIGHTED = "weighted"
SCHEME_KINDS = (NEAREST, MAX_POWER, WEIGHTED)

DB_TO_NEPER = math.log(10.0) / 10.0

# shadowing conventions for a dB figure quoted as "sigma_s^2 = x dB"
STD_DB = "std-db"  # x is the dB standard deviation
VAR_DB = "var-db"  # x is the dB^2 variance, so the std is sqrt(x)
SHADOW_CONVENTIONS = (STD_DB, VAR_DB)


class DivergentMomentError(ValueError):
    pass


def shadow_db_to_natural(sigma_db: float) -> float:
    """Convert a shadowing standard deviation in dB to natural-log units."""
    if sigma_db < 0:
        raise ValueError(f"shadowing std must be >= 0 dB, got {sigma_db}")
    return sigma_db * DB_TO_NEPER


def shadow_natural(value_db: float, convention: str) -> float:
    """Natural-log shadowing std for a dB figure read under ``convention``."""
    if convention == STD_DB:
        return shadow_db_to_natural(value_db)
    if convention == VAR_DB:
        if value_db < 0:
            raise ValueError(f"shadowing variance must be >= 0 dB^2, got {value_db}")
        return shadow_db_to_natural(math.sqrt(value_db))
    raise ValueError(f"unknown shadow convention {convention!r}; expected one of {SHADOW_CONVENTIONS}")


@dataclass(frozen=True)
class ChannelModel:
    alpha: float
    mu_s: float = 0.0
    sigma_s: float = 0.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError(f"path-loss exponent must exceed 2, got {self.alpha}")
        if self.sigma_s < 0:
            raise ValueError(f"sigma_s must be >= 0, got {self.sigma_s}")

    @property
    def delta(self) -> float:
        """The ubiquitous exponent 2/alpha."""
        return 2.0 / self.alpha


@dataclass(frozen=True)
class AssociationScheme:
    """Weight law of generalized cell association.

    ``nearest`` sets ``W = bias / H`` so that ``WH`` is the constant ``bias``;
    ``max_power`` uses the constant ``W = bias``; ``weighted`` draws one
    ``W`` per BS from ``w_sampler(rng, size)`` and needs ``w_moment(t) = E[W^t]``.
    """

    kind: str
    bias: float = 1.0
    w_moment: Optional[Callable[[float], float]] = field(default=None, compare=False)
    w_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown association kind {self.kind!r}")
        if not self.bias > 0:
            raise ValueError("bias must be positive")
        if self.kind == WEIGHTED and (self.w_moment is None or self.w_sampler is None):
            raise ValueError("weighted schemes need both w_moment and w_sampler")

    @classmethod
    def nearest(cls, bias: float = 1.0) -> "AssociationScheme":
        return cls(NEAREST, bias=bias, name="nearest")

    @classmethod
    def max_power(cls, bias: float = 1.0) -> "AssociationScheme":
        return cls(MAX_POWER, bias=bias, name="max_power")

    @classmethod
    def lognormal_weight(cls, mu_w: float, sigma_w: float) -> "AssociationScheme":
        """Random log-normal BS weights, ``ln W ~ N(mu_w, sigma_w**2)``."""

        def moment(t):
            return math.exp(t * mu_w + 0.5 * (t * sigma_w) ** 2)

        def sampler(rng, size):
            return np.exp(rng.normal(mu_w, sigma_w, size))

        return cls(WEIGHTED, w_moment=moment, w_sampler=sampler,
                   name=f"lognormal_weight({mu_w:g},{sigma_w:g})")


class GainSample(NamedTuple):
    h: float
    w: float


def frac_moment_H(channel: ChannelModel, t: float) -> float:
    """E[H^t] = Gamma(1+t) * exp(t*mu_s + t^2*sigma_s^2/2)."""
    if t <= -1:
        raise DivergentMomentError(f"E[H^t] diverges for t={t} <= -1 (Rayleigh factor)")
    return float(gamma_fn(1.0 + t) * math.exp(t * channel.mu_s + 0.5 * (t * channel.sigma_s) ** 2))


def wh_moment(channel: ChannelModel, scheme: AssociationScheme, t: float) -> float:
    """E[(WH)^t] for the product of association weight and channel gain."""
    if scheme.kind == NEAREST:
        return scheme.bias ** t
    if scheme.kind == MAX_POWER:
        return scheme.bias ** t * frac_moment_H(channel, t)
    return scheme.w_moment(t) * frac_moment_H(channel, t)


def zeta(channel: ChannelModel, scheme: AssociationScheme) -> float:
    if scheme.kind == NEAREST:
        return 1.0
    d = channel.delta
    if scheme.kind == MAX_POWER:
        # the bias cancels
        return frac_moment_H(channel, d) * frac_moment_H(channel, -d)
    return wh_moment(channel, scheme, d) * wh_moment(channel, scheme, -d)


def rho(channel: ChannelModel, scheme: AssociationScheme) -> float:
    return 3.5 * zeta(channel, scheme)


def sample_gains(channel: ChannelModel, rng: np.random.Generator, size) -> np.ndarray:
    """Draw composite channel power gains of the given shape."""
    h = rng.standard_exponential(size)
    if channel.sigma_s > 0 or channel.mu_s != 0:
        h *= np.exp(rng.normal(channel.mu_s, channel.sigma_s, size))
    return h


def sample_weights(scheme: AssociationScheme, h: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Association weights matching gains ``h`` (one per entry of ``h``)."""
    if scheme.kind == NEAREST:
        return scheme.bias / h
    if scheme.kind == MAX_POWER:
        return np.full_like(h, scheme.bias, dtype=float)
    return np.asarray(scheme.w_sampler(rng, h.shape), dtype=float)


def sample_gain(channel: ChannelModel, scheme: AssociationScheme, rng: np.random.Generator) -> GainSample:
    h = sample_gains(channel, rng, 1)
    w = sample_weights(scheme, h, rng)
    return GainSample(float(h[0]), float(w[0]))
