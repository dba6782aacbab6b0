"""Closed-form and quadrature results for a PPP small-cell network with void cells.

Cell load is ``v = lambda_u / lambda_b``.  Void probability uses the Gamma
(shape ``rho``) fit of the cell size, ``p_void = (1 + v/rho)^-rho`` with
``rho = 3.5 * zeta``.  Throughputs treat the non-void BSs as a thinned PPP of
intensity ``lambda_b * (1 - p_void)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln, hyp2f1

from .channel import (
    MAX_POWER,
    NEAREST,
    AssociationScheme,
    ChannelModel,
    frac_moment_H,
    rho as rho_of,
    zeta as zeta_of,
)
from .quadrature import QuadratureRule, gauss_hermite

RHO_HAT = 3.5
DEFAULT_ORDER = 6
# order used for the shadowing expectation inside the interference term
INNER_ORDER = 40
LN2 = math.log(2.0)


@dataclass(frozen=True)
class NetworkScenario:
    lambda_u: float  # users / km^2
    lambda_b: float  # BSs / km^2

    def __post_init__(self):
        if not (self.lambda_u > 0 and self.lambda_b > 0):
            raise ValueError(f"intensities must be positive, got {self.lambda_u}, {self.lambda_b}")

    @property
    def v(self) -> float:
        return self.lambda_u / self.lambda_b

    @classmethod
    def from_load(cls, lambda_u: float, v: float) -> "NetworkScenario":
        return cls(lambda_u, lambda_u / v)


@dataclass(frozen=True)
class VoidModel:
    zeta: float
    rho_hat: float = RHO_HAT

    @property
    def rho(self) -> float:
        return self.rho_hat * self.zeta

    @classmethod
    def of(cls, channel: ChannelModel, scheme: AssociationScheme) -> "VoidModel":
        return cls(zeta_of(channel, scheme))


# ---------------------------------------------------------------- void cells

def void_prob(v, rho: float):
    """(1 + v/rho)^-rho; ``rho = inf`` gives the Poisson limit exp(-v)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("cell load must be >= 0")
    if math.isinf(rho):
        out = np.exp(-v)
    else:
        out = np.exp(-rho * np.log1p(v / rho))
    return float(out) if out.ndim == 0 else out


def void_prob_bounds(v, zeta: float):
    """(lower, upper) = (exp(-v), (1 + v/zeta)^-zeta)."""
    if zeta < 1:
        raise ValueError(f"zeta must be >= 1, got {zeta}")
    return void_prob(v, math.inf), void_prob(v, zeta)


def user_count_pmf(n, v: float, rho_hat: float = RHO_HAT):
    """P[n users in a cell] for a Gamma(rho_hat) cell size: negative binomial."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("user count must be >= 0")
    if v == 0:
        return np.where(n == 0, 1.0, 0.0)
    logp = (gammaln(n + rho_hat) - gammaln(rho_hat) - gammaln(n + 1)
            + n * np.log(v / (rho_hat + v)) - rho_hat * np.log1p(v / rho_hat))
    out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def nonvoid_user_count_pmf(n, v: float, rho: float):
    """P[n users | cell non-void] for associated cells.

    The associated-cell size is Gamma(rho) with mean 1/(lambda_b (1 - p_void)),
    so the count is negative binomial with mean ``v' = v / (1 - p_void)``,
    truncated at zero and renormalised by its own zero mass.
    """
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("conditioned on a non-void cell: n must be >= 1")
    p = void_prob(v, rho)
    v_eff = v / (1.0 - p)
    p0 = void_prob(v_eff, rho)
    out = user_count_pmf(n, v_eff, rho) / (1.0 - p0)
    return out


def mean_users_nonvoid(v: float, rho: float) -> float:
    """v / (1 - p_void)^2, the mean co-user count used by the user throughput."""
    if v <= 0:
        raise ValueError("mean users per non-void cell is undefined at v = 0")
    return v / (1.0 - void_prob(v, rho)) ** 2


# ------------------------------------------------------- interference term

def _tail_no_shadow(a, alpha: float):
    """int_a^inf dt / (1 + t^(alpha/2)), elementwise for a >= 0."""
    k = alpha / 2.0
    a = np.asarray(a, dtype=float)
    full = (math.pi / k) / math.sin(math.pi / k)
    out = np.empty_like(a)
    lo = a < 1.0
    al = a[lo]
    out[lo] = full - al * hyp2f1(1.0, 1.0 / k, 1.0 + 1.0 / k, -al ** k)
    ah = a[~lo]
    b = 1.0 - 1.0 / k
    out[~lo] = ah ** (1.0 - k) / (k - 1.0) * hyp2f1(1.0, b, 1.0 + b, -ah ** (-k))
    return out


def interference_tail(a, channel: ChannelModel):
    """int_a^inf [1 - L_H(t^(-alpha/2))] dt.

    With ``H = X*S`` the bracket is ``E_S[S / (S + t^(alpha/2))]``; rescaling
    ``t = S^(2/alpha) u`` turns each shadowing node into the no-shadowing tail.
    """
    a = np.asarray(a, dtype=float)
    if channel.sigma_s == 0 and channel.mu_s == 0:
        return _tail_no_shadow(a, channel.alpha)
    rule = gauss_hermite(INNER_ORDER)
    scale = np.exp(channel.delta * rule.normal_points(channel.mu_s, channel.sigma_s))
    flat = a.reshape(-1, 1)
    vals = _tail_no_shadow(flat / scale, channel.alpha) * scale
    return (vals @ rule.w).reshape(a.shape)


def ell(s, phi, channel: ChannelModel):
    """s^(2/a) {E[H^(2/a)] Gamma(1-2/a) - int_0^(phi s^(-2/a)) [1 - L_H(t^(-a/2))] dt}.

    Evaluated as the equivalent tail integral, which avoids cancellation.
    """
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(s <= 0):
        raise ValueError("SIR threshold s must be > 0")
    if np.any(phi < 0):
        raise ValueError("phi must be >= 0")
    sd = s ** channel.delta
    out = sd * interference_tail(phi / sd, channel)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- coverage

def coverage_prob(s, scenario: NetworkScenario, channel: ChannelModel,
                  scheme: AssociationScheme, exact: bool = False) -> float:
    """P[SIR >= s] for the typical user.

    The default is the Jensen form 1/(1 + (1-p_void) ell(s, zeta)/zeta);
    ``exact=True`` averages G^2/(G^2 + (1-p_void) ell(s, G^2)) over
    G^2 = (WH)^(-2/a) E[(WH)^(2/a)].
    """
    z = zeta_of(channel, scheme)
    p = void_prob(scenario.v, 3.5 * z)
    if not exact or scheme.kind == NEAREST:
        return float(1.0 / (1.0 + (1.0 - p) * ell(s, z, channel) / z))
    return _coverage_exact(s, 1.0 - p, channel, scheme)


def _coverage_exact(s, active: float, channel: ChannelModel, scheme: AssociationScheme) -> float:
    d = channel.delta

    def f(g2):
        return g2 / (g2 + active * ell(s, g2, channel))

    if scheme.kind == MAX_POWER:
        # G^2 = (X S)^-d E[X^d] E[S^d]: Gauss-Hermite over ln S, adaptive over X ~ Exp(1)
        rule = gauss_hermite(INNER_ORDER)
        svals = np.exp(rule.normal_points(channel.mu_s, channel.sigma_s))
        moment = frac_moment_H(channel, d)
        total = 0.0
        for wi, si in zip(rule.w, svals):
            c = moment * si ** -d

            def integrand(y, c=c):
                # x = e^y keeps the x^-d behaviour near 0 smooth
                x = math.exp(y)
                return math.exp(-x) * x * float(f(c * x ** -d))

            # e^-x is below 1e-30 past x = 70; x < e^-60 carries no mass
            val, _ = integrate.quad(integrand, -60.0, math.log(70.0), epsabs=1e-12, epsrel=1e-10, limit=400)
            total += wi * val
        return float(total)
    # weighted: no distribution for W beyond its sampler, so average a fixed draw
    rng = np.random.default_rng(0x5EED)
    n = 20000
    h = rng.standard_exponential(n) * np.exp(rng.normal(channel.mu_s, channel.sigma_s, n))
    wh = scheme.w_sampler(rng, n) * h
    g2 = wh ** -d * np.mean(wh ** d)
    return float(np.mean(f(g2)))


# --------------------------------------------------------------- throughput

def _quad_halfline(fun, epsabs=1e-9):
    """int_0^inf fun(s) ds: plain on [0, 1], then s = e^y for the slowly decaying tail."""
    head, _ = integrate.quad(fun, 0.0, 1.0, epsabs=epsabs, epsrel=1e-10, limit=400)
    # the tail decays at least like e^(-2y/alpha); y = 400 is far beyond double precision
    tail, _ = integrate.quad(lambda y: fun(math.exp(y)) * math.exp(y), 0.0, 400.0,
                             epsabs=epsabs, epsrel=1e-10, limit=400)
    return head + tail


def rate_integral(p_void: float, channel: ChannelModel, zeta: float,
                  quad: Optional[QuadratureRule] = None) -> float:
    """sum_i w_i int_0^inf ds / ([s + e^-(sqrt2 sigma x_i + mu)] [1 + (1-p) ell(s,zeta)/zeta]).

    Equals ln 2 times the mean spectral efficiency of the typical link.
    """
    quad = quad or gauss_hermite(DEFAULT_ORDER)
    if channel.sigma_s == 0 and channel.mu_s == 0:
        fade = np.ones(1)
        w = np.ones(1)
    else:
        fade = np.exp(-quad.normal_points(channel.mu_s, channel.sigma_s))
        w = quad.w
    active = 1.0 - p_void

    def fun(s):
        if s == 0.0:
            return float(np.dot(w, 1.0 / fade))
        return float(np.dot(w, 1.0 / (s + fade))) / (1.0 + active * ell(s, zeta, channel) / zeta)

    return _quad_halfline(fun)


def _setup(scenario, channel, scheme, quad):
    if quad is not None and quad.n < 4:
        raise ValueError("throughput quadrature needs order n >= 4")
    z = zeta_of(channel, scheme)
    r = 3.5 * z
    p = void_prob(scenario.v, r)
    return z, r, p, rate_integral(p, channel, z, quad)


def avg_cell_throughput(scenario: NetworkScenario, channel: ChannelModel,
                        scheme: AssociationScheme, quad: Optional[QuadratureRule] = None) -> float:
    """Average cell throughput T_C in bits/s/Hz per km^2."""
    _, r, p, integral = _setup(scenario, channel, scheme, quad)
    return scenario.lambda_b * (1.0 - p) / (LN2 * (1.0 - 1.0 / r)) * integral


def user_throughput_from_cell(t_c: float, scenario: NetworkScenario, rho: float) -> float:
    """T_U = (rho-1)(1-p_void) T_C / (rho lambda_u)."""
    p = void_prob(scenario.v, rho)
    return (rho - 1.0) * (1.0 - p) * t_c / (rho * scenario.lambda_u)


def avg_user_throughput(scenario: NetworkScenario, channel: ChannelModel,
                        scheme: AssociationScheme, quad: Optional[QuadratureRule] = None) -> float:
    """Average user throughput T_U in bits/s/Hz per user."""
    t_c = avg_cell_throughput(scenario, channel, scheme, quad)
    return user_throughput_from_cell(t_c, scenario, rho_of(channel, scheme))


def avg_user_throughput_direct(scenario: NetworkScenario, channel: ChannelModel,
                               scheme: AssociationScheme, quad: Optional[QuadratureRule] = None) -> float:
    """T_U = lambda_b (1-p)^2 / (lambda_u ln 2) * rate integral, without going through T_C."""
    _, _, p, integral = _setup(scenario, channel, scheme, quad)
    return scenario.lambda_b * (1.0 - p) ** 2 / (scenario.lambda_u * LN2) * integral


def mean_link_rate(scenario: NetworkScenario, channel: ChannelModel,
                   scheme: AssociationScheme, quad: Optional[QuadratureRule] = None) -> float:
    """Model value of E[log2(1 + SIR)] for the typical user."""
    _, _, _, integral = _setup(scenario, channel, scheme, quad)
    return integral / LN2


def mean_inverse_cell_area(scenario: NetworkScenario, rho: float) -> float:
    """E[1/|C*|] = rho lambda_b (1-p_void) / (rho - 1) for the associated cell."""
    p = void_prob(scenario.v, rho)
    return rho * scenario.lambda_b * (1.0 - p) / (rho - 1.0)
