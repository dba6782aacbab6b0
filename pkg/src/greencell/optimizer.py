"""Optimal cell load: fixed-point maps, a direct maximiser, and beta calibration.

Each throughput metric has a fixed-point characterisation of its best cell
load ``v*`` with a free exponent ``beta > 1``.  Because ``beta`` is not pinned
down analytically it is calibrated here against a golden-section maximiser of
the metric itself, and both answers are always reported together.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import optimize

from . import analytics, powergreen
from .analytics import NetworkScenario
from .channel import AssociationScheme, ChannelModel, zeta as zeta_of
from .powergreen import PowerModel
from .quadrature import QuadratureRule

USER_THROUGHPUT = "user_throughput"
GREEN_CELL = "green_cell"
GREEN_USER = "green_user"
KINDS = (USER_THROUGHPUT, GREEN_CELL, GREEN_USER)

V_LO, V_HI = 1e-4, 100.0


class NoGreenGapError(ValueError):
    """P_ON <= P_OFF: sleeping saves nothing, so no green optimum exists."""


class NoInteriorOptimum(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


class MultiModalError(ValueError):
    def __init__(self, msg, grid=None, values=None):
        super().__init__(msg)
        self.grid = grid
        self.values = values


class CalibrationWarning(UserWarning):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


def _void(v, rho):
    return np.exp(-rho * np.log1p(np.asarray(v, dtype=float) / rho))


def _active(v, rho):
    """1 - (1 + v/rho)^-rho, accurate for huge rho and small v."""
    return -np.expm1(-rho * np.log1p(np.asarray(v, dtype=float) / rho))


def map_L(v, rho: float, beta: float):
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    return _active(v, rho) ** (1.0 / beta)


def _green_map(v, k, expo, rho, zeta, alpha, lambda_u, power, beta):
    if power.p_on <= power.p_off:
        raise NoGreenGapError("P_ON must exceed P_OFF for a green optimum")
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    gap = (power.p_on - power.p_off) / (power.delta * power.p_min * math.gamma(1.0 + 2.0 / alpha))
    # (1 - p)^(-k/beta) - 1 without cancellation when p is tiny
    with np.errstate(divide="ignore"):
        bracket = np.expm1(-(k / beta) * np.log1p(-_void(v, rho)))
    return math.pi * zeta * lambda_u * (gap * bracket) ** expo


def map_LC(v, rho, zeta, alpha, lambda_u, power: PowerModel, beta):
    return _green_map(v, 1.0, 2.0 / alpha, rho, zeta, alpha, lambda_u, power, beta)


def map_LU(v, rho, zeta, alpha, lambda_u, power: PowerModel, beta):
    return _green_map(v, 2.0, 2.0 / (alpha + beta), rho, zeta, alpha, lambda_u, power, beta)


@dataclass(frozen=True)
class FixedPointProblem:
    kind: str
    beta: float
    rho: float
    zeta: float = 1.0
    alpha: float = 3.76
    lambda_u: float = 1.0  # km^-2, same length unit as power.p_min
    power: Optional[PowerModel] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if self.kind != USER_THROUGHPUT and self.power is None:
            raise ValueError("green problems need a power model")
        if self.power is not None and self.power.p_on <= self.power.p_off:
            raise NoGreenGapError("P_ON must exceed P_OFF for a green optimum")

    @classmethod
    def build(cls, kind, beta, lambda_u, channel: ChannelModel, scheme: AssociationScheme,
              power: Optional[PowerModel] = None, rho_hat: float = analytics.RHO_HAT):
        z = zeta_of(channel, scheme)
        return cls(kind, beta, rho_hat * z, z, channel.alpha, lambda_u, power)

    def map(self, v):
        if self.kind == USER_THROUGHPUT:
            return map_L(v, self.rho, self.beta)
        f = map_LC if self.kind == GREEN_CELL else map_LU
        return f(v, self.rho, self.zeta, self.alpha, self.lambda_u, self.power, self.beta)

    def with_beta(self, beta: float) -> "FixedPointProblem":
        return FixedPointProblem(self.kind, beta, self.rho, self.zeta, self.alpha, self.lambda_u, self.power)


@dataclass(frozen=True)
class OptResult:
    v_star: float
    lambda_b_star: float
    objective_at_star: float
    iterations: int
    residual: float


def _first_crossing(g, lo, hi, n=400):
    grid = np.geomspace(lo, hi, n)
    vals = np.array([g(v) for v in grid])
    idx = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    return grid[i], grid[i + 1]


def solve_fixed_point(problem: FixedPointProblem, tol: float = 1e-10, max_iter: int = 200,
                      bracket=(V_LO, V_HI), objective: Optional[Callable[[float], float]] = None) -> OptResult:
    """Positive root of ``map(v) - v`` by bisection; ``v = 0`` is never returned."""
    if not tol > 0:
        raise ValueError("tol must be positive")

    def g(v):
        return float(problem.map(v)) - v

    br = _first_crossing(g, *bracket)
    if br is None:
        raise NoInteriorOptimum(f"map(v) - v has no positive sign change on {bracket}")
    v, info = optimize.bisect(g, *br, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=max_iter,
                              full_output=True, disp=False)
    res = abs(g(v))
    if not info.converged or res >= tol:
        raise ConvergenceError(f"bisection stopped at v={v} with residual {res:.3g}")
    obj = float(objective(v)) if objective is not None else math.nan
    return OptResult(v, problem.lambda_u / v, obj, info.iterations, res)


def iterate_fixed_point(problem: FixedPointProblem, v0: float = 1.0, tol: float = 1e-13,
                        max_iter: int = 100_000) -> float:
    """Plain iteration v <- map(v); converges where |map'(v*)| < 1."""
    v = v0
    for _ in range(max_iter):
        nv = float(problem.map(v))
        if abs(nv - v) < tol:
            return nv
        v = nv
    raise ConvergenceError(f"fixed-point iteration did not settle (last v={v})")


def maximize_direct(objective: Callable[[float], float], bracket=(1e-2, V_HI), tol: float = 1e-6,
                    grid: int = 80):
    """Golden-section argmax in log v after a grid scan that rejects multiple peaks."""
    lo, hi = bracket
    xs = np.geomspace(lo, hi, grid)
    ys = np.array([objective(x) for x in xs])
    inner = (ys[1:-1] > ys[:-2]) & (ys[1:-1] >= ys[2:])
    peaks = np.nonzero(inner)[0] + 1
    if len(peaks) > 1:
        raise MultiModalError(f"objective has {len(peaks)} local maxima on {bracket}", xs, ys)
    i = int(np.argmax(ys))
    if i == 0 or i == grid - 1:
        raise NoInteriorOptimum(f"maximum sits on the bracket edge v={xs[i]:g}")
    res = optimize.minimize_scalar(lambda t: -objective(math.exp(t)), method="golden",
                                   bracket=(math.log(xs[i - 1]), math.log(xs[i]), math.log(xs[i + 1])),
                                   options={"xtol": tol})
    v = math.exp(res.x)
    return v, float(objective(v))


def objective(kind: str, lambda_u: float, channel: ChannelModel, scheme: AssociationScheme,
              power: Optional[PowerModel] = None, quad: Optional[QuadratureRule] = None):
    """The metric as a function of cell load at fixed user intensity."""
    if kind == USER_THROUGHPUT:
        def f(v):
            return analytics.avg_user_throughput(NetworkScenario.from_load(lambda_u, v), channel, scheme, quad)
    elif kind == GREEN_CELL:
        def f(v):
            return powergreen.green_cell_throughput(NetworkScenario.from_load(lambda_u, v), channel, scheme,
                                                    power, quad)
    elif kind == GREEN_USER:
        def f(v):
            return powergreen.green_user_throughput(NetworkScenario.from_load(lambda_u, v), channel, scheme,
                                                    power, quad)
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    return f


@dataclass(frozen=True)
class Calibration:
    beta: float
    v_fixed: float
    v_direct: float
    rel_err: float


def calibrate_beta(problem: FixedPointProblem, v_direct: float, search_range=(1.01, 20.0),
                   n_scan: int = 80, tol: float = 0.05) -> Calibration:
    """beta whose fixed point lands on the directly maximised load ``v_direct``."""
    lo, hi = search_range
    if not (1.0 < lo < hi <= 20.0):
        raise ValueError("search range must lie inside (1, 20]")

    def vstar(b):
        try:
            return solve_fixed_point(problem.with_beta(b)).v_star
        except (NoInteriorOptimum, ConvergenceError):
            return math.nan

    betas = np.linspace(lo, hi, n_scan)
    errs = np.array([vstar(b) - v_direct for b in betas])
    beta = None
    ok = np.isfinite(errs)
    for i in range(n_scan - 1):
        if ok[i] and ok[i + 1] and errs[i] * errs[i + 1] <= 0:
            beta = optimize.brentq(lambda b: vstar(b) - v_direct, betas[i], betas[i + 1], xtol=1e-10)
            break
    if beta is None:
        j = int(np.nanargmin(np.abs(errs)))
        beta = float(betas[j])
    vf = vstar(beta)
    out = Calibration(float(beta), vf, v_direct, abs(vf - v_direct) / v_direct)
    if not out.rel_err <= tol:
        warnings.warn(CalibrationWarning(
            f"best beta={beta:.4g} gives v*={vf:.4g} vs direct {v_direct:.4g}", best=out), stacklevel=2)
    return out


@dataclass
class SweepRow:
    lambda_u: float
    v_star: float = math.nan
    lambda_b_star: float = math.nan
    metric_star: float = math.nan
    ok: bool = True
    error: str = ""


def sweep_optimal_intensity(lambda_u_grid: Sequence[float], kind: str, beta: float, channel: ChannelModel,
                            scheme: AssociationScheme, power: Optional[PowerModel] = None,
                            quad: Optional[QuadratureRule] = None) -> List[SweepRow]:
    if len(lambda_u_grid) == 0:
        raise ValueError("empty lambda_u grid")
    rows = []
    for lu in lambda_u_grid:
        row = SweepRow(float(lu))
        try:
            prob = FixedPointProblem.build(kind, beta, lu, channel, scheme, power)
            res = solve_fixed_point(prob, objective=objective(kind, lu, channel, scheme, power, quad))
            row.v_star, row.lambda_b_star, row.metric_star = res.v_star, res.lambda_b_star, res.objective_at_star
        except (NoInteriorOptimum, ConvergenceError, NoGreenGapError, ValueError) as exc:
            row.ok, row.error = False, f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows
