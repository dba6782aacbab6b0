"""Monte Carlo simulation of a PPP small-cell network on a square torus.

Each trial draws BSs and users as independent PPPs, associates every user by
``argmax_i W_i H_i d_i^-alpha`` (toroidal distances), flags void BSs, and then
measures the SIR, co-user count and serving-cell area of a few typical users
picked uniformly among the users (Palm sampling).  Trials are independent and
seeded by ``(seed, trial, stream)`` so any subset can be replayed or run in
parallel and merged.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, List, Optional, Sequence

import numpy as np
from scipy import stats as sps
from scipy.spatial import cKDTree

from .channel import (
    MAX_POWER,
    NEAREST,
    AssociationScheme,
    ChannelModel,
    sample_gains,
    wh_moment,
)
from .stats import RunningStats, SimEstimate

# work-array budget (elements) for the dense association scan
CHUNK = 2_000_000

# stream ids for the counter-based generator
_S_BS, _S_USERS, _S_ASSOC, _S_TYPICAL, _S_SIR, _S_WEIGHTS = range(6)


def stream(seed: int, trial: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial, purpose])))


@dataclass(frozen=True)
class SimWindow:
    side: float  # km

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("window side must be positive")

    @property
    def area(self) -> float:
        return self.side * self.side

    @classmethod
    def for_count(cls, intensity: float, expected: float) -> "SimWindow":
        """Square window holding ``expected`` points of a PPP on average."""
        return cls(math.sqrt(expected / intensity))


def sample_ppp(intensity: float, window: SimWindow, rng: np.random.Generator) -> np.ndarray:
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    n = rng.poisson(intensity * window.area)
    return rng.uniform(0.0, window.side, size=(n, 2))


def torus_dist2(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    """Squared toroidal distances, shape ``(len(a), len(b))``."""
    d = np.abs(a[:, None, :] - b[None, :, :])
    d = np.minimum(d, side - d)
    return np.einsum("ijk,ijk->ij", d, d)


@dataclass
class AssignmentTable:
    serving: np.ndarray  # BS index per user
    counts: np.ndarray  # users per BS
    kept_gains: Optional[np.ndarray] = None  # association gains of the kept users

    @property
    def void(self) -> np.ndarray:
        return self.counts == 0


def associate(users: np.ndarray, bss: np.ndarray, scheme: AssociationScheme,
              channel: ChannelModel, rng: np.random.Generator, window: SimWindow,
              keep: Optional[np.ndarray] = None, bs_weights: Optional[np.ndarray] = None) -> AssignmentTable:
    """Serve each user by the BS maximising ``w h d^-alpha``.

    Gains are i.i.d. per (user, BS) link.  ``keep`` lists users whose gain
    rows are returned: the serving-link gains of the typical users.
    """
    n_b = len(bss)
    if n_b == 0:
        raise ValueError("cannot associate users with an empty BS set")
    n_u = len(users)
    keep = np.asarray([] if keep is None else keep, dtype=int)
    kept = np.empty((len(keep), n_b)) if len(keep) else None
    if scheme.kind == NEAREST:
        serving = np.empty(0, dtype=int)
        if n_u:
            _, serving = cKDTree(bss, boxsize=window.side).query(users, k=1)
        if kept is not None:
            kept[:] = sample_gains(channel, rng, kept.shape)
    else:
        if scheme.kind == MAX_POWER:
            w = np.full(n_b, scheme.bias)
        else:
            w = bs_weights if bs_weights is not None else np.asarray(scheme.w_sampler(rng, n_b), float)
        half_alpha = channel.alpha / 2.0
        serving = np.empty(n_u, dtype=int)
        pos_of = {int(u): i for i, u in enumerate(keep)}
        step = max(1, CHUNK // n_b)
        for lo in range(0, n_u, step):
            hi = min(n_u, lo + step)
            h = sample_gains(channel, rng, (hi - lo, n_b))
            score = h * w / torus_dist2(users[lo:hi], bss, window.side) ** half_alpha
            serving[lo:hi] = np.argmax(score, axis=1)
            for u in keep[(keep >= lo) & (keep < hi)]:
                kept[pos_of[int(u)]] = h[u - lo]
    counts = np.bincount(serving, minlength=n_b)
    return AssignmentTable(np.asarray(serving, dtype=int), counts, kept)


def sir_samples(users: np.ndarray, bss: np.ndarray, table: AssignmentTable, typical: np.ndarray,
                channel: ChannelModel, rng: np.random.Generator, window: SimWindow,
                correlated: bool = False) -> np.ndarray:
    """SIR of each typical user; interference sums the non-void BSs only.

    The serving link keeps the gain that won the association (``table.kept_gains``,
    rows aligned with ``typical``).  Interfering links get fresh gains unless
    ``correlated``, in which case the association draws are reused.  Zero
    interference gives ``inf``.
    """
    if len(typical) == 0:
        return np.empty(0)
    d2 = torus_dist2(users[typical], bss, window.side)
    assoc = table.kept_gains
    rows = np.arange(len(typical))
    serv = table.serving[typical]
    h = assoc.copy() if correlated else sample_gains(channel, rng, d2.shape)
    h[rows, serv] = assoc[rows, serv]
    rx = h * d2 ** (-channel.alpha / 2.0)
    signal = rx[rows, serv]
    active = ~table.void
    interference = rx[:, active].sum(axis=1) - signal  # the serving BS is always active
    interference = np.maximum(interference, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(interference > 0, signal / np.where(interference > 0, interference, 1.0), np.inf)


def probe_areas(bss: np.ndarray, window: SimWindow, probes: int) -> np.ndarray:
    """Voronoi cell areas from a regular grid of about ``probes`` probe points."""
    m = max(1, int(math.ceil(math.sqrt(probes))))
    g = (np.arange(m) + 0.5) * (window.side / m)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    _, idx = cKDTree(bss, boxsize=window.side).query(pts, k=1)
    return np.bincount(idx, minlength=len(bss)) * (window.area / (m * m))


@dataclass
class SimConfig:
    lambda_u: float  # users / km^2
    lambda_b: float  # BSs / km^2
    channel: ChannelModel
    scheme: AssociationScheme
    expected_bs: float = 500.0
    trials: int = 100
    seed: int = 0
    typical_per_trial: int = 0
    probes_per_cell: int = 0  # > 0 measures serving-cell areas
    correlated_gains: bool = False
    side: Optional[float] = None  # overrides expected_bs

    @property
    def window(self) -> SimWindow:
        if self.side is not None:
            return SimWindow(self.side)
        return SimWindow.for_count(self.lambda_b, self.expected_bs)

    @property
    def v(self) -> float:
        return self.lambda_u / self.lambda_b


@dataclass
class TrialRecord:
    trial: int
    n_bs: int
    n_users: int
    n_void: int
    sir: np.ndarray = field(default_factory=lambda: np.empty(0))
    co_users: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    serving_area: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_json(self) -> str:
        return json.dumps({
            "trial": self.trial, "n_bs": self.n_bs, "n_users": self.n_users, "n_void": self.n_void,
            "sir": [None if math.isinf(x) else float(x) for x in self.sir],
            "co_users": [int(x) for x in self.co_users],
            "serving_area_km2": [float(x) for x in self.serving_area],
        })


def run_trial(cfg: SimConfig, trial: int) -> TrialRecord:
    window = cfg.window
    bss = sample_ppp(cfg.lambda_b, window, stream(cfg.seed, trial, _S_BS))
    if len(bss) == 0:
        return TrialRecord(trial, 0, 0, 0)
    users = sample_ppp(cfg.lambda_u, window, stream(cfg.seed, trial, _S_USERS))
    k = min(cfg.typical_per_trial, len(users))
    typical = np.sort(stream(cfg.seed, trial, _S_TYPICAL).choice(len(users), size=k, replace=False)) \
        if k else np.empty(0, dtype=int)
    weights = None
    if cfg.scheme.kind not in (NEAREST, MAX_POWER):
        weights = np.asarray(cfg.scheme.w_sampler(stream(cfg.seed, trial, _S_WEIGHTS), len(bss)), float)
    table = associate(users, bss, cfg.scheme, cfg.channel, stream(cfg.seed, trial, _S_ASSOC), window,
                      keep=typical, bs_weights=weights)
    rec = TrialRecord(trial, len(bss), len(users), int(table.void.sum()))
    if k:
        rec.sir = sir_samples(users, bss, table, typical, cfg.channel, stream(cfg.seed, trial, _S_SIR),
                              window, correlated=cfg.correlated_gains)
        serv = table.serving[typical]
        rec.co_users = table.counts[serv]
        if cfg.probes_per_cell > 0:
            if cfg.scheme.kind == NEAREST:
                rec.serving_area = probe_areas(bss, window, cfg.probes_per_cell * len(bss))[serv]
            else:
                # no deterministic region: user count over user intensity
                rec.serving_area = rec.co_users / cfg.lambda_u
    return rec


def simulate(cfg: SimConfig, trials: Optional[Sequence[int]] = None,
             sink: Optional[IO[str]] = None) -> List[TrialRecord]:
    """Run ``cfg.trials`` trials (or the given trial ids); optionally stream JSON lines."""
    ids = range(cfg.trials) if trials is None else trials
    out = []
    for t in ids:
        rec = run_trial(cfg, t)
        if sink is not None:
            sink.write(rec.to_json() + "\n")
        out.append(rec)
    return out


# ------------------------------------------------------------------ estimators

def void_fraction(records: Sequence[TrialRecord]) -> SimEstimate:
    acc = RunningStats(r.n_void / r.n_bs for r in records if r.n_bs)
    return acc.estimate()


def censored_count(records: Sequence[TrialRecord]) -> int:
    return int(sum(np.isinf(r.sir).sum() for r in records))


def _per_trial(records, fn):
    vals = []
    for r in records:
        ok = np.isfinite(r.sir)
        if ok.any():
            vals.append(fn(r, ok))
    return np.asarray(vals, dtype=float)


def coverage(records: Sequence[TrialRecord], s: float) -> SimEstimate:
    """P[SIR >= s] from the uncensored samples (censored ones have SIR = inf >= s)."""
    acc = RunningStats(float(np.mean(r.sir >= s)) for r in records if len(r.sir))
    return acc.estimate()


def sir_sample_count(records: Sequence[TrialRecord]) -> int:
    return int(sum(len(r.sir) for r in records))


def mean_rate(records: Sequence[TrialRecord]) -> SimEstimate:
    """E[log2(1 + SIR)] over uncensored typical users."""
    vals = _per_trial(records, lambda r, ok: np.mean(np.log2(1.0 + r.sir[ok])))
    return RunningStats(vals).estimate()


def mean_co_users(records: Sequence[TrialRecord]) -> SimEstimate:
    """Users sharing the typical user's serving BS, the typical user included."""
    return RunningStats(float(np.mean(r.co_users)) for r in records if len(r.co_users)).estimate()


def mean_users_per_active_cell(records: Sequence[TrialRecord]) -> SimEstimate:
    """Users per non-void BS, averaged over BSs rather than over users."""
    return RunningStats(r.n_users / (r.n_bs - r.n_void) for r in records if r.n_bs > r.n_void).estimate()


def _paired(records, fa, fb):
    rows = [(fa(r, ok), fb(r, ok)) for r in records for ok in [np.isfinite(r.sir)] if ok.any()]
    a, b = np.asarray(rows, dtype=float).T
    return a, b


def estimate_user_throughput(records: Sequence[TrialRecord]) -> SimEstimate:
    """E[log2(1+SIR)] / E[co-users] with a delta-method standard error."""
    a, b = _paired(records, lambda r, ok: np.mean(np.log2(1.0 + r.sir[ok])),
                   lambda r, ok: np.mean(r.co_users[ok]))
    n = len(a)
    ra = a.mean() / b.mean()
    c = np.cov(a, b)
    var = (c[0, 0] - 2 * ra * c[0, 1] + ra * ra * c[1, 1]) / (b.mean() ** 2 * n)
    return SimEstimate(float(ra), float(math.sqrt(max(var, 0.0))), n)


def estimate_cell_throughput(records: Sequence[TrialRecord]) -> SimEstimate:
    """E[log2(1+SIR)] * E[1/area] over typical users, bits/s/Hz per km^2."""
    if not any(len(r.serving_area) for r in records):
        raise ValueError("records carry no serving-cell areas; set probes_per_cell > 0")
    a, b = _paired(records, lambda r, ok: np.mean(np.log2(1.0 + r.sir[ok])),
                   lambda r, ok: np.mean(1.0 / r.serving_area[ok]))
    n = len(a)
    est = a.mean() * b.mean()
    c = np.cov(a, b)
    var = (b.mean() ** 2 * c[0, 0] + a.mean() ** 2 * c[1, 1] + 2 * a.mean() * b.mean() * c[0, 1]) / n
    return SimEstimate(float(est), float(math.sqrt(max(var, 0.0))), n)


# ------------------------------------------------------------ Voronoi / PPP

@dataclass(frozen=True)
class VoronoiStats:
    n_cells: int
    mean: float
    var: float
    skew: float
    min_probes: int
    low_resolution: bool

    # Gamma(7/2, rate 7/2) reference moments
    GAMMA_MEAN = 1.0
    GAMMA_VAR = 2.0 / 7.0
    GAMMA_SKEW = 2.0 / math.sqrt(3.5)


def normalized_areas(bs_points: np.ndarray, window: SimWindow, probes: int):
    """Areas times the empirical BS intensity, plus the smallest probe count per cell."""
    areas = probe_areas(bs_points, window, probes)
    per_probe = window.area / max(1, int(math.ceil(math.sqrt(probes)))) ** 2
    return areas * len(bs_points) / window.area, int(round(areas.min() / per_probe))


def voronoi_area_stats(bs_points, window: SimWindow, probes: int, min_probes_ok: int = 20) -> VoronoiStats:
    """Moments of lambda*area over one or more patterns.

    ``bs_points`` may be a single ``(n, 2)`` array or a list of them sharing ``window``.
    """
    patterns = [bs_points] if isinstance(bs_points, np.ndarray) else list(bs_points)
    parts, min_probes = [], None
    for pts in patterns:
        if len(pts) < 10:
            raise ValueError("Voronoi statistics need at least 10 BSs per pattern")
        a, mp = normalized_areas(pts, window, probes)
        parts.append(a)
        min_probes = mp if min_probes is None else min(min_probes, mp)
    x = np.concatenate(parts)
    return VoronoiStats(len(x), float(x.mean()), float(x.var(ddof=1)), float(sps.skew(x)),
                        int(min_probes), min_probes < min_probes_ok)


@dataclass(frozen=True)
class ConservationReport:
    predicted_rate: float  # of the nearest mapped distance squared
    mean_d2: float
    ks_stat: float
    p_value: float
    trials: int


def conservation_check(lam: float, scheme: AssociationScheme, channel: ChannelModel,
                       trials: int, expected_points: float = 2000.0, seed: int = 0,
                       const_wh: Optional[float] = None) -> ConservationReport:
    """Check that scaling each point by (W H)^(-1/alpha) leaves a PPP.

    BSs of a PPP of intensity ``lam`` in a disk are mapped to
    ``(W_i H_i)^(-1/alpha) B_i``; the squared distance from the origin to the
    nearest mapped point must be Exp(pi lam E[(WH)^(2/alpha)]).  ``const_wh``
    overrides the law of ``WH`` with a constant.
    """
    if trials < 500:
        raise ValueError("conservation check needs at least 500 trials")
    d = channel.delta
    moment = const_wh ** d if const_wh is not None else wh_moment(channel, scheme, d)
    rate = math.pi * lam * moment
    radius = math.sqrt(expected_points / (math.pi * lam))
    d2 = np.empty(trials)
    for t in range(trials):
        rng = stream(seed, t, 0)
        n = rng.poisson(expected_points)
        r2 = radius * radius * rng.uniform(size=n)  # squared radii, uniform in the disk
        if const_wh is not None:
            wh = np.full(n, const_wh)
        else:
            h = sample_gains(channel, rng, n)
            if scheme.kind == NEAREST:
                wh = np.full(n, scheme.bias)
            elif scheme.kind == MAX_POWER:
                wh = scheme.bias * h
            else:
                wh = np.asarray(scheme.w_sampler(rng, n), float) * h
        d2[t] = np.min(r2 * wh ** -d) if n else np.inf
    res = sps.kstest(d2, "expon", args=(0.0, 1.0 / rate))
    return ConservationReport(rate, float(d2.mean()), float(res.statistic), float(res.pvalue), trials)
