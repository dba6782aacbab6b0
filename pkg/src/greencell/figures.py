"""CSV tables behind each figure, plus single-metric evaluation.

One CSV per curve; headers carry units.  Rows that fail are left out and
listed in ``failures.csv`` so no cell is ever empty.
"""
from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import analytics, geomsim, optimizer, powergreen
from .analytics import NetworkScenario
from .channel import AssociationScheme, ChannelModel, zeta
from .config import Scenario
from .quadrature import gauss_hermite

FIGURES = (2, 3, 4, 5, 6, 7, 8)
METRICS = ("void_prob", "coverage", "T_C", "T_U", "G_C", "G_U", "v_star")


class UnknownFigureError(ValueError):
    pass


@dataclass
class RunReport:
    files: List[str] = field(default_factory=list)
    failures: List[tuple] = field(default_factory=list)


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
    return path


def _seed(scn: Scenario, *key) -> int:
    return int(np.random.SeedSequence([scn.seed, *key]).generate_state(1, np.uint64)[0])


def _curves(scn: Scenario, with_shadowed_nearest: bool = True):
    out = [("nearest_0dB", ChannelModel(scn.alpha), AssociationScheme.nearest())]
    for sd in scn.shadow_db_levels:
        if with_shadowed_nearest:
            out.append((f"nearest_{sd:g}dB", scn.channel(sd), AssociationScheme.nearest()))
        out.append((f"max_power_{sd:g}dB", scn.channel(sd), AssociationScheme.max_power()))
    return out


def _sim_config(scn: Scenario, lambda_b: float, channel, scheme, seed: int, typical: bool, probes: bool):
    return geomsim.SimConfig(scn.lambda_u_per_km2, lambda_b, channel, scheme, expected_bs=scn.expected_bs,
                             trials=scn.trials, seed=seed, typical_per_trial=scn.typical_per_trial if typical else 0,
                             probes_per_cell=scn.probes_per_cell if probes else 0,
                             side=scn.side_km or None)


class _Rows:
    """Collects rows of one curve; a failing x is logged instead of written."""

    def __init__(self, report: RunReport, fig, curve):
        self.rows, self.report, self.fig, self.curve = [], report, fig, curve

    def add(self, x, fn: Callable[[], Sequence]):
        try:
            self.rows.append([x, *fn()])
        except Exception as exc:  # recorded in the manifest, the run goes on
            self.report.failures.append((self.fig, self.curve, x, f"{type(exc).__name__}: {exc}"))


def _fig2(scn, out, rep):
    grid = scn.load_grid
    lu = scn.lambda_u_per_km2
    for ci, (name, ch, sc) in enumerate(_curves(scn, with_shadowed_nearest=False)):
        z = zeta(ch, sc)
        rows = _Rows(rep, 2, name)
        for pi, v in enumerate(grid):
            def row(v=v, pi=pi):
                cfg = _sim_config(scn, lu / v, ch, sc, _seed(scn, 2, ci, pi), False, False)
                est = geomsim.void_fraction(geomsim.simulate(cfg))
                return [analytics.void_prob(v, scn.rho_hat * z), est.mean, est.stderr, est.trials]
            rows.add(v, row)
        rep.files.append(write_csv(os.path.join(out, f"fig2_{name}.csv"),
                                   ["cell_load", "void_prob_analytic", "void_prob_sim_mean", "void_prob_sim_stderr",
                                    "trials"], rows.rows))
        if sc.kind != "nearest":
            rep.files.append(write_csv(os.path.join(out, f"fig2_upper_bound_{name}.csv"),
                                       ["cell_load", "void_prob_upper_bound"],
                                       [[v, (1 + v / z) ** -z] for v in grid]))
    rep.files.append(write_csv(os.path.join(out, "fig2_lower_bound.csv"), ["cell_load", "void_prob_lower_bound"],
                               [[v, math.exp(-v)] for v in grid]))


def _sim_throughput(scn, fig, ci, pi, lambda_b, ch, sc, cell: bool):
    cfg = _sim_config(scn, lambda_b, ch, sc, _seed(scn, fig, ci, pi), True, cell)
    recs = geomsim.simulate(cfg)
    return geomsim.estimate_cell_throughput(recs) if cell else geomsim.estimate_user_throughput(recs)


def _fig34(fig, scn, out, rep):
    cell = fig == 3
    quad = gauss_hermite(scn.quad_order)
    lu = scn.lambda_u_per_km2
    unit = "bits_per_s_per_Hz_per_km2" if cell else "bits_per_s_per_Hz_per_user"
    label = "T_C" if cell else "T_U"
    summary = []
    for ci, (name, ch, sc) in enumerate(_curves(scn)):
        rows = _Rows(rep, fig, name)
        for pi, v in enumerate(scn.load_grid):
            def row(v=v, pi=pi):
                scen = NetworkScenario.from_load(lu, v)
                f = analytics.avg_cell_throughput if cell else analytics.avg_user_throughput
                est = _sim_throughput(scn, fig, ci, pi, lu / v, ch, sc, cell)
                return [f(scen, ch, sc, quad), est.mean, est.stderr, est.trials]
            rows.add(v, row)
        rep.files.append(write_csv(os.path.join(out, f"fig{fig}_{name}.csv"),
                                   ["cell_load", f"{label}_analytic_{unit}", f"{label}_sim_mean_{unit}",
                                    f"{label}_sim_stderr_{unit}", "trials"], rows.rows))
        if not cell:
            _optimum_row(summary, rep, fig, name, optimizer.objective(optimizer.USER_THROUGHPUT, lu, ch, sc,
                                                                       quad=quad))
    if summary:
        rep.files.append(write_csv(os.path.join(out, f"fig{fig}_optimum.csv"),
                                   ["curve", "v_opt", f"{label}_max_{unit}", "local_maxima"], summary))


def _optimum_row(summary, rep, fig, name, f):
    try:
        grid = np.geomspace(0.01, 100, 80)
        ys = np.array([f(v) for v in grid])
        peaks = int(np.sum((ys[1:-1] > ys[:-2]) & (ys[1:-1] >= ys[2:])))
        v, val = optimizer.maximize_direct(f)
        summary.append([name, v, val, peaks])
    except Exception as exc:
        rep.failures.append((fig, name, "optimum", f"{type(exc).__name__}: {exc}"))


def _fig56(fig, scn, out, rep):
    kind = optimizer.GREEN_CELL if fig == 5 else optimizer.GREEN_USER
    quad = gauss_hermite(scn.quad_order)
    power = scn.power()
    lu = scn.lambda_u_per_km2
    unit = "bits_per_Hz_per_J" if fig == 5 else "bits_per_Hz_per_J_per_user"
    label = "G_C" if fig == 5 else "G_U"
    summary = []
    for name, ch, sc in _curves(scn):
        f = optimizer.objective(kind, lu, ch, sc, power, quad)
        rows = _Rows(rep, fig, name)
        for v in scn.green_load_grid:
            def row(v=v):
                b = powergreen.power_budget(NetworkScenario.from_load(lu, v), ch, sc, power)
                return [f(v), b.p_t, b.mean_psi]
            rows.add(v, row)
        rep.files.append(write_csv(os.path.join(out, f"fig{fig}_{name}.csv"),
                                   ["cell_load", f"{label}_analytic_{unit}", "transmit_power_W", "mean_power_W"],
                                   rows.rows))
        _optimum_row(summary, rep, fig, name, f)
    rep.files.append(write_csv(os.path.join(out, f"fig{fig}_optimum.csv"),
                               ["curve", "v_opt", f"{label}_max_{unit}", "local_maxima"], summary))


def _fig78(fig, scn, out, rep):
    kind = optimizer.GREEN_CELL if fig == 7 else optimizer.GREEN_USER
    beta = scn.beta_green_cell if fig == 7 else scn.beta_green_user
    quad = gauss_hermite(scn.quad_order)
    power = scn.power()
    unit = "bits_per_Hz_per_J" if fig == 7 else "bits_per_Hz_per_J_per_user"
    for name, ch, sc in _curves(scn):
        rows = _Rows(rep, fig, name)
        for lu in scn.lambda_u_grid_per_km2:
            def row(lu=lu):
                f = optimizer.objective(kind, lu, ch, sc, power, quad)
                prob = optimizer.FixedPointProblem.build(kind, beta, lu, ch, sc, power, scn.rho_hat)
                res = optimizer.solve_fixed_point(prob, objective=f)
                v_d, val_d = optimizer.maximize_direct(f)
                return [res.v_star, res.lambda_b_star, res.objective_at_star, v_d, lu / v_d, val_d, beta]
            rows.add(lu, row)
        rep.files.append(write_csv(os.path.join(out, f"fig{fig}_{name}.csv"),
                                   ["lambda_u_per_km2", "v_star_fixed_point", "lambda_b_star_fixed_point_per_km2",
                                    f"metric_at_fixed_point_{unit}", "v_opt_direct", "lambda_b_opt_direct_per_km2",
                                    f"metric_max_direct_{unit}", "beta"], rows.rows))


def run_figure(fig_id: int, scn: Scenario, out: Optional[str] = None) -> RunReport:
    if fig_id not in FIGURES:
        raise UnknownFigureError(f"unknown figure {fig_id}; choose from {FIGURES}")
    out = out or scn.out_dir
    rep = RunReport()
    if fig_id == 2:
        _fig2(scn, out, rep)
    elif fig_id in (3, 4):
        _fig34(fig_id, scn, out, rep)
    elif fig_id in (5, 6):
        _fig56(fig_id, scn, out, rep)
    else:
        _fig78(fig_id, scn, out, rep)
    _manifest(rep, out, f"fig{fig_id}")
    return rep


def _manifest(rep: RunReport, out: str, tag: str):
    if rep.failures:
        rep.files.append(write_csv(os.path.join(out, f"{tag}_failures.csv"), ["figure", "curve", "x", "error"],
                                   rep.failures))


def run_compute(metric: str, scn: Scenario, out: Optional[str] = None, grid: Optional[Sequence[float]] = None,
                load: float = 2.0, kind: str = optimizer.GREEN_CELL) -> RunReport:
    """Evaluate one metric over a grid for the scenario's scheme and ``shadow_db``."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; valid metrics: {', '.join(METRICS)}")
    out = out or scn.out_dir
    ch, sc = scn.channel(), scn.association()
    quad = gauss_hermite(scn.quad_order)
    lu = scn.lambda_u_per_km2
    power = scn.power()
    z = zeta(ch, sc)
    rep = RunReport()
    rows = _Rows(rep, "compute", metric)
    if metric == "void_prob":
        header = ["cell_load", "void_prob"]
        for v in grid or scn.load_grid:
            rows.add(v, lambda v=v: [analytics.void_prob(v, scn.rho_hat * z)])
    elif metric == "coverage":
        header = ["sir_threshold_dB", "coverage_prob"]
        scen = NetworkScenario.from_load(lu, load)
        for s_db in grid or scn.sir_grid_db:
            rows.add(s_db, lambda s_db=s_db: [analytics.coverage_prob(10 ** (s_db / 10), scen, ch, sc)])
    elif metric in ("T_C", "T_U", "G_C", "G_U"):
        fn, unit = {
            "T_C": (lambda s: analytics.avg_cell_throughput(s, ch, sc, quad), "bits_per_s_per_Hz_per_km2"),
            "T_U": (lambda s: analytics.avg_user_throughput(s, ch, sc, quad), "bits_per_s_per_Hz_per_user"),
            "G_C": (lambda s: powergreen.green_cell_throughput(s, ch, sc, power, quad), "bits_per_Hz_per_J"),
            "G_U": (lambda s: powergreen.green_user_throughput(s, ch, sc, power, quad), "bits_per_Hz_per_J_per_user"),
        }[metric]
        header = ["cell_load", "lambda_b_per_km2", f"{metric}_{unit}"]
        for v in grid or scn.load_grid:
            rows.add(v, lambda v=v: [lu / v, fn(NetworkScenario.from_load(lu, v))])
    else:
        if kind not in optimizer.KINDS:
            raise ValueError(f"unknown kind {kind!r}; expected one of {optimizer.KINDS}")
        header = ["lambda_u_per_km2", "v_star_fixed_point", "lambda_b_star_per_km2", "beta_calibrated",
                  "v_opt_direct", "calibration_rel_err"]
        for lu_i in grid or scn.lambda_u_grid_per_km2:
            def row(lu_i=lu_i):
                f = optimizer.objective(kind, lu_i, ch, sc, power, quad)
                v_d, _ = optimizer.maximize_direct(f)
                prob = optimizer.FixedPointProblem.build(kind, 2.0, lu_i, ch, sc, power, scn.rho_hat)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", optimizer.CalibrationWarning)
                    cal = optimizer.calibrate_beta(prob, v_d)
                return [cal.v_fixed, lu_i / cal.v_fixed, cal.beta, v_d, cal.rel_err]
            rows.add(lu_i, row)
    name = f"compute_{metric}" + (f"_{kind}" if metric == "v_star" else "")
    rep.files.append(write_csv(os.path.join(out, f"{name}.csv"), header, rows.rows))
    _manifest(rep, out, name)
    return rep
