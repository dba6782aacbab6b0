"""Command line: ``greencell figure|compute|validate``.

Flags override environment variables (``GREENCELL_CONFIG``, ``GREENCELL_SEED``,
``GREENCELL_TRIALS``, ``GREENCELL_OUT``, ``GREENCELL_SHADOW_CONVENTION``,
``GREENCELL_BUDGET``), which override the config file.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import List, Optional

from . import checks, config, figures, optimizer
from .channel import SHADOW_CONVENTIONS

ENV_PREFIX = "GREENCELL_"


def _env(name: str) -> Optional[str]:
    return os.environ.get(ENV_PREFIX + name)


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (key = value)")
    common.add_argument("--seed", type=int, help="base RNG seed (u64)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    common.add_argument("--out", help="output directory")
    common.add_argument("--shadow-convention", choices=SHADOW_CONVENTIONS,
                        help="how dB shadowing figures are read (required unless set in config/env)")

    p = argparse.ArgumentParser(prog="greencell", description="Void-cell-aware small-cell network metrics.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("figure", parents=[common], help="write the CSV curves of one figure")
    f.add_argument("figure_id", type=int, help=f"one of {', '.join(map(str, figures.FIGURES))}")

    c = sub.add_parser("compute", parents=[common], help="evaluate one metric over a grid")
    c.add_argument("metric", help=f"one of {', '.join(figures.METRICS)}")
    c.add_argument("--grid", type=_floats, help="comma-separated grid (loads, SIR dB, or lambda_u)")
    c.add_argument("--load", type=float, default=2.0, help="cell load for the coverage metric")
    c.add_argument("--kind", default=optimizer.GREEN_CELL, choices=optimizer.KINDS, help="v_star problem")

    v = sub.add_parser("validate", parents=[common], help="run the simulation-vs-formula checks")
    v.add_argument("--budget", choices=checks.BUDGETS, help="ci (minutes) or full (figure-grade)")
    v.add_argument("--only", help="comma-separated check names")
    v.add_argument("--rho-hat", type=float, help="override the Gamma shape used by the void-fraction check")
    return p


def load_scenario(args) -> config.Scenario:
    path = args.config or _env("CONFIG")
    over = {
        "seed": args.seed if args.seed is not None else _int_env("SEED"),
        "trials": args.trials if args.trials is not None else _int_env("TRIALS"),
        "out_dir": args.out or _env("OUT"),
        "shadow_convention": args.shadow_convention or _env("SHADOW_CONVENTION"),
    }
    if path:
        return config.load(path, **over)
    return config.parse("", **over)


def _int_env(name):
    raw = _env(name)
    return int(raw) if raw is not None else None


def _validate(args, scn) -> int:
    budget = args.budget or _env("BUDGET") or "ci"
    if budget not in checks.BUDGETS:
        raise config.ConfigError(f"budget must be one of {checks.BUDGETS}, got {budget!r}")
    only = [x.strip() for x in args.only.split(",")] if args.only else None
    if only:
        unknown = sorted(set(only) - set(checks.CHECKS))
        if unknown:
            raise config.ConfigError(f"unknown checks {unknown}; valid: {', '.join(checks.CHECKS)}")
    rho_hat = args.rho_hat if args.rho_hat is not None else scn.rho_hat
    results = checks.run_all(budget, rho_hat=rho_hat, only=only, shadow_db=scn.shadow_db,
                             convention=scn.shadow_convention)
    header = ["check", "passed", "measured", "target", "tolerance", "seconds", "detail"]
    rows = [[r.name, int(r.passed), r.measured, r.target, r.tolerance, f"{r.seconds:.2f}", r.detail or "-"]
            for r in results]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    figures.write_csv(os.path.join(scn.out_dir, f"validate_{budget}.csv"), header, rows)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failing checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args)
        if args.command == "figure":
            rep = figures.run_figure(args.figure_id, scn)
        elif args.command == "compute":
            rep = figures.run_compute(args.metric, scn, grid=args.grid, load=args.load, kind=args.kind)
        else:
            return _validate(args, scn)
    except (config.ConfigError, figures.UnknownFigureError, ValueError, OSError) as exc:
        print(f"greencell: error: {exc}", file=sys.stderr)
        return 2
    for path in rep.files:
        print(path)
    if rep.failures:
        print(f"{len(rep.failures)} point(s) failed; see the failures manifest", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
