"""Flat ``key = value`` scenario files with units in the key names.

Lines starting with ``#`` and trailing ``# ...`` are comments.  Lists are
comma separated.  ``shadow_convention`` has no default: a dB shadowing figure
is ambiguous without it.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from typing import Optional, Tuple

from .channel import (
    MAX_POWER,
    NEAREST,
    SHADOW_CONVENTIONS,
    AssociationScheme,
    ChannelModel,
    shadow_natural,
)
from .powergreen import LinkBudget, PowerModel
from .quadrature import MAX_ORDER


class ConfigError(ValueError):
    def __init__(self, msg, line: Optional[int] = None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


@dataclass(frozen=True)
class Scenario:
    shadow_convention: str = ""
    alpha: float = 3.76
    mu_s_db: float = 0.0
    shadow_db: float = 8.0  # used by single-curve commands
    shadow_db_levels: Tuple[float, ...] = (4.0, 8.0)  # MRP curves in figures
    scheme: str = MAX_POWER
    lambda_u_per_km2: float = 370.0
    lambda_u_grid_per_km2: Tuple[float, ...] = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0)
    load_grid: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0)
    green_load_grid: Tuple[float, ...] = (0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0)
    sir_grid_db: Tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    p_on_w: float = 6.8
    p_off_w: float = 4.3
    delta: float = 4.0
    p_min_dbm: float = -106.0
    path_loss_ref_db: float = 140.7
    wall_loss_db: float = 20.0
    indoor_fraction: float = 0.8
    antenna_gain_dbi: float = 5.0
    quad_order: int = 6
    beta_user: float = 2.0
    beta_green_cell: float = 7.0
    beta_green_user: float = 2.5
    rho_hat: float = 3.5
    seed: int = 1
    trials: int = 40
    typical_per_trial: int = 40
    expected_bs: float = 500.0
    side_km: float = 0.0  # 0 sizes the window from expected_bs
    probes_per_cell: int = 100
    out_dir: str = "out"

    def __post_init__(self):
        check(self)

    # -- derived models
    def sigma_nat(self, shadow_db: Optional[float] = None) -> float:
        return shadow_natural(self.shadow_db if shadow_db is None else shadow_db, self.shadow_convention)

    def channel(self, shadow_db: Optional[float] = None) -> ChannelModel:
        # a dB mean maps linearly to natural-log units
        return ChannelModel(self.alpha, self.mu_s_db * math.log(10.0) / 10.0, self.sigma_nat(shadow_db))

    def association(self, kind: Optional[str] = None) -> AssociationScheme:
        kind = kind or self.scheme
        return AssociationScheme.nearest() if kind == NEAREST else AssociationScheme.max_power()

    def link_budget(self) -> LinkBudget:
        return LinkBudget.indoor_mix(self.path_loss_ref_db, self.wall_loss_db, self.indoor_fraction,
                                     self.antenna_gain_dbi)

    def power(self) -> PowerModel:
        return PowerModel(self.p_on_w, self.p_off_w, self.delta, self.link_budget().p_min_at_1km(self.p_min_dbm))

    def replace(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name: f for f in fields(Scenario)}


def check(s: Scenario) -> None:
    """Raise ConfigError naming the offending key; ``parse`` adds line numbers."""
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if s.shadow_convention not in SHADOW_CONVENTIONS:
        bad("shadow_convention", f"must be one of {', '.join(SHADOW_CONVENTIONS)} (no default)")
    if not s.alpha > 2:
        bad("alpha", "path-loss exponent must exceed 2")
    if s.shadow_db < 0 or any(x < 0 for x in s.shadow_db_levels):
        bad("shadow_db", "shadowing must be >= 0 dB")
    if s.scheme not in (NEAREST, MAX_POWER):
        bad("scheme", f"must be {NEAREST} or {MAX_POWER}")
    if not s.lambda_u_per_km2 > 0:
        bad("lambda_u_per_km2", "must be positive")
    for key in ("lambda_u_grid_per_km2", "load_grid", "green_load_grid"):
        val = getattr(s, key)
        if not val or any(not x > 0 for x in val):
            bad(key, "needs at least one value, all positive")
    if not s.sir_grid_db:
        bad("sir_grid_db", "needs at least one value")
    if not s.p_on_w > s.p_off_w > 0:
        bad("p_on_w", "need p_on_w > p_off_w > 0")
    if not s.delta > 0:
        bad("delta", "must be positive")
    if not 0 <= s.indoor_fraction <= 1:
        bad("indoor_fraction", "must lie in [0, 1]")
    if not 4 <= s.quad_order <= MAX_ORDER:
        bad("quad_order", f"must lie in [4, {MAX_ORDER}]")
    for key in ("beta_user", "beta_green_cell", "beta_green_user"):
        if not getattr(s, key) > 1:
            bad(key, "must exceed 1")
    if not s.rho_hat > 1:
        bad("rho_hat", "must exceed 1")
    if s.seed < 0 or s.seed >= 2 ** 64:
        bad("seed", "must be an unsigned 64-bit integer")
    if s.trials < 2:
        bad("trials", "need at least 2 trials")
    if s.typical_per_trial < 1 or s.probes_per_cell < 1:
        bad("typical_per_trial", "typical_per_trial and probes_per_cell must be >= 1")
    if not s.expected_bs >= 10 or s.side_km < 0:
        bad("expected_bs", "expected_bs must be >= 10 and side_km >= 0")


def _convert(name: str, raw: str):
    typ = _FIELDS[name].type
    if "Tuple" in str(typ):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if typ in ("int", int):
        return int(raw, 0)
    if typ in ("float", float):
        return float(raw)
    return raw


def parse(text: str, **overrides) -> Scenario:
    values, where = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (p.strip() for p in body.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first on line {where[key]})", lineno)
        try:
            values[key] = _convert(key, raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot read {raw!r} as {_FIELDS[key].type}", lineno) from None
        where[key] = lineno
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Scenario(**values)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        raise ConfigError(str(exc), where.get(key)) from None


def load(path, **overrides) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), **overrides)


def _fmt(val) -> str:
    if isinstance(val, tuple):
        return ", ".join(repr(float(x)) for x in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def dump(s: Scenario) -> str:
    lines = ["# greencell scenario"]
    for f in fields(Scenario):
        lines.append(f"{f.name} = {_fmt(getattr(s, f.name))}")
    return "\n".join(lines) + "\n"

