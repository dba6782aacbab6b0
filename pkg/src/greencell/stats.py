"""Streaming mean/variance accumulators and Monte Carlo estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    stderr: float
    trials: int

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("an estimate needs at least two trials")

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr


class RunningStats:
    """Welford accumulator; ``a + b`` merges two streams (Chan et al.)."""

    def __init__(self, values: Iterable[float] = ()):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        for x in values:
            self.push(x)

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def __add__(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats()
        n = self.n + other.n
        if n == 0:
            return out
        d = other.mean - self.mean
        out.n = n
        out.mean = self.mean + d * other.n / n
        out.m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        return out

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else math.nan

    @property
    def sem(self) -> float:
        return math.sqrt(self.var / self.n) if self.n > 1 else math.nan

    def estimate(self) -> SimEstimate:
        return SimEstimate(self.mean, self.sem, self.n)


class RatioStats:
    """Ratio of means E[a]/E[b] over paired per-trial values, delta-method error."""

    def __init__(self):
        self.a = RunningStats()
        self.b = RunningStats()
        self._cab = 0.0  # co-moment of a and b

    def push(self, a: float, b: float) -> None:
        da = a - self.a.mean  # old mean of a, new mean of b
        self.a.push(a)
        self.b.push(b)
        self._cab += da * (b - self.b.mean)

    def estimate(self) -> SimEstimate:
        n = self.a.n
        r = self.a.mean / self.b.mean
        cov = self._cab / (n - 1)
        var = (self.a.var - 2 * r * cov + r * r * self.b.var) / (self.b.mean ** 2 * n)
        return SimEstimate(r, math.sqrt(max(var, 0.0)), n)
