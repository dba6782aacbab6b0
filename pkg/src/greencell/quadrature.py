"""Gauss-Hermite rules normalised for expectations over a standard normal.

With nodes ``x_i`` (roots of the physicists' Hermite polynomial ``H_n``) and
weights ``w_i = 2^(n-1) n! / (n^2 H_(n-1)(x_i)^2)`` we have

    E[f(mu + sigma*N)] ~= sum_i w_i f(mu + sqrt(2)*sigma*x_i),   sum_i w_i = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

MAX_ORDER = 64


@dataclass(frozen=True)
class QuadratureRule:
    n: int
    nodes: tuple
    weights: tuple

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.nodes)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights)

    def normal_points(self, mu: float, sigma: float) -> np.ndarray:
        """Abscissae for ``Z ~ N(mu, sigma^2)``."""
        return math.sqrt(2.0) * sigma * self.x + mu

    def expect(self, f, mu: float = 0.0, sigma: float = 1.0) -> float:
        """E[f(Z)] for ``Z ~ N(mu, sigma^2)``; ``f`` must accept arrays."""
        return float(np.dot(self.w, f(self.normal_points(mu, sigma))))


def hermite_phys(n: int, x):
    """Physicists' Hermite polynomial H_n(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev
    h = 2.0 * x
    for k in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h


@lru_cache(maxsize=None)
def gauss_hermite(n: int = 6) -> QuadratureRule:
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= MAX_ORDER):
        raise ValueError(f"Gauss-Hermite order must be an integer in [1, {MAX_ORDER}], got {n!r}")
    n = int(n)
    if n == 1:
        return QuadratureRule(1, (0.0,), (1.0,))
    # Golub-Welsch: H_n roots are eigenvalues of the Jacobi matrix
    off = np.sqrt(np.arange(1, n) / 2.0)
    x = eigh_tridiagonal(np.zeros(n), off, eigvals_only=True)
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])  # exact symmetry
    if n % 2:
        x[n // 2] = 0.0
    log_w = ((n - 1) * math.log(2.0) + math.lgamma(n + 1) - 2.0 * math.log(n)
             - 2.0 * np.log(np.abs(hermite_phys(n - 1, x))))
    w = np.exp(log_w)
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(n, tuple(float(v) for v in x), tuple(float(v) for v in w))
