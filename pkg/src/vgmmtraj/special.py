"""Digamma and related special functions used by the variational updates."""

from __future__ import annotations

import math

import numpy as np

# B_{2n} / (2n) for n = 1..7
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

_RECURRENCE_FLOOR = 6.0


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0.

    Shifts the argument up to >= 6 with psi(x) = psi(x + 1) - 1/x, then
    applies the asymptotic expansion. Accurate to ~1e-13 absolute for
    x >= 0.25. Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("digamma is only implemented for positive arguments")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < _RECURRENCE_FLOOR
    while np.any(small):
        acc = acc - np.where(small, 1.0 / z, 0.0)
        z = np.where(small, z + 1.0, z)
        small = z < _RECURRENCE_FLOOR
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_ASYMPTOTIC):
        series = (series + c) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    return float(out) if out.ndim == 0 else out


def gammaln(x):
    arr = np.asarray(x, dtype=float)
    out = np.vectorize(math.lgamma, otypes=[float])(arr)
    return float(out) if out.ndim == 0 else out


def expected_log_det_wishart(nu: float, log_det_w: float, D: int) -> float:
    """E[ln|Lambda|] for Lambda ~ Wishart(W, nu) given ln|W|."""
    i = np.arange(1, D + 1)
    return float(np.sum(digamma((nu + 1.0 - i) / 2.0)) + D * math.log(2.0) + log_det_w)


def log_wishart_norm(log_det_w: float, nu: float, D: int) -> float:
    """ln B(W, nu), the log normaliser of a Wishart density."""
    i = np.arange(1, D + 1)
    return float(
        -0.5 * nu * log_det_w
        - 0.5 * nu * D * math.log(2.0)
        - 0.25 * D * (D - 1) * math.log(math.pi)
        - np.sum(gammaln((nu + 1.0 - i) / 2.0))
    )


def log_dirichlet_norm(alpha) -> float:
    """ln C(alpha) = ln Gamma(sum alpha) - sum ln Gamma(alpha_k)."""
    a = np.asarray(alpha, dtype=float)
    return float(math.lgamma(a.sum()) - np.sum(gammaln(a)))
