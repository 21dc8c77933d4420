"""Scalar kernels: the stretched logistic and its derivatives, Gaussian and
chi-square tails, and the closed-form tail bounds built on them.

Every function accepts a float or an array and returns the same shape.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)


def _finite(t, name: str = "t") -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _out(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


def _decay(t: np.ndarray) -> np.ndarray:
    # e^{-2|t|} never overflows and underflows cleanly to 0
    return np.exp(-2.0 * np.abs(t))


def omega(t):
    """Stretched logistic ``1 / (1 + exp(-2 t))``.

    Evaluated on the branch that keeps the exponent non-positive, so it
    saturates to exactly 0 or 1 instead of overflowing.
    """
    t = _finite(t)
    e = _decay(t)
    return _out(np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e)))


def omega_d1(t):
    """First derivative, ``2 w (1 - w)`` written as ``2 e / (1 + e)^2``."""
    t = _finite(t)
    e = _decay(t)
    return _out(2.0 * e / (1.0 + e) ** 2)


def _one_minus_two_omega(t: np.ndarray) -> np.ndarray:
    e = _decay(t)
    return -np.sign(t) * (1.0 - e) / (1.0 + e)


def omega_d2(t):
    """Second derivative, ``2 w' (1 - 2 w)``."""
    t = _finite(t)
    return _out(2.0 * np.asarray(omega_d1(t)) * _one_minus_two_omega(t))


def omega_d3(t):
    """Third derivative, ``4 w' (1 - 6 w + 6 w^2)``.

    Uses ``1 - 6 w + 6 w^2 = 1 - 3 w'`` which avoids cancellation in the tails.
    """
    t = _finite(t)
    d1 = np.asarray(omega_d1(t))
    return _out(4.0 * d1 * (1.0 - 3.0 * d1))


def std_normal_cdf(t):
    t = _finite(t)
    return _out(0.5 * special.erfc(-t / _SQRT2))


def std_normal_upper_tail(t):
    """P(Z > t) for standard normal Z, accurate deep into the upper tail."""
    t = _finite(t)
    return _out(0.5 * special.erfc(t / _SQRT2))


def normal_tail_bound(t):
    """The bound ``P(Z > t) <= exp(-t^2 / 2) / 2`` for ``t >= 0``."""
    t = _finite(t)
    if np.any(t < 0):
        raise ValueError("tail bound only holds for t >= 0")
    return _out(0.5 * np.exp(-0.5 * t * t))


def chi_square_upper_tail(d: int, x):
    """P(chi^2_d > x) via the regularized upper incomplete gamma function."""
    if int(d) != d or d < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {d}")
    x = _finite(x, "x")
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    return _out(special.gammaincc(0.5 * d, 0.5 * x))


def chi_square_chernoff_bound(d: int, r):
    """Chernoff bound ``(r / sqrt d)^d exp(-(r^2 - d) / 2)`` on P(chi^2_d > r^2).

    Only claimed for ``r^2 >= d``; a relative slack of 1e-12 admits ``r = sqrt(d)``
    computed in floating point.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {d}")
    r = _finite(r, "r")
    r2 = r * r
    if np.any(r < 0) or np.any(r2 < d * (1.0 - 1e-12)):
        raise ValueError("Chernoff bound requires r^2 >= d")
    r2 = np.maximum(r2, float(d))
    log_bound = 0.5 * d * np.log(r2 / d) - 0.5 * (r2 - d)
    return _out(np.exp(log_bound))


def sigmoid_expectation_lower_bound(rho, alpha, beta, q):
    """Lower bound ``rho(beta - q) (1 - exp(-q^2 / (2 alpha^2)) / 2)`` on
    ``E rho(alpha Z + beta)`` for positive non-decreasing ``rho`` and ``q >= 0``.
    """
    alpha = np.abs(_finite(alpha, "alpha"))
    q = _finite(q, "q")
    if np.any(q < 0):
        raise ValueError("q must be non-negative")
    beta = _finite(beta, "beta")
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = np.where(alpha > 0, -(q * q) / (2.0 * alpha * alpha), -np.inf)
    # alpha = 0 with q = 0: the Markov step still gives rho(beta) * (1 - 1/2)
    expo = np.where((alpha == 0) & (q == 0), 0.0, expo)
    return _out(np.asarray(rho(beta - q)) * (1.0 - 0.5 * np.exp(expo)))


def omega_d1_expectation_cap(mu, sigma):
    """Upper bound ``2 exp(-(mu / sigma)^2 / 2)`` on ``E w'(sigma Z + mu)``,
    valid when ``|mu| <= 2 sigma^2``.
    """
    mu = _finite(mu, "mu")
    sigma = _finite(sigma, "sigma")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    if np.any(np.abs(mu) > 2.0 * sigma * sigma * (1.0 + 1e-12)):
        raise ValueError("cap requires |mu| <= 2 sigma^2")
    return _out(2.0 * np.exp(-0.5 * (mu / sigma) ** 2))
