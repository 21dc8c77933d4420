"""Gauss-Hermite rules and one-dimensional Gaussian expectations E f(alpha Z + beta).

Plain Gauss-Hermite is exact for polynomials but resolves a sigmoid of unit
width only while ``alpha`` is small: the transition at ``alpha Z + beta = 0``
has width ``1 / alpha`` in Z and falls between nodes once ``alpha`` grows.
For functions that saturate to constants away from the origin (the
stretched logistic and its derivatives) :func:`gauss_expectation` can
integrate in the argument variable instead, where the transition sits at a
fixed place, and add the two saturated tails exactly through the normal cdf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_hermite

from . import kernels

MAX_ORDER = 512
DEFAULT_ORDER = 61

# Arguments with |t| beyond this are saturated: |w(t) - limit| < 1e-31 and
# the derivatives are below 1e-30.
SATURATION_HALF_WIDTH = 36.0
# Gauss-Hermite handles alpha <= this; larger alpha goes through the
# argument-space rule.
HERMITE_ALPHA_MAX = 0.5
_PANEL_WIDTH = 0.5
_PANEL_NODES = 10

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
_CHUNK = 512

OMEGA_LIMITS = {0: (0.0, 1.0), 1: (0.0, 0.0), 2: (0.0, 0.0), 3: (0.0, 0.0)}
_OMEGA_FUNCS = {
    0: kernels.omega,
    1: kernels.omega_d1,
    2: kernels.omega_d2,
    3: kernels.omega_d3,
}
# Functions whose saturation limits are known; "auto" looks them up here.
_KNOWN_LIMITS = {id(f): OMEGA_LIMITS[k] for k, f in _OMEGA_FUNCS.items()}


@dataclass(frozen=True, eq=False)
class GhRule:
    """Physicists' Gauss-Hermite rule: integrates against ``exp(-z^2)``.

    Extreme weights of rules above order ~400 underflow to 0.0 in double
    precision; those nodes contribute nothing and are kept for symmetry.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __repr__(self) -> str:
        return f"GhRule(order={self.order})"


@lru_cache(maxsize=None)
def gh_rule(order: int = DEFAULT_ORDER) -> GhRule:
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be an integer in [1, {MAX_ORDER}], got {order}")
    order = int(order)
    x, w = roots_hermite(order)
    # exact symmetry about 0
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return GhRule(order, x, w)


@lru_cache(maxsize=None)
def _argument_rule() -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on [-T, T], symmetric about 0."""
    gx, gw = np.polynomial.legendre.leggauss(_PANEL_NODES)
    n_panels = int(round(2 * SATURATION_HALF_WIDTH / _PANEL_WIDTH))
    left = -SATURATION_HALF_WIDTH + _PANEL_WIDTH * np.arange(n_panels)
    half = 0.5 * _PANEL_WIDTH
    nodes = (left[:, None] + half + half * gx[None, :]).ravel()
    weights = np.broadcast_to(half * gw, (n_panels, _PANEL_NODES)).ravel().copy()
    nodes = 0.5 * (nodes - nodes[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _hermite(f, alpha: np.ndarray, beta: np.ndarray, rule: GhRule) -> np.ndarray:
    scaled = _SQRT2 * rule.nodes
    out = np.empty(alpha.shape)
    flat_a, flat_b, flat_out = alpha.ravel(), beta.ravel(), out.reshape(-1)
    for start in range(0, flat_a.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        args = flat_a[sl, None] * scaled[None, :] + flat_b[sl, None]
        vals = np.asarray(f(args), dtype=float)
        flat_out[sl] = vals @ rule.weights * _INV_SQRT_PI
    return out


def _saturated(f, limits, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    lo, hi = limits
    nodes, weights = _argument_rule()
    fw = np.asarray(f(nodes), dtype=float) * weights
    half = SATURATION_HALF_WIDTH
    out = np.empty(alpha.shape)
    flat_a, flat_b, flat_out = alpha.ravel(), beta.ravel(), out.reshape(-1)
    for start in range(0, flat_a.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        a, b = flat_a[sl], flat_b[sl]
        z = (nodes[None, :] - b[:, None]) / a[:, None]
        inner = np.exp(-0.5 * z * z) @ fw * _INV_SQRT_2PI / a
        tails = 0.0
        if lo != 0.0:
            tails = tails + lo * kernels.std_normal_upper_tail((half + b) / a)
        if hi != 0.0:
            tails = tails + hi * kernels.std_normal_upper_tail((half - b) / a)
        flat_out[sl] = inner + tails
    return out


def gauss_expectation(
    f: Callable,
    alpha,
    beta,
    rule: GhRule | None = None,
    saturation: tuple[float, float] | str | None = "auto",
):
    """Approximate ``E f(alpha Z + beta)`` for ``Z ~ N(0, 1)``.

    Parameters
    ----------
    f : callable
        Vectorized scalar function.
    alpha, beta : float or array
        Broadcast against each other; the result has the broadcast shape.
    rule : GhRule, optional
        Gauss-Hermite rule, default order 61. Without ``saturation`` the
        result is exactly ``sum_i w_i / sqrt(pi) * f(sqrt(2) x_i alpha + beta)``.
    saturation : (lower, upper), "auto" or None
        Declares that ``f(t)`` equals ``lower`` for ``t < -36`` and ``upper``
        for ``t > 36`` to double precision. Then ``|alpha| > 0.5`` is
        integrated over the argument with composite Gauss-Legendre and the
        saturated tails are added through the normal cdf. ``"auto"`` (the
        default) uses the known limits of the stretched logistic and its
        derivatives and plain Gauss-Hermite for any other ``f``; ``None``
        forces plain Gauss-Hermite.
    """
    if isinstance(saturation, str):
        if saturation != "auto":
            raise ValueError("saturation must be (lower, upper), 'auto' or None")
        saturation = _KNOWN_LIMITS.get(id(f))
    rule = gh_rule(DEFAULT_ORDER) if rule is None else rule
    alpha = np.abs(kernels._finite(alpha, "alpha"))
    beta = kernels._finite(beta, "beta")
    alpha, beta = np.broadcast_arrays(alpha, beta)
    scalar = alpha.ndim == 0
    alpha = np.atleast_1d(alpha).astype(float)
    beta = np.atleast_1d(beta).astype(float)

    out = np.empty(alpha.shape)
    point = alpha == 0
    if np.any(point):
        out[point] = np.asarray(f(beta[point]), dtype=float)
    if saturation is None:
        use_gh = ~point
        wide = np.zeros_like(point)
    else:
        wide = alpha > HERMITE_ALPHA_MAX
        use_gh = ~point & ~wide
    if np.any(use_gh):
        out[use_gh] = _hermite(f, alpha[use_gh], beta[use_gh], rule)
    if np.any(wide):
        out[wide] = _saturated(f, saturation, alpha[wide], beta[wide])
    if not np.all(np.isfinite(out)):
        raise ValueError("f produced non-finite values at the quadrature nodes")
    return float(out[0]) if scalar else out


def omega_expectation(alpha, beta, rule: GhRule | None = None, derivative: int = 0):
    """``E w^(k)(alpha Z + beta)`` for the stretched logistic, k = 0..3."""
    if derivative not in _OMEGA_FUNCS:
        raise ValueError("derivative must be 0, 1, 2 or 3")
    return gauss_expectation(
        _OMEGA_FUNCS[derivative], alpha, beta, rule, saturation=OMEGA_LIMITS[derivative]
    )


@lru_cache(maxsize=None)
def legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights
