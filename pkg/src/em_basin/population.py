"""The population EM operator M and the population-level guarantees.

Stein's identity for the symmetric mixture collapses M to two scalar
Gaussian expectations along theta:

    M(theta) = 2 theta E w'(tau Z + mu) + theta_star (2 E w(tau Z + mu) - 1),

with ``mu = <theta, theta_star> / sigma^2`` and ``tau = ||theta|| / sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import MixtureModel, Region, make_rng, probe_points
from .quadrature import GhRule, gh_rule, legendre_rule, omega_expectation

CONTRACTION_CONSTANT = 76.0
DEFAULT_PROBES = 10_000
THEOREM_SLACK = 1e-6


class HypothesisError(ValueError):
    """A lemma or theorem hypothesis does not hold for the requested parameters."""


def _batch(theta, model: MixtureModel) -> tuple[np.ndarray, bool]:
    arr = np.asarray(theta, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != model.d:
        raise ValueError(f"expected vectors of dimension {model.d}, got shape {arr.shape}")
    return arr, single


def _scalars(pts: np.ndarray, model: MixtureModel):
    s2 = model.sigma**2
    mu = pts @ model.theta_star / s2
    tau = np.linalg.norm(pts, axis=1) / model.sigma
    return mu, tau


def pop_em(theta, model: MixtureModel, rule: GhRule | None = None) -> np.ndarray:
    """Population EM update; accepts one vector or a stack of row vectors."""
    pts, single = _batch(theta, model)
    mu, tau = _scalars(pts, model)
    e_d1 = omega_expectation(tau, mu, rule, derivative=1)
    e_0 = omega_expectation(tau, mu, rule)
    out = 2.0 * e_d1[:, None] * pts + (2.0 * e_0 - 1.0)[:, None] * model.theta_star[None, :]
    return out[0] if single else out


def pop_em_residual(theta, model: MixtureModel, rule: GhRule | None = None) -> np.ndarray:
    """``M(theta) - theta_star`` without the cancellation of subtracting afterwards.

    ``1 - E w(tau Z + mu)`` is evaluated as ``E w(tau Z - mu)``.
    """
    pts, single = _batch(theta, model)
    mu, tau = _scalars(pts, model)
    e_d1 = omega_expectation(tau, mu, rule, derivative=1)
    miss = omega_expectation(tau, -mu, rule)
    out = 2.0 * e_d1[:, None] * pts - 2.0 * miss[:, None] * model.theta_star[None, :]
    return out[0] if single else out


def pop_em_mc_oracle(theta, model: MixtureModel, n_mc: int, seed: int, return_se: bool = False):
    """Monte Carlo estimate of ``2 E[Y w(<Y, theta> / sigma^2)]`` from fresh draws.

    With ``return_se`` also returns the componentwise standard errors.
    """
    if n_mc < 10_000:
        raise ValueError("n_mc must be at least 1e4")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.d,):
        raise ValueError(f"theta must have shape ({model.d},)")
    rng = make_rng(seed, 3)
    total = np.zeros(model.d)
    total_sq = np.zeros(model.d)
    chunk = 200_000
    for start in range(0, n_mc, chunk):
        k = min(chunk, n_mc - start)
        eta = np.where(rng.integers(0, 2, size=k) == 1, 1.0, -1.0)
        y = eta[:, None] * model.theta_star + model.sigma * rng.standard_normal((k, model.d))
        terms = 2.0 * y * np.asarray(kernels.omega(y @ theta / model.sigma**2))[:, None]
        total += terms.sum(axis=0)
        total_sq += (terms * terms).sum(axis=0)
    mean = total / n_mc
    if not return_se:
        return mean
    var = np.maximum(total_sq / n_mc - mean * mean, 0.0) * n_mc / (n_mc - 1)
    return mean, np.sqrt(var / n_mc)


def gamma_contraction(s: float, r: float) -> float:
    """Contraction factor ``76 r^4 exp(-(s / r)^2 / 16)``."""
    if r < 1:
        raise ValueError(f"gamma requires r >= 1, got r={r}")
    if s < 0:
        raise ValueError("s must be non-negative")
    return CONTRACTION_CONSTANT * r**4 * math.exp(-((s / r) ** 2) / 16.0)


def contraction_snr_threshold(r: float) -> float:
    """Smallest s with gamma(s, r) <= 1, i.e. ``4 r sqrt(log(76 r^4))``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return 4.0 * r * math.sqrt(math.log(CONTRACTION_CONSTANT * r**4))


def radius_window(s: float, c1: float = 6.0, c2: float = 1.0 / 8.0) -> tuple[float, float]:
    """Admissible radii ``c1 <= r <= c2 s / sqrt(log(e s))``.

    The defaults are the concrete instance for a = 1/2, kappa1 = kappa2 = 3/4.
    """
    if s <= 0:
        return c1, 0.0
    return c1, c2 * s / math.sqrt(math.log(math.e * s))


def in_radius_window(s: float, r: float, c1: float = 6.0, c2: float = 1.0 / 8.0) -> bool:
    lo, hi = radius_window(s, c1, c2)
    return lo <= r <= hi


def lemma_omega_lower_bound(a: float, s: float, r: float) -> float:
    """Lower bound ``1 - exp(-(a s / r)^2 / 5)`` on ``E w(<theta, X> / sigma^2)`` over D_{a,r}."""
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    if r < 1 or s < 0:
        raise ValueError("requires r >= 1 and s >= 0")
    return -math.expm1(-((a * s / r) ** 2) / 5.0)


# -- stability and contraction scans -------------------------------------------


@dataclass
class StabilityReport:
    name: str
    observed: float
    bound: float
    passed: bool
    extreme_theta: np.ndarray
    probes: int
    quadrature_order: int

    @property
    def margin(self) -> float:
        return self.observed - self.bound if self.name == "inner_product" else self.bound - self.observed

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "observed": self.observed,
            "bound": self.bound,
            "margin": self.margin,
            "pass": self.passed,
            "extreme_theta": self.extreme_theta.tolist(),
            "probes": self.probes,
            "order": self.quadrature_order,
        }


def _check_inner_product_hypotheses(model, region, kappa1):
    a, s, r = region.a, model.snr(), region.r
    if not a < kappa1 < 1:
        raise HypothesisError(f"kappa1 must lie in (a, 1) = ({a}, 1), got {kappa1}")
    cap = a * s / math.sqrt(5.0 * math.log(2.0 / (1.0 - a / kappa1)))
    if r > cap:
        raise HypothesisError(
            f"r <= a s / sqrt(5 log(2 / (1 - a / kappa1))) fails: r={r} > {cap:.6g}"
        )


def _check_norm_hypotheses(model, region, kappa2):
    a, s, r = region.a, model.snr(), region.r
    if not 0 < kappa2 < 1:
        raise HypothesisError(f"kappa2 must lie in (0, 1), got {kappa2}")
    if r < 4.0 / kappa2:
        raise HypothesisError(f"4 / kappa2 <= r fails: r={r} < {4.0 / kappa2:.6g}")
    cap = a * s / math.sqrt(5.0 * math.log(8.0 / kappa2))
    if r > cap:
        raise HypothesisError(f"r <= a s / sqrt(5 log(8 / kappa2)) fails: r={r} > {cap:.6g}")


def inner_product_stability_check(
    model: MixtureModel,
    region: Region,
    kappa1: float,
    probes: int = DEFAULT_PROBES,
    rule: GhRule | None = None,
    seed: int = 0,
    tol: float = 1e-9,
) -> StabilityReport:
    """Check ``<M(theta), theta_star> >= (a / kappa1) ||theta_star||^2`` over D_{a,r} probes.

    Raises :class:`HypothesisError` when the lemma's radius cap fails.
    """
    _check_inner_product_hypotheses(model, region, kappa1)
    rule = gh_rule() if rule is None else rule
    pts = probe_points(model, region, probes, seed)
    values = pop_em(pts, model, rule) @ model.theta_star
    bound = region.a / kappa1 * model.norm**2
    i = int(np.argmin(values))
    return StabilityReport(
        "inner_product", float(values[i]), bound, bool(values[i] >= bound - tol),
        pts[i], len(pts), rule.order,
    )


def norm_stability_check(
    model: MixtureModel,
    region: Region,
    kappa2: float,
    probes: int = DEFAULT_PROBES,
    rule: GhRule | None = None,
    seed: int = 0,
    tol: float = 1e-9,
) -> StabilityReport:
    """Check ``||M(theta)|| <= kappa2 r ||theta_star||`` over D_{a,r} probes."""
    _check_norm_hypotheses(model, region, kappa2)
    rule = gh_rule() if rule is None else rule
    pts = probe_points(model, region, probes, seed)
    norms = np.linalg.norm(pop_em(pts, model, rule), axis=1)
    bound = kappa2 * region.r * model.norm
    i = int(np.argmax(norms))
    return StabilityReport(
        "norm", float(norms[i]), bound, bool(norms[i] <= bound + tol * model.norm),
        pts[i], len(pts), rule.order,
    )


@dataclass
class ContractionReport:
    region: Region
    snr: float
    d: int
    gamma_theoretical: float
    max_observed_ratio: float
    argmax_theta: np.ndarray
    probes: int
    quadrature_order: int
    max_excess: float
    slack: float = THEOREM_SLACK
    ratios: np.ndarray = field(default=None, repr=False)

    @property
    def asserted(self) -> bool:
        """The theorem only speaks when gamma < 1."""
        return self.gamma_theoretical < 1.0

    @property
    def passed(self) -> bool | None:
        if not self.asserted:
            return None
        return self.max_excess <= 0.0

    def to_dict(self) -> dict:
        return {
            "a": self.region.a,
            "r": self.region.r,
            "s": self.snr,
            "d": self.d,
            "gamma": self.gamma_theoretical,
            "max_ratio": self.max_observed_ratio,
            "argmax_theta": self.argmax_theta.tolist(),
            "probes": self.probes,
            "order": self.quadrature_order,
            "pass": self.passed,
        }


def contraction_scan(
    model: MixtureModel,
    region: Region,
    probes: int = DEFAULT_PROBES,
    rule: GhRule | None = None,
    seed: int = 0,
    slack: float = THEOREM_SLACK,
    points: np.ndarray | None = None,
) -> ContractionReport:
    """Scan ``||M(theta) - theta_star|| / ||theta - theta_star||`` over D_{1/2,r}.

    A probe passes when ``||M(theta) - theta_star|| <= gamma ||theta - theta_star|| + slack``;
    ``max_excess`` is the largest violation (<= 0 when every probe passes).
    Explicit ``points`` replace the generated probe set.
    """
    if region.a != 0.5:
        raise ValueError("the contraction theorem is stated for a = 1/2")
    rule = gh_rule() if rule is None else rule
    pts = probe_points(model, region, probes, seed) if points is None else np.atleast_2d(points)
    dist = np.linalg.norm(pts - model.theta_star, axis=1)
    keep = dist > 1e-12 * model.norm
    pts, dist = pts[keep], dist[keep]
    if len(pts) == 0:
        raise ValueError("no probe points away from theta_star")
    num = np.linalg.norm(pop_em_residual(pts, model, rule), axis=1)
    ratios = num / dist
    gamma = gamma_contraction(model.snr(), region.r)
    excess = num - (gamma * dist + slack)
    i = int(np.argmax(ratios))
    return ContractionReport(
        region, model.snr(), model.d, gamma, float(ratios[i]), pts[i], len(pts),
        rule.order, float(np.max(excess)), slack, ratios,
    )


def normal_difference_identity_check(
    mu0: float, sigma0: float, mu1: float, sigma1: float,
    rule: GhRule | None = None, lambda_order: int = 64,
) -> tuple[float, float, float]:
    """Both sides of the Gaussian interpolation identity for ``rho = w``.

    lhs = E w(X1) - E w(X0); rhs integrates
    ``(mu1 - mu0) E w'(X_l) + (sigma1^2 - sigma0^2) / 2 E w''(X_l)`` over l in [0, 1],
    where X_l is normal with mean ``(1-l) mu0 + l mu1`` and variance
    ``(1-l) sigma0^2 + l sigma1^2``.
    """
    if sigma0 <= 0 or sigma1 <= 0:
        raise ValueError("standard deviations must be positive")
    lhs = omega_expectation(sigma1, mu1, rule) - omega_expectation(sigma0, mu0, rule)
    lam, w = legendre_rule(lambda_order)
    mu_l = (1.0 - lam) * mu0 + lam * mu1
    sd_l = np.sqrt((1.0 - lam) * sigma0**2 + lam * sigma1**2)
    integrand = (mu1 - mu0) * omega_expectation(sd_l, mu_l, rule, derivative=1) + 0.5 * (
        sigma1**2 - sigma0**2
    ) * omega_expectation(sd_l, mu_l, rule, derivative=2)
    rhs = float(integrand @ w)
    return float(lhs), rhs, abs(float(lhs) - rhs)
