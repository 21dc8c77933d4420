"""Random initializers, their region-probability guarantees, and multi-start EM."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .model import MixtureModel, derive_seed, make_rng
from .sample import DEFAULT_MAX_ITER, DEFAULT_R, DEFAULT_STEP_TOL, EmTrace, _points, run_em

STRATEGIES = ("known_norm", "estimated_norm")


@dataclass
class InitReport:
    strategy: str
    draws: int
    hits: int
    theoretical_lower_bound: float
    t_hat: float | None = None
    p_event: float | None = None
    p_event_source: str | None = None

    def __post_init__(self):
        if not 0 <= self.hits <= self.draws:
            raise ValueError("hits must lie in [0, draws]")

    @property
    def empirical_prob(self) -> float:
        return self.hits / self.draws

    @property
    def standard_error(self) -> float:
        p = self.empirical_prob
        return math.sqrt(max(p * (1.0 - p), 1.0 / self.draws) / self.draws)

    @property
    def vacuous(self) -> bool:
        return self.theoretical_lower_bound <= 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(
            empirical_prob=self.empirical_prob,
            standard_error=self.standard_error,
            vacuous=self.vacuous,
        )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def t_hat(data, sigma: float) -> float:
    """Moment estimate ``(1/n) sum (||Y_i||^2 - d sigma^2)`` of ``||theta_star||^2``."""
    y = _points(data)
    return float(np.mean(np.sum(y * y, axis=1)) - y.shape[1] * sigma**2)


def sample_t_hat(model: MixtureModel, n: int, size: int, seed: int) -> np.ndarray:
    """Draws of T-hat over ``size`` independent datasets of size ``n``.

    Uses that ``sum_i ||Y_i||^2 / sigma^2`` is noncentral chi-square with
    ``n d`` degrees of freedom and noncentrality ``n s^2``: each Y_i is
    ``sigma (Z_i + eta_i s u)`` and the sign eta_i is absorbed by the
    symmetric Z_i. This is exact in distribution and avoids materializing
    ``size * n * d`` normals.
    """
    if n < 1 or size < 1:
        raise ValueError("n and size must be positive")
    rng = make_rng(seed, 5)
    total = rng.noncentral_chisquare(n * model.d, n * model.snr() ** 2, size=size)
    return model.sigma**2 * (total / n - model.d)


def init_known_norm(model: MixtureModel, seed: int, size: int | None = None) -> np.ndarray:
    """Draw(s) from ``N(0, ||theta_star||^2 I_d)``."""
    rng = make_rng(seed, 4)
    shape = (model.d,) if size is None else (size, model.d)
    return model.norm * rng.standard_normal(shape)


def init_estimated_norm(
    data, sigma: float, seed: int, epsilon: float | None = None
) -> tuple[np.ndarray, float]:
    """Draw from ``N(0, (max(T-hat, 0) + epsilon) I_d)``; ``epsilon`` defaults to sigma^2 / 2."""
    eps = 0.5 * sigma**2 if epsilon is None else epsilon
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    y = _points(data)
    th = t_hat(y, sigma)
    scale = math.sqrt(max(th, 0.0) + eps)
    rng = make_rng(seed, 4)
    return scale * rng.standard_normal(y.shape[1]), th


def init_prob_lower_bound(a: float, r: float, d: int) -> float:
    """``2 Phi(-a) - P(chi^2_d > r^2)``; non-positive values are vacuous."""
    return 2.0 * kernels.std_normal_cdf(-a) - kernels.chi_square_upper_tail(d, r * r)


def init_prob_lower_bound_estimated(a: float, r: float, d: int, p_event: float) -> float:
    """``[2 Phi(-a) - P(chi^2_d > r^2 / 2)] P(E)`` for the estimated-norm initializer."""
    if not 0.0 <= p_event <= 1.0:
        raise ValueError("p_event must lie in [0, 1]")
    return (2.0 * kernels.std_normal_cdf(-a) - kernels.chi_square_upper_tail(d, r * r / 2.0)) * p_event


def t_hat_tail_bound(n: int, d: int, sigma: float, norm_theta: float, epsilon: float) -> float:
    """``2 exp(-n eps^2 / (36 d sigma^2 ||theta*||^2))`` bound on ``P(|T-hat - ||theta*||^2| > eps)``.

    Requires ``s >= 1`` and ``0 <= eps < 5 d sigma ||theta*||``.
    """
    if sigma <= 0 or norm_theta <= 0:
        raise ValueError("sigma and norm_theta must be positive")
    if norm_theta / sigma < 1.0:
        raise ValueError(f"bound requires s >= 1, got s={norm_theta / sigma:.6g}")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    cap = 5.0 * d * sigma * norm_theta
    if not epsilon < cap:
        raise ValueError(f"bound requires epsilon < 5 d sigma ||theta*|| = {cap:.6g}")
    return 2.0 * math.exp(-n * epsilon**2 / (36.0 * d * sigma**2 * norm_theta**2))


def log_likelihood(theta, data, sigma: float) -> float:
    """Average log density of the symmetric mixture at ``theta``.

    ``log(phi_theta + phi_-theta) / 2`` reduces to
    ``-||y||^2/2s^2 - ||theta||^2/2s^2 + log cosh(<y, theta>/s^2) + const``,
    and ``log cosh`` is evaluated through ``|u|`` so it is exactly even in theta.
    """
    y = _points(data)
    th = np.asarray(theta, dtype=float)
    s2 = sigma**2
    u = np.abs(y @ th) / s2
    log_cosh = u + np.log1p(np.exp(-2.0 * u)) - math.log(2.0)
    d = y.shape[1]
    return float(
        -0.5 * d * math.log(2.0 * math.pi * s2)
        - np.mean(np.sum(y * y, axis=1)) / (2.0 * s2)
        - (th @ th) / (2.0 * s2)
        + np.mean(log_cosh)
    )


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = DEFAULT_MAX_ITER
    step_tol: float = DEFAULT_STEP_TOL
    r: float = DEFAULT_R


def draw_initializer(strategy: str, data, sigma: float, model: MixtureModel, seed: int) -> np.ndarray:
    if strategy == "known_norm":
        return init_known_norm(model, seed)
    if strategy == "estimated_norm":
        return init_estimated_norm(data, sigma, seed)[0]
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def multi_start(
    data,
    sigma: float,
    m: int,
    strategy: str,
    model: MixtureModel,
    em_config: EmConfig = EmConfig(),
    seed: int = 0,
) -> tuple[EmTrace, list[EmTrace]]:
    """Run EM from ``m`` random starts and keep the most likely final iterate.

    Branch ``i`` draws its start from stream ``(seed, i)``. The winner
    maximizes the sample log-likelihood; ties go to the lowest index.
    ``model`` is needed for the known-norm start and for trace diagnostics.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    y = _points(data)
    traces = []
    for i in range(m):
        theta0 = draw_initializer(strategy, y, sigma, model, derive_seed(seed, 11, i))
        trace = run_em(theta0, data, sigma, model, em_config.max_iter, em_config.step_tol, em_config.r)
        trace.label = {"branch": i, "strategy": strategy}
        traces.append(trace)
    scores = [log_likelihood(t.final, y, sigma) for t in traces]
    best = 0
    for i, sc in enumerate(scores):
        if sc > scores[best]:
            best = i
    return traces[best], traces
