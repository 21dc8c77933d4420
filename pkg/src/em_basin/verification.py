"""Monte Carlo estimators for the quantities the theory bounds only abstractly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .initialization import (
    EmConfig,
    InitReport,
    STRATEGIES,
    init_known_norm,
    init_prob_lower_bound,
    init_prob_lower_bound_estimated,
    log_likelihood,
    multi_start,
    sample_t_hat,
    t_hat,
    t_hat_tail_bound,
)
from .model import MixtureModel, derive_seed, Region, in_D_tilde, make_rng, probe_points, sample_dataset
from .population import pop_em
from .quadrature import GhRule, gh_rule
from .sample import sample_em_step, sign_aligned_error


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class DeviationEstimate:
    """Probe-maximum estimate of ``sup_{D_{a,r}} ||M_n(theta) - M(theta)||``.

    ``per_seed[n]`` holds one probe maximum per seed; ``per_n_curve`` pairs
    each n with the median over seeds; ``s_hat`` is the largest value seen
    at the largest n. Probe maxima bound the true supremum from below.
    """

    region: Region
    probes: int
    seeds: list[int]
    per_seed: dict[int, list[float]]
    per_n_curve: list[tuple[int, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.per_n_curve[-1][0]

    @property
    def s_hat(self) -> float:
        return max(self.per_seed[self.n])

    def slope(self) -> float:
        ns, vals = zip(*self.per_n_curve)
        return loglog_slope(ns, vals)

    def to_dict(self) -> dict:
        return {
            "a": self.region.a,
            "r": self.region.r,
            "probes": self.probes,
            "seeds": self.seeds,
            "s_hat": self.s_hat,
            "per_n_curve": [[n, v] for n, v in self.per_n_curve],
            "slope": self.slope() if len(self.per_n_curve) > 1 else None,
        }


def estimate_sup_deviation(
    model: MixtureModel,
    region: Region,
    n: int | Sequence[int],
    probes: int = 10_000,
    n_seeds: int = 20,
    rule: GhRule | None = None,
    seed: int = 0,
    points: np.ndarray | None = None,
) -> DeviationEstimate:
    """Maximize ``||M_n(theta) - M(theta)||`` over region probes, per seed and per n.

    ``points`` overrides the probe set (e.g. ``[theta_star]`` for a
    pointwise deviation).
    """
    if points is None:
        if probes < 100:
            raise ValueError("probes must be at least 100")
        if model.d > 16:
            raise ValueError("sup-deviation scans are capped at d <= 16")
        points = probe_points(model, region, probes, seed)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    ns = sorted({int(v) for v in np.atleast_1d(n)})
    rule = gh_rule() if rule is None else rule
    population = pop_em(points, model, rule)
    seeds = [derive_seed(seed, 21, k) for k in range(n_seeds)]
    per_seed: dict[int, list[float]] = {}
    for nv in ns:
        vals = []
        for sd in seeds:
            data = sample_dataset(model, nv, derive_seed(sd, nv))
            dev = np.linalg.norm(sample_em_step(points, data, model.sigma) - population, axis=1)
            vals.append(float(dev.max()))
        per_seed[nv] = vals
    curve = [(nv, float(np.median(per_seed[nv]))) for nv in ns]
    return DeviationEstimate(region, len(points), seeds, per_seed, curve)


def empirical_region_probability(
    model: MixtureModel,
    region: Region,
    strategy: str,
    draws: int,
    seed: int,
    n: int | None = None,
) -> InitReport:
    """Fraction of initializer draws landing in D~_{a,r}, with the matching lower bound.

    For ``estimated_norm`` each draw pairs a fresh T-hat (from a dataset of
    size ``n``) with a fresh Gaussian start; P(E) in the bound is the
    empirical frequency of ``|T-hat - ||theta*||^2| < sigma^2 / 2`` over the
    same draws. When the exponential tail bound applies, its complement is
    reported as a second, purely theoretical P(E).
    """
    if draws < 1000:
        raise ValueError("draws must be at least 1e3")
    a, r, d = region.a, region.r, model.d
    if strategy == "known_norm":
        starts = init_known_norm(model, derive_seed(seed, 31), size=draws)
        hits = int(np.sum(in_D_tilde(starts, model, region)))
        return InitReport(strategy, draws, hits, init_prob_lower_bound(a, r, d))
    if strategy != "estimated_norm":
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if n is None or n < 1:
        raise ValueError("estimated_norm needs the dataset size n")
    th = sample_t_hat(model, n, draws, derive_seed(seed, 32))
    var = np.maximum(th, 0.0) + 0.5 * model.sigma**2
    rng = make_rng(derive_seed(seed, 33))
    starts = np.sqrt(var)[:, None] * rng.standard_normal((draws, d))
    hits = int(np.sum(in_D_tilde(starts, model, region)))
    p_event = float(np.mean(np.abs(th - model.norm**2) < 0.5 * model.sigma**2))
    report = InitReport(
        strategy, draws, hits, init_prob_lower_bound_estimated(a, r, d, p_event),
        t_hat=float(np.mean(th)), p_event=p_event, p_event_source="empirical",
    )
    return report


def p_event_from_tail_bound(model: MixtureModel, n: int) -> float | None:
    """``1 - t_hat_tail_bound(eps = sigma^2 / 2)`` when that bound's hypotheses hold."""
    try:
        bound = t_hat_tail_bound(n, model.d, model.sigma, model.norm, 0.5 * model.sigma**2)
    except ValueError:
        return None
    return max(0.0, 1.0 - bound)


@dataclass
class TailReport:
    empirical: float
    bound: float | None
    replicates: int
    epsilon: float
    flag: str | None = None

    @property
    def passed(self) -> bool | None:
        return None if self.bound is None else self.empirical <= self.bound

    def to_dict(self) -> dict:
        return {
            "empirical": self.empirical,
            "bound": self.bound,
            "replicates": self.replicates,
            "epsilon": self.epsilon,
            "flag": self.flag,
            "pass": self.passed,
        }


def empirical_t_hat_tail(
    model: MixtureModel, n: int, epsilon: float, replicates: int, seed: int
) -> TailReport:
    """Frequency of ``|T-hat - ||theta*||^2| > epsilon`` beside the exponential bound."""
    if replicates < 1000:
        raise ValueError("replicates must be at least 1e3")
    th = sample_t_hat(model, n, replicates, derive_seed(seed, 41))
    emp = float(np.mean(np.abs(th - model.norm**2) > epsilon))
    try:
        bound = t_hat_tail_bound(n, model.d, model.sigma, model.norm, epsilon)
        flag = None
    except ValueError as exc:
        bound, flag = None, str(exc)
    return TailReport(emp, bound, replicates, epsilon, flag)


def t_hat_replicates(model: MixtureModel, n: int, replicates: int, seed: int) -> np.ndarray:
    """T-hat over freshly generated datasets (the direct, unshortcut path)."""
    return np.array(
        [t_hat(sample_dataset(model, n, derive_seed(seed, 51, k)), model.sigma) for k in range(replicates)]
    )


def t_hat_variance(model: MixtureModel, n: int) -> float:
    """``Var T-hat = 2 sigma^2 (d sigma^2 + 2 ||theta*||^2) / n``.

    With sigma = 1 this is the familiar ``2 (d + 2 ||theta*||^2) / n``.
    """
    s2 = model.sigma**2
    return 2.0 * s2 * (model.d * s2 + 2.0 * model.norm**2) / n


def multi_start_success_curve(
    model: MixtureModel,
    n: int,
    m_grid: Sequence[int],
    meta_seeds: int,
    strategy: str = "estimated_norm",
    em_config: EmConfig = EmConfig(),
    seed: int = 0,
    threshold: float = 0.1,
) -> dict[int, float]:
    """Fraction of meta-seeds whose selected multi-start estimate is within
    ``threshold ||theta*||`` (sign-aligned), for each m in ``m_grid``.

    Branch starts depend only on ``(seed, branch)``, so one run with
    ``max(m_grid)`` branches per meta-seed yields every smaller m as a prefix.
    """
    grid = sorted({int(m) for m in m_grid})
    wins = {m: 0 for m in grid}
    for k in range(meta_seeds):
        ms = derive_seed(seed, 61, k)
        data = sample_dataset(model, n, ms)
        _, traces = multi_start(data, model.sigma, grid[-1], strategy, model, em_config, ms)
        scores = [log_likelihood(t.final, data, model.sigma) for t in traces]
        for m in grid:
            best = int(np.argmax(scores[:m]))
            if sign_aligned_error(traces[best].final, model) <= threshold * model.norm:
                wins[m] += 1
    return {m: wins[m] / meta_seeds for m in grid}


def exact_known_norm_probability(a: float, r: float) -> float:
    """Exact P(D~_{a,r}) for the known-norm start in one dimension: ``2 (Phi(r) - Phi(a))``."""
    return 2.0 * (kernels.std_normal_upper_tail(a) - kernels.std_normal_upper_tail(r))
