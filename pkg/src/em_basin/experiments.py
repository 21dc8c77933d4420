"""Experiment configs and the pipeline that turns each one into CSV/JSON artifacts.

Every experiment is a pure function of its config: seeds are derived from
``seed`` through fixed sub-keys, parallel work is mapped in order, and floats
are written with ``repr``. ``runtime_seconds`` is ``null`` unless
``record_runtime`` is set, since a wall-clock value would break byte-identity.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import integrate

from . import kernels
from .initialization import EmConfig, draw_initializer, multi_start
from .model import MixtureModel, Region, derive_seed, sample_dataset, sample_region_points
from .population import (
    HypothesisError,
    contraction_scan,
    in_radius_window,
    inner_product_stability_check,
    normal_difference_identity_check,
    norm_stability_check,
)
from .quadrature import MAX_ORDER, gauss_expectation, gh_rule, omega_expectation
from .sample import run_em
from .verification import (
    empirical_region_probability,
    empirical_t_hat_tail,
    estimate_sup_deviation,
    loglog_slope,
    multi_start_success_curve,
    t_hat_replicates,
    t_hat_variance,
)

EXPERIMENTS = (
    "converge",
    "contraction",
    "stability",
    "init-prob",
    "concentration",
    "deviation",
    "kernels-selftest",
    "sweep",
)

INIT_CHOICES = ("region", "known_norm", "estimated_norm")

DEFAULTS: dict[str, Any] = {
    "d": 4,
    "s": 10.0,
    "sigma": 1.0,
    "a": 0.5,
    "r": 6.0,
    "kappa1": 0.75,
    "kappa2": 0.75,
    "n": 10_000,
    "n_grid": [100, 1000, 10_000, 100_000],
    "probes": 10_000,
    "seeds": 20,
    "m": 1,
    "m_grid": [1, 3, 10],
    "epsilon": 0.5,
    "delta": 0.05,
    "quadrature_order": 61,
    "out_dir": "runs",
    "seed": 0,
    "draws": 100_000,
    "replicates": 100_000,
    "moment_replicates": 4000,
    "max_iter": 500,
    "step_tol": 1e-10,
    "init": "region",
    "threads": 1,
    "format": "csv",
    "record_runtime": False,
}

# Per-experiment overrides of DEFAULTS; None for r in init-prob means 2 sqrt(2d).
EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "converge": {},
    "contraction": {"d": 2, "s": 100.0},
    "stability": {"d": 2, "s": 120.0},
    "init-prob": {"r": None},
    "concentration": {"s": 2.0},
    "deviation": {"s": 5.0},
    "kernels-selftest": {},
    "sweep": {"init": "estimated_norm", "seeds": 200},
}

HELP: dict[str, str] = {
    "d": "dimension",
    "s": "signal-to-noise ratio ||theta*|| / sigma",
    "sigma": "noise standard deviation",
    "a": "half-space parameter of D_{a,r}",
    "r": "ball radius of D_{a,r} in units of ||theta*||",
    "kappa1": "inner-product stability constant",
    "kappa2": "norm stability constant",
    "n": "sample size",
    "n_grid": "sample sizes for the deviation curve",
    "probes": "probe points per region scan",
    "seeds": "independent seeded replicates",
    "m": "random starts per EM run",
    "m_grid": "start counts for the multi-start sweep",
    "epsilon": "T-hat tail threshold",
    "delta": "failure probability used in deviation bound shapes",
    "quadrature_order": "Gauss-Hermite order",
    "out_dir": "artifact directory",
    "seed": "master seed (64-bit)",
    "draws": "initializer draws for region probabilities",
    "replicates": "T-hat replicates for the tail estimate",
    "moment_replicates": "direct datasets for T-hat mean and variance",
    "max_iter": "EM iteration cap",
    "step_tol": "EM stop when ||step|| <= step_tol ||theta*||",
    "init": "EM start: region draw from D_{a,r} or a random initializer",
    "threads": "worker threads (results do not depend on it)",
    "format": "trace/table output format",
    "record_runtime": "write wall-clock runtime into summary.json (default off keeps reruns byte-identical)",
}


class ConfigError(ValueError):
    """Invalid configuration; ``keys`` names the offending entries."""

    def __init__(self, problems: dict[str, str]):
        self.problems = dict(problems)
        self.keys = sorted(problems)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(problems.items()))
        super().__init__(f"invalid config ({detail})")


def defaults_for(experiment: str) -> dict[str, Any]:
    out = dict(DEFAULTS)
    out.update(EXPERIMENT_DEFAULTS.get(experiment, {}))
    return out


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (_is_int(v) or isinstance(v, (float, np.floating))) and math.isfinite(float(v))


def _int_list(v) -> bool:
    return isinstance(v, (list, tuple)) and len(v) > 0 and all(_is_int(x) and x >= 1 for x in v)


_CHECKS: dict[str, tuple[Callable[[Any], bool], str]] = {
    "d": (lambda v: _is_int(v) and 1 <= v <= 4096, "integer in [1, 4096]"),
    "s": (lambda v: _is_real(v) and v > 0, "positive real"),
    "sigma": (lambda v: _is_real(v) and v > 0, "positive real"),
    "a": (lambda v: _is_real(v) and 0 < v < 1, "must lie in (0, 1)"),
    "r": (lambda v: v is None or (_is_real(v) and v >= 1), "must satisfy r >= 1"),
    "kappa1": (lambda v: _is_real(v) and 0 < v < 1, "must lie in (0, 1)"),
    "kappa2": (lambda v: _is_real(v) and 0 < v < 1, "must lie in (0, 1)"),
    "n": (lambda v: _is_int(v) and v >= 1, "positive integer"),
    "n_grid": (_int_list, "non-empty list of positive integers"),
    "probes": (lambda v: _is_int(v) and v >= 100, "integer >= 100"),
    "seeds": (lambda v: _is_int(v) and v >= 1, "positive integer"),
    "m": (lambda v: _is_int(v) and v >= 1, "positive integer"),
    "m_grid": (_int_list, "non-empty list of positive integers"),
    "epsilon": (lambda v: _is_real(v) and v >= 0, "non-negative real"),
    "delta": (lambda v: _is_real(v) and 0 < v < 1, "must lie in (0, 1)"),
    "quadrature_order": (lambda v: _is_int(v) and 1 <= v <= MAX_ORDER, f"integer in [1, {MAX_ORDER}]"),
    "out_dir": (lambda v: isinstance(v, str) and v != "", "non-empty path"),
    "seed": (lambda v: _is_int(v) and 0 <= v < 2**64, "integer in [0, 2^64)"),
    "draws": (lambda v: _is_int(v) and v >= 1000, "integer >= 1000"),
    "replicates": (lambda v: _is_int(v) and v >= 1000, "integer >= 1000"),
    "moment_replicates": (lambda v: _is_int(v) and v >= 10, "integer >= 10"),
    "max_iter": (lambda v: _is_int(v) and v >= 1, "positive integer"),
    "step_tol": (lambda v: _is_real(v) and v >= 0, "non-negative real"),
    "init": (lambda v: v in INIT_CHOICES, f"one of {', '.join(INIT_CHOICES)}"),
    "threads": (lambda v: _is_int(v) and v >= 1, "positive integer"),
    "format": (lambda v: v in ("csv", "json"), "csv or json"),
    "record_runtime": (lambda v: isinstance(v, bool), "boolean"),
}


@dataclass(frozen=True)
class Config:
    experiment: str
    values: dict[str, Any]

    def __getitem__(self, key: str):
        return self.values[key]

    @classmethod
    def build(cls, raw: dict[str, Any]) -> "Config":
        """Fill defaults for ``raw["experiment"]`` and validate every key."""
        problems: dict[str, str] = {}
        raw = dict(raw)
        experiment = raw.pop("experiment", None)
        if experiment not in EXPERIMENTS:
            problems["experiment"] = f"one of {', '.join(EXPERIMENTS)}"
            raise ConfigError(problems)
        values = defaults_for(experiment)
        for key, val in raw.items():
            if key not in values:
                problems[key] = "unknown key"
            elif val is not None:
                values[key] = val
        for key, (ok, why) in _CHECKS.items():
            if key not in problems and not ok(values[key]):
                problems[key] = f"{why}, got {values[key]!r}"
        if experiment == "init-prob" and values["r"] is None:
            values["r"] = 2.0 * math.sqrt(2.0 * values["d"])
        elif values["r"] is None:
            problems.setdefault("r", "required")
        if experiment == "deviation" and "n_grid" not in problems and len(set(values["n_grid"])) < 2:
            problems["n_grid"] = "needs at least two distinct sizes"
        if experiment in ("contraction", "deviation") and "d" not in problems and values["d"] > 16:
            problems["d"] = "region scans are capped at d <= 16"
        if problems:
            raise ConfigError(problems)
        for key in ("n_grid", "m_grid"):
            values[key] = sorted({int(v) for v in values[key]})
        for key in ("s", "sigma", "a", "r", "kappa1", "kappa2", "epsilon", "delta", "step_tol"):
            values[key] = float(values[key])
        return cls(experiment, values)

    def model(self) -> MixtureModel:
        return MixtureModel.from_snr(self["d"], self["s"], self["sigma"])

    def region(self) -> Region:
        return Region(self["a"], self["r"])

    def to_dict(self) -> dict[str, Any]:
        return {"experiment": self.experiment, **self.values}


@dataclass
class Assertion:
    name: str
    observed: float | None
    bound: float | None
    passed: bool | None

    def to_dict(self) -> dict:
        return {"name": self.name, "observed": self.observed, "bound": self.bound, "pass": self.passed}

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]
        obs = "-" if self.observed is None else f"{self.observed:.6g}"
        bnd = "-" if self.bound is None else f"{self.bound:.6g}"
        return f"{status} {self.name}: observed={obs} bound={bnd}"


@dataclass
class ExperimentResult:
    config: Config
    assertions: list[Assertion]
    artifacts: list[str] = field(default_factory=list)
    runtime_seconds: float | None = None

    @property
    def passed(self) -> bool:
        """All asserted checks hold; skipped (``None``) ones do not count."""
        return all(a.passed is not False for a in self.assertions)

    def summary(self) -> dict:
        return {
            "experiment": self.config.experiment,
            "params": self.config.to_dict(),
            "assertions": [a.to_dict() for a in self.assertions],
            "artifacts": self.artifacts,
            "runtime_seconds": self.runtime_seconds,
        }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable, allow_nan=True) + "\n"


class _Writer:
    def __init__(self, out_dir: Path, fmt: str):
        self.out_dir = out_dir
        self.fmt = fmt
        self.written: list[str] = []

    def table(self, name: str, columns: list[str], rows: list[list]) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if self.fmt == "json":
            records = [dict(zip(columns, row)) for row in rows]
            path = self.out_dir / f"{name}.json"
            path.write_text(_dumps(records))
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
            path = self.out_dir / f"{name}.csv"
            path.write_text(buf.getvalue())
        self.written.append(path.name)


def _map(fn, items, threads: int) -> list:
    """Ordered map; results do not depend on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _theta_columns(d: int, prefix: str = "theta") -> list[str]:
    return [f"{prefix}_{j + 1}" for j in range(d)]


# -- experiments ------------------------------------------------------------------


def noise_floor_ratios(errors: np.ndarray, floor: float) -> np.ndarray:
    """Per-step ratios ``e[k+1] / e[k]`` restricted to steps with ``e[k+1] > floor``."""
    e = np.asarray(errors, dtype=float)
    keep = e[1:] > floor
    return e[1:][keep] / e[:-1][keep]


def _start(cfg: Config, model, region, data, seed: int) -> np.ndarray:
    if cfg["init"] == "region":
        return sample_region_points(model, region, 1, seed, mode="uniform-rejection")[0]
    return draw_initializer(cfg["init"], data, model.sigma, model, seed)


def _exp_converge(cfg: Config, out: _Writer) -> list[Assertion]:
    model, region = cfg.model(), cfg.region()
    em_cfg = EmConfig(cfg["max_iter"], cfg["step_tol"], cfg["r"])
    rate = math.sqrt(model.d / cfg["n"]) * model.norm

    def one(k):
        data_seed = cfg["seed"] if k == 0 else derive_seed(cfg["seed"], 71, k)
        data = sample_dataset(model, cfg["n"], data_seed)
        if cfg["m"] > 1:
            best, _ = multi_start(data, model.sigma, cfg["m"], cfg["init"] if cfg["init"] != "region" else "estimated_norm", model, em_cfg, data_seed)
            return data_seed, best
        theta0 = _start(cfg, model, region, data, derive_seed(data_seed, 72))
        return data_seed, run_em(theta0, data, model.sigma, model, em_cfg.max_iter, em_cfg.step_tol, em_cfg.r)

    runs = _map(one, range(cfg["seeds"]), cfg["threads"])
    gamma = runs[0][1].gamma_theoretical
    first = runs[0][1]
    if cfg["format"] == "json":
        (out.out_dir).mkdir(parents=True, exist_ok=True)
        first.to_json(out.out_dir / "trace.json")
        out.written.append("trace.json")
    else:
        out.out_dir.mkdir(parents=True, exist_ok=True)
        first.to_csv(out.out_dir / "trace.csv")
        out.written.append("trace.csv")

    rows, max_ratio, all_in, consts = [], 0.0, True, []
    for k, (data_seed, tr) in enumerate(runs):
        ratios = noise_floor_ratios(tr.errors, 2.0 * tr.final_error)
        mr = float(ratios.max()) if len(ratios) else None
        if mr is not None:
            max_ratio = max(max_ratio, mr)
        inside = bool(np.all(tr.in_region))
        all_in &= inside
        c = tr.final_error / rate
        consts.append(c)
        rows.append([k, data_seed, tr.steps, tr.stop_reason, tr.final_error, mr, int(inside), c])
    out.table(
        "runs",
        ["replicate", "data_seed", "steps", "stop_reason", "final_error", "max_ratio_above_floor", "all_in_region", "rate_constant"],
        rows,
    )
    c_med = float(np.median(consts))
    converged = all(tr.stop_reason == "step_tol" for _, tr in runs)
    return [
        Assertion("ratio_below_gamma_plus_0.05", max_ratio, gamma + 0.05, max_ratio <= gamma + 0.05),
        Assertion("iterates_in_D_tilde", float(all_in), 1.0, all_in),
        Assertion("median_rate_constant", c_med, 10.0, c_med <= 10.0),
        Assertion("converged", float(converged), 1.0, converged),
    ]


def _exp_contraction(cfg: Config, out: _Writer) -> list[Assertion]:
    model, region = cfg.model(), cfg.region()
    if region.a != 0.5:
        raise ConfigError({"a": "contraction is stated for a = 0.5"})
    rep = contraction_scan(model, region, cfg["probes"], gh_rule(cfg["quadrature_order"]), cfg["seed"])
    out.table(
        "contraction",
        ["a", "r", "s", "d", "gamma", "max_ratio", "probes", "order", "max_excess", "pass"],
        [[region.a, region.r, model.snr(), model.d, rep.gamma_theoretical, rep.max_observed_ratio,
          rep.probes, rep.quadrature_order, rep.max_excess, rep.passed]],
    )
    return [Assertion("contraction_ratio", rep.max_observed_ratio, rep.gamma_theoretical, rep.passed)]


def _exp_stability(cfg: Config, out: _Writer) -> list[Assertion]:
    model, region = cfg.model(), cfg.region()
    rule = gh_rule(cfg["quadrature_order"])
    try:
        inner = inner_product_stability_check(model, region, cfg["kappa1"], cfg["probes"], rule, cfg["seed"])
        norm = norm_stability_check(model, region, cfg["kappa2"], cfg["probes"], rule, cfg["seed"])
    except HypothesisError as exc:
        raise ConfigError({"r": str(exc)}) from exc
    window = in_radius_window(model.snr(), region.r)
    rows = [
        [rep.name, rep.observed, rep.bound, rep.margin, rep.passed, *rep.extreme_theta]
        for rep in (inner, norm)
    ]
    out.table("stability", ["check", "observed", "bound", "margin", "pass", *_theta_columns(model.d)], rows)
    return [
        Assertion("inner_product_floor", inner.observed, inner.bound, inner.passed),
        Assertion("norm_cap", norm.observed, norm.bound, norm.passed),
        Assertion("radius_window", float(window), 1.0, window),
    ]


def _exp_init_prob(cfg: Config, out: _Writer) -> list[Assertion]:
    model, region = cfg.model(), cfg.region()
    reports = [
        empirical_region_probability(model, region, "known_norm", cfg["draws"], cfg["seed"]),
        empirical_region_probability(model, region, "estimated_norm", cfg["draws"], cfg["seed"], n=cfg["n"]),
    ]
    rows, checks = [], []
    for rep in reports:
        floor = rep.theoretical_lower_bound - 3.0 * rep.standard_error
        ok = rep.empirical_prob >= floor
        rows.append([
            rep.strategy, model.d, region.a, region.r, rep.draws, rep.hits, rep.empirical_prob,
            rep.standard_error, rep.theoretical_lower_bound, rep.p_event, rep.vacuous, ok,
        ])
        checks.append(Assertion(f"{rep.strategy}_probability", rep.empirical_prob, floor, ok))
    out.table(
        "init_prob",
        ["strategy", "d", "a", "r", "draws", "hits", "empirical", "standard_error", "bound", "p_event", "vacuous", "pass"],
        rows,
    )
    return checks


def _exp_concentration(cfg: Config, out: _Writer) -> list[Assertion]:
    model, n = cfg.model(), cfg["n"]
    direct = t_hat_replicates(model, n, cfg["moment_replicates"], cfg["seed"])
    target = model.norm**2
    se = float(np.std(direct, ddof=1) / math.sqrt(len(direct)))
    bias = abs(float(np.mean(direct)) - target)
    var_ratio = float(np.var(direct, ddof=1)) / t_hat_variance(model, n)
    tail = empirical_t_hat_tail(model, n, cfg["epsilon"], cfg["replicates"], cfg["seed"])
    checks = [
        Assertion("t_hat_unbiased", bias, 5.0 * se, bias <= 5.0 * se),
        Assertion("t_hat_variance_rel_error", abs(var_ratio - 1.0), 0.1, abs(var_ratio - 1.0) <= 0.1),
        Assertion("t_hat_tail", tail.empirical, tail.bound, tail.passed),
    ]
    rows = [[c.name, c.observed, c.bound, c.passed] for c in checks]
    rows.append(["t_hat_mean", float(np.mean(direct)), target, None])
    rows.append(["t_hat_variance", float(np.var(direct, ddof=1)), t_hat_variance(model, n), None])
    out.table("concentration", ["quantity", "observed", "reference", "pass"], rows)
    if tail.flag:
        out.table("concentration_flags", ["flag"], [[tail.flag]])
    return checks


def deviation_shape(model: MixtureModel, r: float, n: int, delta: float) -> float:
    """``r ||theta*|| sqrt(||theta*||^2 + sigma^2) sqrt(d log(1/delta) / n)``: the c4 = 1 deviation scale."""
    nrm = model.norm
    return r * nrm * math.sqrt(nrm**2 + model.sigma**2) * math.sqrt(model.d * math.log(1.0 / delta) / n)


def _exp_deviation(cfg: Config, out: _Writer) -> list[Assertion]:
    model, region = cfg.model(), cfg.region()
    rule = gh_rule(cfg["quadrature_order"])
    grid = cfg["n_grid"]

    def per_n(nv):
        sup = estimate_sup_deviation(model, region, nv, cfg["probes"], cfg["seeds"], rule, cfg["seed"])
        pw = estimate_sup_deviation(
            model, region, nv, 1, cfg["seeds"], rule, cfg["seed"], points=model.theta_star[None, :]
        )
        return sup, pw

    results = _map(per_n, grid, cfg["threads"])
    rows = []
    sup_curve, pw_curve = [], []
    for nv, (sup, pw) in zip(grid, results):
        shape = deviation_shape(model, region.r, nv, cfg["delta"])
        for k, (v_sup, v_pw) in enumerate(zip(sup.per_seed[nv], pw.per_seed[nv])):
            rows.append([nv, k, sup.seeds[k], v_sup, v_pw, shape])
        sup_curve.append(sup.per_n_curve[0][1])
        pw_curve.append(pw.per_n_curve[0][1])
    out.table("deviation", ["n", "replicate", "seed", "sup_deviation", "pointwise_deviation", "bound_shape"], rows)
    sup_slope, pw_slope = loglog_slope(grid, sup_curve), loglog_slope(grid, pw_curve)
    c4_fit = max(row[3] / row[5] for row in rows)
    out.table(
        "deviation_curve",
        ["n", "median_sup", "median_pointwise", "bound_shape"],
        [[nv, a, b, deviation_shape(model, region.r, nv, cfg["delta"])] for nv, a, b in zip(grid, sup_curve, pw_curve)],
    )
    decreasing = all(b < a for a, b in zip(sup_curve, sup_curve[1:]))
    return [
        Assertion("sup_slope", sup_slope, -0.5, abs(sup_slope + 0.5) <= 0.15),
        Assertion("pointwise_slope", pw_slope, -0.5, abs(pw_slope + 0.5) <= 0.15),
        Assertion("sup_decreasing_in_n", float(decreasing), 1.0, decreasing),
        Assertion("fitted_c4", c4_fit, None, None),
    ]


def kernel_selftest(order: int = 61) -> list[Assertion]:
    """Invariant suite for the scalar kernels and the quadrature layer."""
    checks = []
    t = np.linspace(-10.0, 10.0, 2001)
    h = 1e-4
    fd = [
        ("omega_d1_identity", kernels.omega_d1(t), 2 * kernels.omega(t) * (1 - kernels.omega(t))),
        ("omega_d2_identity", kernels.omega_d2(t), 2 * kernels.omega_d1(t) * (1 - 2 * kernels.omega(t))),
        (
            "omega_d3_identity",
            kernels.omega_d3(t),
            4 * kernels.omega_d1(t) * (1 - 6 * kernels.omega(t) + 6 * kernels.omega(t) ** 2),
        ),
        ("omega_d1_finite_difference", kernels.omega_d1(t), (kernels.omega(t + h) - kernels.omega(t - h)) / (2 * h)),
        ("omega_d2_finite_difference", kernels.omega_d2(t), (kernels.omega_d1(t + h) - kernels.omega_d1(t - h)) / (2 * h)),
        ("omega_d3_finite_difference", kernels.omega_d3(t), (kernels.omega_d2(t + h) - kernels.omega_d2(t - h)) / (2 * h)),
    ]
    for name, lhs, rhs in fd:
        err = float(np.max(np.abs(lhs - rhs)))
        checks.append(Assertion(name, err, 1e-6, err <= 1e-6))
    w1 = kernels.omega_d1(t)
    r2 = float(np.max(np.abs(kernels.omega_d2(t)) - 2 * w1))
    r3 = float(np.max(np.abs(kernels.omega_d3(t)) - 4 * w1))
    checks.append(Assertion("omega_d2_dominated", r2, 0.0, r2 <= 0.0))
    checks.append(Assertion("omega_d3_dominated", r3, 0.0, r3 <= 0.0))

    tt = np.linspace(0.0, 12.0, 1201)
    gap = float(np.max(kernels.std_normal_upper_tail(tt) - kernels.normal_tail_bound(tt)))
    checks.append(Assertion("normal_tail_bound", gap, 0.0, gap <= 0.0))
    worst = -np.inf
    for d in range(1, 65):
        r = math.sqrt(d) * np.linspace(1.0, 4.0, 61)
        worst = max(worst, float(np.max(kernels.chi_square_upper_tail(d, r * r) - kernels.chi_square_chernoff_bound(d, r))))
    checks.append(Assertion("chernoff_dominates_chi_square", worst, 0.0, worst <= 0.0))

    rule = gh_rule(order)
    err_oracle = 0.0
    for alpha in (0.1, 0.5, 1.0, 3.0, 10.0):
        for beta in (-5.0, -1.0, 0.0, 1.0, 5.0):
            ours = gauss_expectation(kernels.omega, alpha, beta, rule)
            ref = _omega_oracle(alpha, beta)
            err_oracle = max(err_oracle, abs(ours - ref))
    checks.append(Assertion("quadrature_vs_adaptive", err_oracle, 1e-10, err_oracle <= 1e-10))
    a_grid, b_grid = np.meshgrid([0.1, 0.5, 1.0, 3.0, 10.0], [-5.0, -1.0, 0.0, 1.0, 5.0])
    e61 = omega_expectation(a_grid, b_grid, gh_rule(61))
    e121 = omega_expectation(a_grid, b_grid, gh_rule(121))
    err_order = float(np.max(np.abs(e61 - e121)))
    checks.append(Assertion("order_61_vs_121", err_order, 1e-10, err_order <= 1e-10))

    rng = np.random.default_rng(12345)
    worst_id = 0.0
    for mu0, mu1, s0, s1 in zip(rng.uniform(-3, 3, 10), rng.uniform(-3, 3, 10), rng.uniform(0.2, 3, 10), rng.uniform(0.2, 3, 10)):
        worst_id = max(worst_id, normal_difference_identity_check(mu0, s0, mu1, s1, rule)[2])
    checks.append(Assertion("interpolation_identity", worst_id, 1e-9, worst_id <= 1e-9))
    return checks


def _omega_oracle(alpha: float, beta: float) -> float:
    """Adaptive integration of ``E w(alpha Z + beta)`` over the argument."""

    def dens(x):
        z = (x - beta) / alpha
        return kernels.omega(x) * math.exp(-0.5 * z * z) / (alpha * math.sqrt(2 * math.pi))

    lo, hi = beta - 40 * alpha, beta + 40 * alpha
    brk = sorted({min(max(p, lo), hi) for p in (beta - 8 * alpha, beta, beta + 8 * alpha, 0.0)})
    val, _ = integrate.quad(dens, lo, hi, points=brk, epsabs=1e-14, epsrel=1e-13, limit=500)
    return val


def _exp_selftest(cfg: Config, out: _Writer) -> list[Assertion]:
    checks = kernel_selftest(cfg["quadrature_order"])
    out.table("selftest", ["name", "observed", "bound", "pass"], [[c.name, c.observed, c.bound, c.passed] for c in checks])
    return checks


def _exp_sweep(cfg: Config, out: _Writer) -> list[Assertion]:
    model = cfg.model()
    strategy = "estimated_norm" if cfg["init"] == "region" else cfg["init"]
    em_cfg = EmConfig(cfg["max_iter"], cfg["step_tol"], cfg["r"])
    curve = multi_start_success_curve(
        model, cfg["n"], cfg["m_grid"], cfg["seeds"], strategy, em_cfg, cfg["seed"]
    )
    grid = cfg["m_grid"]
    q = curve[grid[0]] if grid[0] == 1 else None
    rows = [[m, curve[m], None if q is None else 1.0 - (1.0 - q) ** m] for m in grid]
    out.table("sweep", ["m", "success_fraction", "single_start_prediction"], rows)
    values = [curve[m] for m in grid]
    monotone = all(b >= a for a, b in zip(values, values[1:]))
    return [Assertion("success_non_decreasing_in_m", float(monotone), 1.0, monotone)]


_RUNNERS = {
    "converge": _exp_converge,
    "contraction": _exp_contraction,
    "stability": _exp_stability,
    "init-prob": _exp_init_prob,
    "concentration": _exp_concentration,
    "deviation": _exp_deviation,
    "kernels-selftest": _exp_selftest,
    "sweep": _exp_sweep,
}


def run_experiment(config: Config | dict) -> ExperimentResult:
    """Run one experiment, write its tables plus ``summary.json``, and return the checks."""
    cfg = config if isinstance(config, Config) else Config.build(config)
    out = _Writer(Path(cfg["out_dir"]), cfg["format"])
    start = time.perf_counter()
    assertions = _RUNNERS[cfg.experiment](cfg, out)
    runtime = time.perf_counter() - start if cfg["record_runtime"] else None
    result = ExperimentResult(cfg, assertions, sorted(out.written) + ["summary.json"], runtime)
    out.out_dir.mkdir(parents=True, exist_ok=True)
    (out.out_dir / "summary.json").write_text(_dumps(result.summary()))
    return result
