"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from em_basin import kernels
from em_basin.cli import main
from em_basin.experiments import Config, noise_floor_ratios, run_experiment
from em_basin.initialization import EmConfig
from em_basin.model import MixtureModel, Region, probe_points
from em_basin.population import (
    contraction_scan,
    gamma_contraction,
    in_radius_window,
    inner_product_stability_check,
    lemma_omega_lower_bound,
    normal_difference_identity_check,
    norm_stability_check,
    pop_em,
)
from em_basin.quadrature import gauss_expectation, gh_rule
from em_basin.verification import (
    empirical_region_probability,
    estimate_sup_deviation,
    loglog_slope,
    multi_start_success_curve,
)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def simpson_expectation(f, alpha, beta, panels=1_000_000, width=40.0):
    z = np.linspace(-width, width, 2 * panels + 1)
    vals = f(alpha * z + beta) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    h = 2 * width / (2 * panels)
    return h / 3 * (vals[0] + vals[-1] + 4 * vals[1:-1:2].sum() + 2 * vals[2:-1:2].sum())


def test_criterion_01_kernel_identities(record_criterion):
    with Timer() as clock:
        t = np.arange(-10.0, 10.0 + 1e-9, 0.1)
        h = 1e-5
        w, w1, w2, w3 = (kernels.omega(t), kernels.omega_d1(t), kernels.omega_d2(t), kernels.omega_d3(t))
        errors = [
            np.abs(w1 - 2 * w * (1 - w)).max(),
            np.abs(w2 - 2 * w1 * (1 - 2 * w)).max(),
            np.abs(w3 - 4 * w1 * (1 - 6 * w + 6 * w * w)).max(),
            np.abs(w1 - (kernels.omega(t + h) - kernels.omega(t - h)) / (2 * h)).max(),
            np.abs(w2 - (kernels.omega_d1(t + h) - kernels.omega_d1(t - h)) / (2 * h)).max(),
            np.abs(w3 - (kernels.omega_d2(t + h) - kernels.omega_d2(t - h)) / (2 * h)).max(),
        ]
        dominated = bool(np.all(np.abs(w2) <= 2 * w1) and np.all(np.abs(w3) <= 4 * w1))
    worst = float(max(errors))
    ok = worst <= 1e-6 and dominated and clock.seconds < 1.0
    record_criterion(1, "kernel identities", ok, f"max err {worst:.2e} <= 1e-06, dominations {dominated}, {clock.seconds:.2f}s < 1s")
    assert ok


def test_criterion_02_tail_dominations(record_criterion):
    with Timer() as clock:
        t = np.linspace(0.0, 40.0, 4001)
        normal_ok = bool(np.all(kernels.std_normal_upper_tail(t) <= kernels.normal_tail_bound(t)))
        worst_ratio = 0.0
        chi_ok = True
        for d in range(1, 65):
            r = np.sqrt(d * np.linspace(1.0, 6.0, 101))
            tail = kernels.chi_square_upper_tail(d, r * r)
            bound = kernels.chi_square_chernoff_bound(d, r)
            chi_ok &= bool(np.all(bound >= tail))
            worst_ratio = max(worst_ratio, float(np.max(tail / bound)))
    ok = normal_ok and chi_ok and clock.seconds < 1.0
    record_criterion(2, "tail dominations", ok, f"normal {normal_ok}, chi-square {chi_ok} (max tail/bound {worst_ratio:.3f}), {clock.seconds:.2f}s < 1s")
    assert ok


def test_criterion_03_quadrature_oracle(record_criterion):
    alphas = [0.1, 0.5, 2.0, 10.0, 50.0]
    betas = [-20.0, -2.0, 0.0, 1.5, 30.0]
    with Timer() as clock:
        worst_oracle = 0.0
        worst_order = 0.0
        r61, r121 = gh_rule(61), gh_rule(121)
        for a in alphas:
            for b in betas:
                ours = gauss_expectation(kernels.omega, a, b, r61)
                worst_oracle = max(worst_oracle, abs(ours - simpson_expectation(kernels.omega, a, b)))
                worst_order = max(worst_order, abs(ours - gauss_expectation(kernels.omega, a, b, r121)))
    ok = worst_oracle <= 1e-10 and worst_order <= 1e-10 and clock.seconds < 5.0
    record_criterion(3, "quadrature oracle agreement", ok, f"vs Simpson {worst_oracle:.2e}, 61 vs 121 {worst_order:.2e} (<= 1e-10), {clock.seconds:.2f}s < 5s")
    assert ok


def test_criterion_04_sigmoid_lemmas(record_criterion):
    with Timer() as clock:
        alphas = np.linspace(0.0, 50.0, 251)
        betas = np.concatenate([[0.0], np.geomspace(1e-3, 100.0, 40)])
        vals = gauss_expectation(kernels.omega, alphas[None, :], betas[:, None])
        monotone_gap = float(np.max(np.diff(vals, axis=1)))
        floor_gap = float(np.max(0.5 - vals))

        lower_gap = -np.inf
        for q_frac in (0.0, 0.25, 0.5, 1.0):
            q = q_frac * betas[:, None]
            a = alphas[None, 1:]
            lower = kernels.sigmoid_expectation_lower_bound(kernels.omega, a, betas[:, None], q)
            lower_gap = max(lower_gap, float(np.max(lower - vals[:, 1:])))

        region_gap = -np.inf
        for d, s, r in [(2, 10.0, 6.0), (4, 30.0, 6.0), (8, 60.0, 3.0)]:
            model = MixtureModel.from_snr(d, s)
            pts = probe_points(model, Region(0.5, r), 1000, 0)
            mu = pts @ model.theta_star / model.sigma**2
            tau = np.linalg.norm(pts, axis=1) / model.sigma
            region_gap = max(region_gap, float(np.max(lemma_omega_lower_bound(0.5, s, r) - gauss_expectation(kernels.omega, tau, mu))))

        cap_gap = -np.inf
        for sig in (0.2, 0.7, 1.0, 3.0, 10.0):
            mu = np.linspace(-2 * sig**2, 2 * sig**2, 81)
            e1 = gauss_expectation(kernels.omega_d1, sig, mu)
            cap_gap = max(cap_gap, float(np.max(e1 - kernels.omega_d1_expectation_cap(mu, sig))))
    gaps = {"monotone": monotone_gap, "floor": floor_gap, "lower bound": lower_gap, "region floor": region_gap, "d1 cap": cap_gap}
    ok = all(g <= 1e-9 for g in gaps.values()) and clock.seconds < 10.0
    detail = ", ".join(f"{k} gap {v:.1e}" for k, v in gaps.items())
    record_criterion(4, "sigmoid lemmas", ok, f"{detail} (<= 1e-9), {clock.seconds:.2f}s < 10s")
    assert ok


def test_criterion_05_interpolation_identity(record_criterion):
    rng = np.random.default_rng(20240607)
    with Timer() as clock:
        tuples = [tuple(row) for row in np.column_stack([
            rng.uniform(-5, 5, 10), rng.uniform(0.1, 5, 10), rng.uniform(-5, 5, 10), rng.uniform(0.1, 5, 10),
        ])]
        tuples.append((0.7, 1.3, 0.7, 1.3))  # identical endpoints: both sides vanish
        tuples.append((-0.4, 0.3, -0.4, 2.9))  # variance-only change
        gaps = [normal_difference_identity_check(*tup)[2] for tup in tuples]
    worst = max(gaps)
    ok = worst <= 1e-9 and clock.seconds < 5.0
    record_criterion(5, "normal interpolation identity", ok, f"max |lhs - rhs| {worst:.2e} <= 1e-09 over {len(tuples)} cases, {clock.seconds:.2f}s < 5s")
    assert ok


def test_criterion_06_fixed_point_symmetry(record_criterion):
    with Timer() as clock:
        worst_fixed, worst_odd = 0.0, 0.0
        rng = np.random.default_rng(6)
        for d in (1, 2, 8, 16):
            for s in (1.0, 2.0, 5.0, 10.0, 20.0):
                model = MixtureModel.from_snr(d, s)
                fixed = pop_em(model.theta_star, model)
                worst_fixed = max(worst_fixed, float(np.linalg.norm(fixed - model.theta_star) / model.norm))
                theta = rng.normal(size=(20, d)) * model.norm * rng.uniform(0.1, 3, size=(20, 1))
                worst_odd = max(worst_odd, float(np.max(np.abs(pop_em(-theta, model) + pop_em(theta, model)))))
    ok = worst_fixed <= 1e-8 and worst_odd <= 1e-12 and clock.seconds < 5.0
    record_criterion(6, "population fixed point and symmetry", ok, f"fixed {worst_fixed:.1e} <= 1e-8, odd {worst_odd:.1e} <= 1e-12, {clock.seconds:.2f}s < 5s")
    assert ok


def test_criterion_07_contraction(record_criterion):
    with Timer() as clock:
        reports = [
            contraction_scan(MixtureModel.from_snr(2, 100.0), Region(0.5, 6.0), probes=10_000, seed=7),
            contraction_scan(MixtureModel.from_snr(8, 200.0), Region(0.5, 6.0), probes=10_000, seed=7),
        ]
    ok = all(rep.passed for rep in reports) and clock.seconds < 60.0
    for rep in reports:
        assert rep.gamma_theoretical == gamma_contraction(rep.snr, 6.0)
    detail = "; ".join(
        f"s={rep.snr:g} d={rep.d}: max ratio {rep.max_observed_ratio:.2e} vs gamma {rep.gamma_theoretical:.2e}, excess {rep.max_excess:.1e}"
        for rep in reports
    )
    record_criterion(7, "population contraction", ok, f"{detail}, {clock.seconds:.1f}s < 60s")
    assert ok


def test_criterion_08_stability(record_criterion):
    kappa = 0.75
    cases = [(2, 120.0, 6.0), (8, 200.0, 8.0)]
    with Timer() as clock:
        results = []
        for d, s, r in cases:
            assert in_radius_window(s, r) and r >= 4 / kappa
            model, region = MixtureModel.from_snr(d, s), Region(0.5, r)
            inner = inner_product_stability_check(model, region, kappa, probes=10_000, seed=8)
            norm = norm_stability_check(model, region, kappa, probes=10_000, seed=8)
            results.append((d, s, r, inner, norm))
    ok = all(i.passed and n.passed for *_, i, n in results) and clock.seconds < 60.0
    detail = "; ".join(
        f"(s={s:g}, r={r:g}) min <M,theta*> {i.observed:.4g} >= {i.bound:.4g}, max ||M|| {n.observed:.4g} <= {n.bound:.4g}"
        for d, s, r, i, n in results
    )
    record_criterion(8, "stability lemmas", ok, f"{detail}, {clock.seconds:.1f}s < 60s")
    assert ok


@pytest.mark.slow
def test_criterion_09_sample_consistency(record_criterion):
    model = MixtureModel.from_snr(4, 5.0)
    region = Region(0.5, 6.0)
    grid = [100, 1000, 10_000, 100_000]
    with Timer() as clock:
        sup = estimate_sup_deviation(model, region, grid, probes=1000, n_seeds=20, seed=9)
        point = estimate_sup_deviation(model, region, grid, n_seeds=20, seed=9, points=model.theta_star[None, :])
    sup_slope, point_slope = sup.slope(), point.slope()
    ok = abs(sup_slope + 0.5) <= 0.15 and abs(point_slope + 0.5) <= 0.15 and clock.seconds < 300.0
    record_criterion(9, "sample-operator consistency", ok, f"sup slope {sup_slope:.3f}, pointwise slope {point_slope:.3f} (target -0.5 +- 0.15), {clock.seconds:.1f}s < 300s")
    assert ok


def test_criterion_10_error_envelope(record_criterion, tmp_path):
    cfg = Config.build({
        "experiment": "converge", "d": 4, "s": 10.0, "n": 10_000, "r": 6.0, "a": 0.5,
        "seeds": 20, "seed": 10, "init": "region", "out_dir": str(tmp_path),
    })
    with Timer() as clock:
        result = run_experiment(cfg)
    checks = {a.name: a for a in result.assertions}
    runs = (tmp_path / "runs.csv").read_text().splitlines()[1:]
    start_in_region = (tmp_path / "trace.csv").read_text().splitlines()[1].endswith(",1")
    ratio = checks["ratio_below_gamma_plus_0.05"]
    const = checks["median_rate_constant"]
    region_ok = checks["iterates_in_D_tilde"].passed
    ok = ratio.passed and region_ok and const.passed and len(runs) == 20 and start_in_region and clock.seconds < 120.0
    record_criterion(
        10, "iterate error envelope", ok,
        f"max ratio above floor {ratio.observed:.3g} <= gamma + 0.05 = {ratio.bound:.3g}, in D~ {region_ok}, "
        f"median C {const.observed:.3f} <= 10, {clock.seconds:.1f}s < 120s",
    )
    assert ok


def test_criterion_11_initialization_bounds(record_criterion):
    s, n, draws = 10.0, 10_000, 100_000
    rows = []
    with Timer() as clock:
        for d in (2, 4, 8):
            model = MixtureModel.from_snr(d, s)
            region = Region(0.5, 2 * math.sqrt(2 * d))
            for strategy in ("known_norm", "estimated_norm"):
                rep = empirical_region_probability(model, region, strategy, draws, seed=11 + d, n=n)
                floor = rep.theoretical_lower_bound - 3 * rep.standard_error
                rows.append((d, strategy, rep.empirical_prob, rep.theoretical_lower_bound, rep.empirical_prob >= floor))
    ok = all(r[-1] for r in rows) and clock.seconds < 120.0
    detail = "; ".join(f"d={d} {st}: {p:.4f} vs {b:.4f}" for d, st, p, b, _ in rows)
    record_criterion(11, "initialization probability bounds", ok, f"{detail}, {clock.seconds:.1f}s < 120s")
    assert ok


def test_criterion_12_t_hat_statistics(record_criterion, tmp_path):
    cfg = Config.build({
        "experiment": "concentration", "n": 10_000, "d": 4, "sigma": 1.0, "s": 2.0, "epsilon": 0.5,
        "replicates": 100_000, "moment_replicates": 4000, "seed": 12, "out_dir": str(tmp_path),
    })
    with Timer() as clock:
        result = run_experiment(cfg)
    checks = {a.name: a for a in result.assertions}
    ok = all(a.passed for a in result.assertions) and clock.seconds < 120.0
    record_criterion(
        12, "T-hat statistics", ok,
        f"|bias| {checks['t_hat_unbiased'].observed:.2e} <= 5 SE {checks['t_hat_unbiased'].bound:.2e}, "
        f"variance rel err {checks['t_hat_variance_rel_error'].observed:.3f} <= 0.1, "
        f"tail {checks['t_hat_tail'].observed:.2e} <= {checks['t_hat_tail'].bound:.4f}, {clock.seconds:.1f}s < 120s",
    )
    assert ok


def test_criterion_13_multi_start(record_criterion):
    model = MixtureModel.from_snr(4, 10.0)
    meta = 200
    with Timer() as clock:
        curve = multi_start_success_curve(model, 10_000, [1, 3, 10], meta, "estimated_norm", EmConfig(), seed=13)
    values = [curve[m] for m in (1, 3, 10)]
    monotone = all(b >= a for a, b in zip(values, values[1:]))
    q = curve[1]
    consistent = all(
        curve[m] >= 1 - (1 - q) ** m - 3 * math.sqrt(max(q * (1 - q), 1 / meta) / meta) for m in (3, 10)
    )
    ok = monotone and consistent and clock.seconds < 300.0
    record_criterion(13, "multi-start success", ok, f"success {dict(curve)}, non-decreasing {monotone}, vs 1-(1-q)^m {consistent}, {clock.seconds:.1f}s < 300s")
    assert ok


SMALL_BUDGETS = {
    "converge": ["--seeds", "5"],
    "contraction": ["--probes", "1000"],
    "stability": ["--probes", "1000"],
    "init-prob": ["--draws", "10000"],
    "concentration": ["--replicates", "10000", "--moment-replicates", "500"],
    "deviation": ["--probes", "200", "--seeds", "5"],
    "kernels-selftest": [],
    "sweep": ["--seeds", "10"],
}


def test_criterion_14_reproducibility(record_criterion, tmp_path):
    def snapshot(path):
        return {p.name: p.read_bytes() for p in sorted(path.iterdir())}

    identical, codes = {}, {}
    for name, extra in SMALL_BUDGETS.items():
        outs = []
        out = tmp_path / name
        for _ in range(2):
            codes.setdefault(name, []).append(main([name, *extra, "--seed", "14", "--quiet", "--out", str(out)]))
            outs.append(snapshot(out))
        identical[name] = outs[0] == outs[1] and len(outs[0]) >= 2
    failing = main(["stability", "--s", "100", "--probes", "200", "--quiet", "--out", str(tmp_path / "fail")])
    invalid = main(["contraction", "--r", "0.5"])
    unknown = main(["no-such-experiment"])
    summary = json.loads((tmp_path / "kernels-selftest" / "summary.json").read_text())
    ok = (
        all(identical.values())
        and all(c == [0, 0] for c in codes.values())
        and failing == 1 and invalid == 2 and unknown == 2
        and summary["params"]["seed"] == 14
    )
    record_criterion(
        14, "reproducibility and exit codes", ok,
        f"byte-identical {sum(identical.values())}/{len(identical)}, exit codes ok {all(c == [0, 0] for c in codes.values())}, "
        f"fail->{failing}, invalid->{invalid}, unknown->{unknown}",
    )
    assert ok
