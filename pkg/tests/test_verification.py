import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from em_basin import kernels
from em_basin.initialization import EmConfig
from em_basin.model import MixtureModel, Region
from em_basin.verification import (
    empirical_region_probability,
    empirical_t_hat_tail,
    estimate_sup_deviation,
    exact_known_norm_probability,
    loglog_slope,
    multi_start_success_curve,
    p_event_from_tail_bound,
)


def test_loglog_slope():
    n = np.array([10.0, 100.0, 1000.0])
    assert_allclose(loglog_slope(n, 3 * n**-0.5), -0.5, rtol=1e-12)


def test_pointwise_deviation_cap():
    model = MixtureModel.from_snr(4, 5.0)
    n = 10_000
    est = estimate_sup_deviation(model, Region(0.5, 6.0), n, n_seeds=20, seed=1, points=model.theta_star[None, :])
    cap = 6 * model.norm * math.sqrt((1 + 1 / 25) * 4 / n)
    assert est.probes == 1
    assert 0 <= est.s_hat <= cap


def test_sup_deviation_curve_shrinks():
    model = MixtureModel.from_snr(4, 5.0)
    est = estimate_sup_deviation(model, Region(0.5, 6.0), [100, 1000, 10_000], probes=200, n_seeds=8, seed=2)
    medians = [v for _, v in est.per_n_curve]
    assert [n for n, _ in est.per_n_curve] == [100, 1000, 10_000]
    assert medians[0] > medians[1] > medians[2]
    assert abs(est.slope() + 0.5) <= 0.15
    assert est.to_dict()["s_hat"] == est.s_hat


def test_sup_deviation_monotone_in_probe_superset():
    model = MixtureModel.from_snr(3, 4.0)
    region = Region(0.5, 4.0)
    small = estimate_sup_deviation(model, region, 500, probes=150, n_seeds=3, seed=5)
    large = estimate_sup_deviation(model, region, 500, probes=600, n_seeds=3, seed=5)
    for a, b in zip(small.per_seed[500], large.per_seed[500]):
        assert b >= a


def test_sup_deviation_preconditions():
    model = MixtureModel.from_snr(20, 4.0)
    with pytest.raises(ValueError):
        estimate_sup_deviation(model, Region(0.5, 4.0), 100, probes=200, n_seeds=1)
    with pytest.raises(ValueError):
        estimate_sup_deviation(MixtureModel.from_snr(2, 4.0), Region(0.5, 4.0), 100, probes=50, n_seeds=1)


def test_region_probability_wide_region():
    d = 4
    model = MixtureModel.from_snr(d, 10.0)
    region = Region(0.01, 10 * math.sqrt(d))
    rep = empirical_region_probability(model, region, "known_norm", 100_000, seed=3)
    exact = 2 * kernels.std_normal_cdf(-0.01) - kernels.chi_square_upper_tail(d, region.r**2)
    assert_allclose(rep.theoretical_lower_bound, 0.992, atol=1e-3)
    assert abs(rep.empirical_prob - exact) <= 3 * rep.standard_error
    assert rep.empirical_prob >= rep.theoretical_lower_bound - 3 * rep.standard_error


def test_region_probability_one_dimension_exact():
    model = MixtureModel.from_snr(1, 3.0)
    rep = empirical_region_probability(model, Region(0.5, 3.0), "known_norm", 100_000, seed=4)
    exact = exact_known_norm_probability(0.5, 3.0)
    assert abs(rep.empirical_prob - exact) <= 3 * rep.standard_error


def test_region_probability_estimated_norm():
    model = MixtureModel.from_snr(4, 10.0)
    region = Region(0.5, 2 * math.sqrt(8))
    rep = empirical_region_probability(model, region, "estimated_norm", 20_000, seed=5, n=10_000)
    assert rep.p_event_source == "empirical" and 0.9 <= rep.p_event <= 1.0
    assert rep.empirical_prob >= rep.theoretical_lower_bound - 3 * rep.standard_error
    assert p_event_from_tail_bound(model, 10_000) is not None
    with pytest.raises(ValueError):
        empirical_region_probability(model, region, "estimated_norm", 2000, seed=5)
    with pytest.raises(ValueError):
        empirical_region_probability(model, region, "known_norm", 10, seed=5)


def test_t_hat_tail_edge_cases():
    model = MixtureModel.from_snr(4, 2.0)
    huge = empirical_t_hat_tail(model, 10_000, 5 * 4 * 2.0 + 1.0, 1000, seed=1)
    assert huge.bound is None and huge.flag and huge.empirical == 0.0 and huge.passed is None
    zero = empirical_t_hat_tail(model, 10_000, 0.0, 1000, seed=1)
    assert zero.empirical == 1.0 and zero.bound == 2.0


def test_t_hat_tail_standard_grid():
    model = MixtureModel.from_snr(4, 2.0)
    rep = empirical_t_hat_tail(model, 10_000, 0.5, 100_000, seed=2)
    assert rep.passed
    assert_allclose(rep.bound, 2 * math.exp(-10_000 * 0.25 / (36 * 4 * 4)), rtol=1e-14)


def test_multi_start_curve_is_prefix_consistent():
    model = MixtureModel.from_snr(4, 3.0)
    curve = multi_start_success_curve(model, 2000, [1, 2, 4], 10, "known_norm", EmConfig(max_iter=200), seed=3)
    assert list(curve) == [1, 2, 4]
    assert all(0.0 <= v <= 1.0 for v in curve.values())
