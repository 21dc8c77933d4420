"""EM for the symmetric two-component Gaussian mixture and numerical checks of
its basin-of-attraction guarantees."""

from .experiments import Config, ConfigError, ExperimentResult, run_experiment
from .initialization import (
    EmConfig,
    InitReport,
    init_estimated_norm,
    init_known_norm,
    init_prob_lower_bound,
    init_prob_lower_bound_estimated,
    log_likelihood,
    multi_start,
    t_hat,
    t_hat_tail_bound,
)
from .kernels import omega, omega_d1, omega_d2, omega_d3
from .model import (
    Dataset,
    MixtureModel,
    Region,
    in_ball,
    in_D,
    in_D_tilde,
    in_half_space,
    make_rng,
    probe_points,
    sample_dataset,
    sample_region_points,
)
from .population import (
    ContractionReport,
    HypothesisError,
    StabilityReport,
    contraction_scan,
    gamma_contraction,
    inner_product_stability_check,
    norm_stability_check,
    pop_em,
)
from .quadrature import GhRule, gauss_expectation, gh_rule, omega_expectation
from .sample import EmTrace, run_em, sample_em_step, sign_aligned_error
from .verification import (
    DeviationEstimate,
    empirical_region_probability,
    empirical_t_hat_tail,
    estimate_sup_deviation,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
