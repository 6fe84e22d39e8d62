"""mismix: Gaussian-mixture mean estimation under a misspecified noise scale.

Equal-weight isotropic mixtures fitted with an assumed component scale tau
that need not match the true sigma.  The package covers the population
picture (mismatched likelihood, its hard-assignment small-tau limit, the
collapse-stability threshold in rho = tau/sigma), exact closed forms for the
symmetric two-component model, Bayes clustering error with geometry-only
bounds, finite-sample EM/Lloyd estimators (compiled kernels with a numpy
fallback), and deterministic sweep tooling behind the `mismix` CLI.
"""

__version__ = "0.1.0"

from .clustering import BoundPair, ErrorEstimate, bayes_classify, bayes_error_mc, error_bounds
from .estimators import EmConfig, FitResult, em_fit, empirical_objective, lloyd_fit
from .k2 import (
    K2Model,
    bayes_error_k2,
    erf,
    erfc,
    erfcx,
    ha_mse_asymptote,
    ha_mse_k2,
    ha_target_k2,
)
from .model import (
    GeometrySummary,
    LabeledSample,
    MeanConfig,
    MixtureModel,
    geometry,
    normalized_mse,
    perm_distance,
    perm_distance_bruteforce,
    rng_for,
    sample_gmm,
)
from .population import (
    CollapseReport,
    FitSpec,
    HessianBlocks,
    ObjectiveValue,
    PopulationFit,
    collapse_report,
    fit_hard_assignment,
    fit_quasi_mle,
    hard_assignment_target,
    hessian_at_origin,
    make_regular_simplex,
    population_kmeans_risk,
    population_nll,
    quasi_mle,
    rtau_remainder,
    trace_to_csv,
)

__all__ = [
    "__version__",
    "MeanConfig", "MixtureModel", "LabeledSample", "GeometrySummary",
    "sample_gmm", "geometry", "perm_distance", "perm_distance_bruteforce",
    "normalized_mse", "rng_for",
    "FitSpec", "ObjectiveValue", "HessianBlocks", "CollapseReport", "PopulationFit",
    "population_nll", "population_kmeans_risk", "rtau_remainder",
    "quasi_mle", "fit_quasi_mle", "hard_assignment_target", "fit_hard_assignment",
    "hessian_at_origin", "collapse_report", "make_regular_simplex", "trace_to_csv",
    "EmConfig", "FitResult", "em_fit", "lloyd_fit", "empirical_objective",
    "ErrorEstimate", "BoundPair", "bayes_classify", "bayes_error_mc", "error_bounds",
    "K2Model", "erf", "erfc", "erfcx", "ha_target_k2", "ha_mse_k2",
    "ha_mse_asymptote", "bayes_error_k2",
]
