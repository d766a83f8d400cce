"""GP-based modelling and similarity testing for drug dissolution profiles.

The package fits a logistic-spline Gaussian process (logistic mean, warped
integrated-Wiener kernel, log-linear heteroskedastic noise) to cumulative
percent-dissolved curves, provides a stationary hierarchical GP baseline, and
computes the standard profile-comparison statistics: discrete and integral f2
with a full posterior, the maximum-gap delta test, multivariate-distance
similarity tests, and CRPS-based predictive evaluation.
"""

__version__ = "0.1.0"

from .dataset import (
    AverageProfile,
    DissolutionDataset,
    PooledCovariance,
    ValidityReport,
    average_profile,
    check_validity,
    load_dataset1,
    load_dataset2,
    parse_dataset,
    pooled_covariance,
    read_groups,
)
from .errors import (
    ConditioningError,
    DataError,
    DissolveGpError,
    EstimationError,
    GridMismatchError,
    InsufficientReplicationError,
    NumericalError,
    ParseError,
    ValueRangeError,
)
from .kernels import (
    CtgpHyperparams,
    GramMatrices,
    LsgpHyperparams,
    build_gram,
    dissolution_spline_kernel,
    linear_warp_kernel,
    logistic_mean,
    matern32,
    noise_variance,
    squared_exponential,
    stationary_kernel,
    wiener_kernel,
)
from .gp import (
    BasisDecomposition,
    GpPosterior,
    basis_decomposition,
    fit_posterior,
    log_marginal_likelihood,
    prior_gp,
    sample_posterior,
)
from .estimation import MapResult, PriorSpec, empirical_bayes_ab, log_prior, map_fit
from .ctgp import CtgpChain, ctgp_fit, ctgp_sample_f
from .similarity import (
    DeltaResult,
    F2Config,
    F2Posterior,
    MsdResult,
    comparison_grid,
    delta_from_paths,
    delta_test,
    f2_discrete,
    f2_from_paths,
    f2_integral_truth,
    f2_posterior,
    lsgp_msd,
    summarize_f2_samples,
    tsong_msd,
    union_grid,
)
from .scoring import CrpsReport, crps_from_samples, loo_crps
from .simulation import (
    SCENARIOS,
    SimScenario,
    StudyConfig,
    StudyResult,
    bias_sweep,
    higuchi_curve,
    logistic_curve,
    run_mc_study,
    scenario,
    simulate,
)
from .covariates import (
    CovariateDesign,
    CovariateParams,
    covariate_logistic,
    experiment_posterior,
    extrapolate_experiment,
    hyperparams_at,
    joint_fit,
    read_design_csv,
    simulate_covariate_study,
)
from .workflows import ComparisonReport, compare_datasets, curve_series, fit_series

__all__ = [name for name in dir() if not name.startswith("_")]
