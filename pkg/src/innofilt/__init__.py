"""innofilt: adaptive identification of innovations-form state-space systems.

Provides a dense reference pseudolinear-regression estimator, a fast
square-root displacement filter with O(alpha^2 n) per-step cost on triangular
input balanced architectures, sklearn-style estimator wrappers, and an
experiment harness with a CLI.
"""

from .displacement import (
    EvdGenerator,
    SignatureVector,
    dense_displacement,
    generator_fgh_oracle,
    subspace_evd_update,
)
from .estimators import LmsEstimator, PlrEstimator, SrdfEstimator
from .exceptions import (
    ConditioningError,
    ConfigError,
    FactorizationError,
    IndefiniteFactorError,
    NumericalError,
    RankOverflowError,
    StabilityError,
)
from .harness import (
    BenchReport,
    ComparisonReport,
    ExperimentConfig,
    MetricsReport,
    bench_scaling,
    compare_fast_slow,
    generate_dataset,
    identify_series,
    run_experiment,
)
from .model import (
    StateSpaceModel,
    TimeSeries,
    apply_similarity,
    coefficient_impulse_response,
    draw_invertible_coefficient,
    impulse_response,
    load_model,
    predictor_spectral_radius,
    read_time_series,
    save_model,
    simulate,
    solve_stein,
    spectral_radius,
    write_time_series,
)
from .plr import (
    DensePlrState,
    lms_step,
    plr_init,
    plr_step,
    plr_step_aposteriori,
    plr_step_direct,
)
from .srdf import (
    SrdfState,
    StepTrace,
    TriangularAdvance,
    WTransform,
    advance_from_generator,
    compute_w,
    estimated_impulse_response,
    gamma_of,
    load_state,
    rho_covariance,
    save_state,
    srdf_init_exact,
    srdf_init_tib_fast,
    srdf_step,
    srdf_step_aposteriori,
    ut_cholesky,
)
from .tib import (
    FactoredTriangular,
    RankOneUTFactor,
    TibSystem,
    gramian_series,
    load_tib,
    save_tib,
    tib_from_eigenvalues,
    ut_factor,
    verify_tib,
)

__version__ = "0.1.0"

__all__ = [
    # model layer
    "StateSpaceModel", "TimeSeries", "apply_similarity", "coefficient_impulse_response",
    "draw_invertible_coefficient", "impulse_response", "load_model",
    "predictor_spectral_radius", "read_time_series", "save_model", "simulate",
    "solve_stein", "spectral_radius", "write_time_series",
    # triangular input balanced forms
    "FactoredTriangular", "RankOneUTFactor", "TibSystem", "gramian_series",
    "load_tib", "save_tib", "tib_from_eigenvalues", "ut_factor", "verify_tib",
    # dense reference estimator
    "DensePlrState", "lms_step", "plr_init", "plr_step", "plr_step_aposteriori",
    "plr_step_direct",
    # displacement machinery
    "EvdGenerator", "SignatureVector", "dense_displacement", "generator_fgh_oracle",
    "subspace_evd_update",
    # fast filter
    "SrdfState", "StepTrace", "TriangularAdvance", "WTransform",
    "advance_from_generator", "compute_w", "estimated_impulse_response", "gamma_of",
    "load_state", "rho_covariance", "save_state", "srdf_init_exact",
    "srdf_init_tib_fast", "srdf_step", "srdf_step_aposteriori", "ut_cholesky",
    # estimator API
    "LmsEstimator", "PlrEstimator", "SrdfEstimator",
    # harness
    "BenchReport", "ComparisonReport", "ExperimentConfig", "MetricsReport",
    "bench_scaling", "compare_fast_slow", "generate_dataset", "identify_series",
    "run_experiment",
    # errors
    "ConditioningError", "ConfigError", "FactorizationError", "IndefiniteFactorError",
    "NumericalError", "RankOverflowError", "StabilityError",
]
