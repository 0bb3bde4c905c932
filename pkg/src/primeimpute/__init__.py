"""Projective-resampling kernel imputation for linear regression with missing covariates."""

__version__ = "0.1.0"

from .core import (
    AvailabilityPattern,
    FitResult,
    ImputationDiagnostics,
    KernelSpec,
    MaskedDataset,
    ProjectionSpec,
    Scaling,
    load_csv,
    pattern_of,
    standardize,
    write_csv,
)
from .errors import (
    EstimatorError,
    InsufficientRowsError,
    PrimeError,
    ShootingConvergenceError,
    SingularDesignError,
    UnimputableCellError,
    ValidationError,
)
from .estimators import (
    PenaltySpec,
    SparsityReport,
    fit_cc,
    fit_full_ols,
    fit_prime,
    fit_sprime,
    kkt_check,
    lasso_shooting,
)
from .imputation import ImputeConfig, build_z, donor_set, impute_cell
from .projection import DirectionCache, DirectionSet, log_geo_kernel, sample_directions

__all__ = [
    "AvailabilityPattern", "DirectionCache", "DirectionSet", "EstimatorError", "FitResult",
    "ImputationDiagnostics", "ImputeConfig", "InsufficientRowsError", "KernelSpec", "MaskedDataset",
    "PenaltySpec", "PrimeError", "ProjectionSpec", "Scaling", "ShootingConvergenceError",
    "SingularDesignError", "SparsityReport", "UnimputableCellError", "ValidationError", "build_z",
    "donor_set", "fit_cc", "fit_full_ols", "fit_prime", "fit_sprime", "impute_cell", "kkt_check",
    "lasso_shooting", "load_csv", "log_geo_kernel", "pattern_of", "sample_directions", "standardize",
    "write_csv",
]
