"""Local surrogate explanations with stability diagnostics and
automatic kernel-width tuning for tabular black-box models."""

from .data import FeatureStats, TabularDataset, compute_stats, load_csv, standardize, write_csv
from .explainer import (
    Explanation,
    LimeConfig,
    LimeExplainer,
    explain,
    fit_weighted_linear,
    kernel_weight,
    sample_points,
    select_features,
    weighted_r_squared,
)
from .predictors import (
    ExternalPredictor,
    PolynomialRegressor,
    Predictor,
    ProtocolError,
    fit_polynomial,
)
from .search import (
    KernelWidthSearch,
    OptimizationResult,
    SearchConfig,
    folded_loss,
    optimize_kernel_width,
)
from .stability import (
    StabilityConfig,
    StabilityReport,
    csi,
    evaluate_stability,
    run_repeated,
    stability_report,
    vsi,
)
from .trend import KernelWidthScan, LogisticFit, fit_logistic, scan

__version__ = "0.1.0"

__all__ = [
    "TabularDataset",
    "FeatureStats",
    "load_csv",
    "write_csv",
    "compute_stats",
    "standardize",
    "Predictor",
    "PolynomialRegressor",
    "ExternalPredictor",
    "ProtocolError",
    "fit_polynomial",
    "LimeConfig",
    "Explanation",
    "LimeExplainer",
    "explain",
    "sample_points",
    "kernel_weight",
    "fit_weighted_linear",
    "weighted_r_squared",
    "select_features",
    "StabilityConfig",
    "StabilityReport",
    "run_repeated",
    "vsi",
    "csi",
    "stability_report",
    "evaluate_stability",
    "KernelWidthScan",
    "LogisticFit",
    "scan",
    "fit_logistic",
    "SearchConfig",
    "OptimizationResult",
    "folded_loss",
    "optimize_kernel_width",
    "KernelWidthSearch",
    "__version__",
]
