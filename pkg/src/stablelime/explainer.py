"""One local-surrogate explanation call.

Pipeline: draw perturbations from the training-set normals, predict
them with the black box, weight each point by an RBF kernel centered on
the reference, pick the strongest features, and fit a weighted linear
(optionally ridge) surrogate. The surrogate's coefficients, standard
errors and weighted R-squared form the explanation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import FeatureStats, TabularDataset, compute_stats, standardize, standardize_matrix, stats_from_matrix
from .predictors import CachingPredictor, Predictor
from .validation import (
    as_float_matrix,
    as_float_vector,
    check_length,
    check_non_negative,
    check_positive,
    check_positive_int,
)

__all__ = [
    "LimeConfig",
    "Explanation",
    "LimeExplainer",
    "sample_points",
    "kernel_weight",
    "kernel_weights",
    "fit_weighted_linear",
    "weighted_r_squared",
    "select_features",
    "explain",
]


@dataclass(frozen=True)
class LimeConfig:
    """Settings for a single explanation call.

    num_features=None selects every feature. The sample count must
    leave the weighted least squares solvable after selection.
    """

    kernel_width: float
    num_samples: int = 5000
    num_features: Optional[int] = None
    ridge: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_positive(self.kernel_width, "kernel_width")
        check_positive_int(self.num_samples, "num_samples")
        check_non_negative(self.ridge, "ridge")
        if self.num_features is not None:
            check_positive_int(self.num_features, "num_features")

    def resolve_num_features(self, n_features: int) -> int:
        k = n_features if self.num_features is None else self.num_features
        if k > n_features:
            raise ValueError(f"num_features={k} exceeds feature count {n_features}")
        if self.num_samples < n_features + 2:
            raise ValueError(
                f"num_samples={self.num_samples} too small for {n_features} features"
            )
        return k

    def with_seed(self, seed: int) -> "LimeConfig":
        return replace(self, seed=int(seed))

    def with_kernel_width(self, kw: float) -> "LimeConfig":
        return replace(self, kernel_width=float(kw))


@dataclass(frozen=True)
class Explanation:
    """Fitted local surrogate around one reference point.

    Coefficients and standard errors are keyed by feature name and
    ordered by selection rank (largest standardized effect first).
    ``r_squared`` is the weighted R-squared of the surrogate, clamped
    to [0, 1]; ``r_squared_clipped`` records whether the clamp fired.
    """

    reference: tuple[float, ...]
    intercept: float
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    selected_features: tuple[str, ...]
    r_squared: float
    kernel_width: float
    seed: int
    r_squared_clipped: bool = False

    def __post_init__(self):
        if tuple(self.coefficients) != self.selected_features:
            raise ValueError("coefficients must be keyed by selected_features, in order")
        if tuple(self.std_errors) != self.selected_features:
            raise ValueError("std_errors must be keyed by selected_features, in order")
        if len(set(self.selected_features)) != len(self.selected_features):
            raise ValueError("selected_features must be distinct")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError(f"r_squared outside [0, 1]: {self.r_squared}")

    def to_dict(self) -> dict:
        return {
            "schema": "stablelime/explanation/v1",
            "reference": [float(v) for v in self.reference],
            "kernel_width": float(self.kernel_width),
            "seed": int(self.seed),
            "r_squared": float(self.r_squared),
            "r_squared_clipped": bool(self.r_squared_clipped),
            "intercept": float(self.intercept),
            "features": [
                {
                    "feature": name,
                    "coefficient": float(self.coefficients[name]),
                    "std_error": float(self.std_errors[name]),
                }
                for name in self.selected_features
            ],
        }


def sample_points(stats: FeatureStats, n: int, seed: int) -> np.ndarray:
    """Draw n rows, feature k ~ Normal(mean_k, std_k), deterministic per seed."""
    check_positive_int(n, "n")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, stats.n_features))
    return stats.mean + noise * stats.std_dev


def kernel_weight(point, reference, stats: FeatureStats, kernel_width: float) -> float:
    """RBF weight exp(-D^2 / kw^2) for one point.

    D is the Euclidean distance between the standardized point and the
    standardized reference, so the width has the same meaning whatever
    the raw feature scales.
    """
    w = kernel_weights(as_float_vector(point, "point").reshape(1, -1), reference, stats, kernel_width)
    return float(w[0])


def kernel_weights(X, reference, stats: FeatureStats, kernel_width: float) -> np.ndarray:
    """Vectorized RBF weights for an (n, d) matrix of points."""
    check_positive(kernel_width, "kernel_width")
    reference = as_float_vector(reference, "reference")
    check_length(reference, stats.n_features, "reference")
    Z = standardize_matrix(X, stats)
    z_ref = standardize(reference, stats)
    sq_dist = np.sum((Z - z_ref) ** 2, axis=1)
    return np.exp(-sq_dist / kernel_width**2)


def fit_weighted_linear(X, y, weights, ridge: float = 0.0):
    """Weighted least squares with optional ridge penalty on the slopes.

    Minimizes sum_i w_i (y_i - a - x_i'b)^2 + ridge * ||b||^2; the
    intercept is never penalized. Solved through a scaled augmented
    design and numpy's SVD lstsq, not the normal equations.

    Args:
        X: (n, k) design without intercept column.
        y: n responses.
        weights: n non-negative weights, at least k+1 strictly positive.
        ridge: penalty strength, 0 for plain weighted least squares.

    Returns:
        (intercept, coefficients, std_errors): coefficient standard
        errors come from the weighted least-squares covariance when
        ridge is 0 and from the ridge sandwich form otherwise.

    Raises:
        ValueError: rank-deficient design, all-zero weights, or too
        few rows.
    """
    X = as_float_matrix(X, "X")
    y = as_float_vector(y, "y")
    weights = as_float_vector(weights, "weights")
    ridge = check_non_negative(ridge, "ridge")
    n, k = X.shape
    check_length(y, n, "y")
    check_length(weights, n, "weights")
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    positive = int(np.sum(weights > 0))
    if positive == 0:
        raise ValueError("all weights are zero")
    if positive < k + 1:
        raise ValueError(f"need at least {k + 1} strictly positive weights, got {positive}")
    if n < k + 2:
        raise ValueError(f"need at least {k + 2} rows for {k} features, got {n}")

    sqrt_w = np.sqrt(weights)
    design = np.hstack([np.ones((n, 1)), X])
    scaled = design * sqrt_w[:, None]
    rhs = y * sqrt_w
    if ridge > 0:
        penalty = np.sqrt(ridge) * np.eye(k + 1)[1:]  # rows for slopes only
        scaled = np.vstack([scaled, penalty])
        rhs = np.concatenate([rhs, np.zeros(k)])
    theta, _, rank, _ = np.linalg.lstsq(scaled, rhs, rcond=None)
    if rank < k + 1:
        raise ValueError("weighted design matrix is rank deficient")

    residuals = y - design @ theta
    dof = n - (k + 1)
    sigma2 = float(weights @ residuals**2) / dof
    xtwx = design.T @ (design * weights[:, None])
    if ridge > 0:
        m_inv = np.linalg.inv(xtwx + ridge * np.diag([0.0] + [1.0] * k))
        covariance = sigma2 * m_inv @ xtwx @ m_inv
    else:
        covariance = sigma2 * np.linalg.inv(xtwx)
    std_errors = np.sqrt(np.clip(np.diag(covariance)[1:], 0.0, None))
    return float(theta[0]), theta[1:], std_errors


def weighted_r_squared(y, y_hat, weights, clip: bool = True) -> float:
    """Weighted coefficient of determination.

    1 - sum w (y - y_hat)^2 / sum w (y - wmean(y))^2. With clip=True
    (the reporting convention) negative raw values collapse to 0.

    Raises:
        ValueError: non-positive total weight or zero weighted variance
        of y.
    """
    y = as_float_vector(y, "y")
    y_hat = as_float_vector(y_hat, "y_hat")
    weights = as_float_vector(weights, "weights")
    check_length(y_hat, len(y), "y_hat")
    check_length(weights, len(y), "weights")
    total = float(np.sum(weights))
    if total <= 0:
        raise ValueError("weights must sum to a positive value")
    y_bar = float(weights @ y) / total
    ss_tot = float(weights @ (y - y_bar) ** 2)
    if ss_tot == 0:
        raise ValueError("weighted variance of y is zero; r_squared undefined")
    ss_res = float(weights @ (y - y_hat) ** 2)
    raw = 1.0 - ss_res / ss_tot
    if clip:
        return float(min(max(raw, 0.0), 1.0))
    return raw


def select_features(X, y, weights, num_features: int) -> np.ndarray:
    """Rank features by their standardized full-model coefficients.

    Fits the full weighted linear model on column-standardized features
    and keeps the num_features largest absolute coefficients, ordered
    by magnitude descending with index as the deterministic tie-break.
    """
    X = as_float_matrix(X, "X")
    check_positive_int(num_features, "num_features")
    if num_features > X.shape[1]:
        raise ValueError(f"num_features={num_features} exceeds {X.shape[1]} features")
    stats = stats_from_matrix(X)
    Z = standardize_matrix(X, stats)
    _, coef, _ = fit_weighted_linear(Z, y, weights, ridge=0.0)
    magnitude = np.abs(coef)
    order = np.lexsort((np.arange(len(coef)), -magnitude))
    return order[:num_features]


def explain(
    predictor: Predictor,
    stats: FeatureStats,
    reference,
    config: LimeConfig,
) -> Explanation:
    """Run one full explanation call; deterministic given config.seed.

    The surrogate is fitted on training-standardized features, where
    the kernel width already lives, so the ridge penalty competes with
    the kernel mass on a scale-free footing; the fitted intercept,
    coefficients and standard errors are mapped back to raw feature
    units (an exact reparameterization when ridge is 0).

    Raises:
        ValueError: non-finite black-box predictions, or any fitting
        failure propagated from the weighted least squares.
    """
    reference = as_float_vector(reference, "reference")
    check_length(reference, stats.n_features, "reference")
    k = config.resolve_num_features(stats.n_features)

    cached = CachingPredictor(predictor)
    X = sample_points(stats, config.num_samples, config.seed)
    y = np.asarray(cached.predict(X), dtype=np.float64)
    if not np.all(np.isfinite(y)):
        bad = int(np.sum(~np.isfinite(y)))
        raise ValueError(f"black box returned {bad} non-finite predictions")

    weights = kernel_weights(X, reference, stats, config.kernel_width)
    selected = select_features(X, y, weights, k)

    Z = standardize_matrix(X[:, selected], _subset(stats, selected))
    intercept_z, coef_z, std_err_z = fit_weighted_linear(Z, y, weights, ridge=config.ridge)
    y_hat = intercept_z + Z @ coef_z
    raw_r2 = weighted_r_squared(y, y_hat, weights, clip=False)

    scale = stats.std_dev[selected]
    center = stats.mean[selected]
    safe = np.where(scale > 0, scale, 1.0)
    coef = coef_z / safe
    std_err = std_err_z / safe
    intercept = intercept_z - float(np.sum(coef * center))

    names = tuple(stats.feature_names[i] for i in selected)
    return Explanation(
        reference=tuple(float(v) for v in reference),
        intercept=float(intercept),
        coefficients={name: float(c) for name, c in zip(names, coef)},
        std_errors={name: float(s) for name, s in zip(names, std_err)},
        selected_features=names,
        r_squared=float(min(max(raw_r2, 0.0), 1.0)),
        kernel_width=float(config.kernel_width),
        seed=int(config.seed),
        r_squared_clipped=bool(raw_r2 < 0.0),
    )


def _subset(stats: FeatureStats, indices) -> FeatureStats:
    return FeatureStats(
        tuple(stats.feature_names[i] for i in indices),
        stats.mean[indices],
        stats.std_dev[indices],
    )


class LimeExplainer(BaseEstimator):
    """Estimator-style front end: fit on training data, then explain.

    fit(X) learns the per-feature sampling statistics; explain() runs
    the surrogate pipeline around a reference point. Hyperparameters
    follow scikit-learn conventions (get_params/set_params/clone).

    Parameters
    ----------
    kernel_width : float or None
        RBF width on standardized distances. None defers to the
        conventional 0.75 * sqrt(n_features) at explain time.
    num_samples : int
        Perturbations drawn per explanation call.
    num_features : int or None
        Features kept by selection; None keeps all.
    ridge : float
        Ridge penalty on surrogate slopes; 0 (the default) fits plain
        weighted least squares.
    seed : int
        Base seed; explain() may override per call.
    """

    def __init__(
        self,
        kernel_width: Optional[float] = None,
        num_samples: int = 5000,
        num_features: Optional[int] = None,
        ridge: float = 0.0,
        seed: int = 0,
    ):
        self.kernel_width = kernel_width
        self.num_samples = num_samples
        self.num_features = num_features
        self.ridge = ridge
        self.seed = seed

    def fit(self, X, y=None):
        """Learn per-feature mean/std from a matrix or TabularDataset."""
        if isinstance(X, TabularDataset):
            self.stats_ = compute_stats(X)
        else:
            self.stats_ = stats_from_matrix(X)
        self.n_features_in_ = self.stats_.n_features
        self.feature_names_in_ = self.stats_.feature_names
        return self

    def _check_fitted(self) -> FeatureStats:
        if not hasattr(self, "stats_"):
            raise NotFittedError("LimeExplainer is not fitted yet; call fit(X) first")
        return self.stats_

    def config(self, kernel_width: Optional[float] = None, seed: Optional[int] = None) -> LimeConfig:
        """Resolve hyperparameters (plus optional overrides) into a LimeConfig."""
        stats = self._check_fitted()
        kw = kernel_width if kernel_width is not None else self.kernel_width
        if kw is None:
            kw = 0.75 * np.sqrt(stats.n_features)
        return LimeConfig(
            kernel_width=float(kw),
            num_samples=self.num_samples,
            num_features=self.num_features,
            ridge=self.ridge,
            seed=self.seed if seed is None else int(seed),
        )

    def explain(
        self,
        predictor: Predictor,
        reference,
        kernel_width: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> Explanation:
        """Explain the predictor at one reference point."""
        stats = self._check_fitted()
        return explain(predictor, stats, reference, self.config(kernel_width, seed))
