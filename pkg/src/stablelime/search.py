"""Kernel-width search: fold the adherence curve, then maximize it.

The folded loss turns "largest width with adherence still at the
target" into a global maximization problem: below the target the loss
is the adherence itself, above it the curve is mirrored back down, so
the peak sits exactly where adherence meets the target. Because each
evaluation reruns the sampling step, the objective is noisy; a
Gaussian-process surrogate with a fitted noise term and expected
improvement drives the search.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm, qmc
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning, NotFittedError
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel, WhiteKernel

from .data import FeatureStats, TabularDataset, compute_stats, stats_from_matrix
from .explainer import Explanation, LimeConfig, explain
from .predictors import Predictor
from .stability import StabilityConfig, StabilityReport, evaluate_stability
from .validation import check_positive_int

__all__ = [
    "SearchConfig",
    "OptimizationResult",
    "folded_loss",
    "optimize_kernel_width",
    "KernelWidthSearch",
]

_DEGENERATE_SPREAD = 1e-9  # losses flatter than this carry no signal


def folded_loss(r_squared: float, target: float) -> float:
    """Fold the adherence value at the target.

    Returns r_squared itself below the target and the mirror
    2*target - r_squared above it; both branches agree at the target,
    which is the global maximum of the folded curve.
    """
    if r_squared <= target:
        return float(r_squared)
    return float(2.0 * target - r_squared)


def default_kw_bounds(n_features: int) -> tuple[float, float]:
    """Search bounds (0.05, 3*sqrt(d)).

    The floor keeps the effective neighbourhood from emptying out (all
    weights ~ 0); the ceiling sits at 4x the conventional default
    width 0.75*sqrt(d).
    """
    return 0.05, 3.0 * math.sqrt(n_features)


@dataclass(frozen=True)
class SearchConfig:
    """Bayesian-search settings for the kernel-width optimization."""

    target_adherence: float = 0.9
    preliminary_calls: int = 10
    refinement_iterations: int = 30
    kw_bounds: Optional[tuple[float, float]] = None
    stability_repetitions: int = 10
    confidence_level: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.target_adherence < 1.0:
            raise ValueError("target_adherence must lie in (0, 1)")
        check_positive_int(self.preliminary_calls, "preliminary_calls")
        check_positive_int(self.refinement_iterations, "refinement_iterations")
        if self.kw_bounds is not None:
            low, high = self.kw_bounds
            if not (0 < low < high):
                raise ValueError("kw_bounds must satisfy 0 < low < high")

    def resolve_bounds(self, n_features: int) -> tuple[float, float]:
        return self.kw_bounds if self.kw_bounds is not None else default_kw_bounds(n_features)


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of the kernel-width search.

    trace holds every objective evaluation in order (preliminary then
    refinement); best_loss is the trace maximum, never a re-evaluated
    substitute. degenerate marks an all-identical-loss trace, in which
    case best_kw falls back to the midpoint of the bounds.
    """

    best_kw: float
    best_loss: float
    achieved_r_squared: float
    explanation: Explanation
    stability: StabilityReport
    trace: tuple[tuple[float, float, float], ...]
    target_adherence: float
    kw_bounds: tuple[float, float]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "schema": "stablelime/optimization/v1",
            "target_adherence": float(self.target_adherence),
            "kw_bounds": [float(b) for b in self.kw_bounds],
            "best_kernel_width": float(self.best_kw),
            "best_loss": float(self.best_loss),
            "achieved_r_squared": float(self.achieved_r_squared),
            "degenerate": bool(self.degenerate),
            "trace": [
                {"kernel_width": float(kw), "loss": float(l), "r_squared": float(r)}
                for kw, l, r in self.trace
            ],
            "explanation": self.explanation.to_dict(),
            "stability": self.stability.to_dict(),
        }


def _expected_improvement(mean, std, best, xi=1e-3):
    improvement = mean - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, improvement / std, 0.0)
        ei = np.where(std > 0, improvement * norm.cdf(z) + std * norm.pdf(z), 0.0)
    return np.clip(ei, 0.0, None)


def _fit_surrogate(log_kws: np.ndarray, losses: np.ndarray, log_span: float, seed: int):
    """GP over log-width with a fitted observation-noise term.

    Returns a latent-function predictor: the noise level learned by the
    WhiteKernel moves into the regression's alpha so predictive stds
    describe the denoised objective, as expected improvement wants.
    """
    kernel = ConstantKernel(1.0, (1e-4, 1e4)) * RBF(
        length_scale=0.3 * log_span, length_scale_bounds=(1e-3 * log_span, 10.0 * log_span)
    ) + WhiteKernel(noise_level=1e-4, noise_level_bounds=(1e-12, 1e-1))
    gp = GaussianProcessRegressor(
        kernel=kernel, normalize_y=True, n_restarts_optimizer=2, random_state=seed
    )
    X = log_kws.reshape(-1, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ConvergenceWarning)
        gp.fit(X, losses)
        noise = float(gp.kernel_.k2.noise_level)
        # jitter floor keeps the Cholesky factorization alive on
        # noise-free objectives with near-duplicate evaluations
        for alpha in (noise + 1e-10, noise + 1e-8, noise + 1e-6, noise + 1e-4):
            latent = GaussianProcessRegressor(
                kernel=gp.kernel_.k1, alpha=alpha, optimizer=None, normalize_y=True
            )
            try:
                latent.fit(X, losses)
                return latent
            except np.linalg.LinAlgError:
                continue
    raise RuntimeError("Gaussian-process surrogate could not be factorized")


def maximize_objective(
    objective: Callable[[float, int], tuple[float, float]],
    bounds: tuple[float, float],
    preliminary_calls: int,
    refinement_iterations: int,
    seed: int,
    jobs: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Core Bayesian loop over a scalar noisy objective.

    Args:
        objective: maps (kernel_width, evaluation_index) to
            (loss, r_squared); the index feeds per-evaluation seeds.
        bounds: (low, high) search interval for the kernel width.
        preliminary_calls: quasi-random evaluations before modelling.
        refinement_iterations: surrogate-guided evaluations.
        seed: drives the quasi-random sequence and surrogate restarts.
        jobs: thread-pool width for the preliminary evaluations.

    Returns:
        (kws, losses, r_squareds, degenerate) with one entry per
        evaluation, preliminary first.
    """
    low, high = bounds
    if not (0 < low < high):
        raise ValueError("bounds must satisfy 0 < low < high")
    log_low, log_high = math.log(low), math.log(high)
    log_span = log_high - log_low
    sampler = qmc.Halton(d=1, scramble=True, seed=seed)

    def next_quasi_random() -> float:
        u = float(sampler.random(1)[0, 0])
        return math.exp(log_low + u * log_span)

    kws = [next_quasi_random() for _ in range(preliminary_calls)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(objective, kw, i) for i, kw in enumerate(kws)]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [objective(kw, i) for i, kw in enumerate(kws)]
    losses = [out[0] for out in outcomes]
    r2s = [out[1] for out in outcomes]

    candidates = np.exp(np.linspace(log_low, log_high, 512))
    for step in range(refinement_iterations):
        if np.ptp(losses) < _DEGENERATE_SPREAD:
            next_kw = next_quasi_random()  # flat landscape: keep space-filling
        else:
            log_kws = np.log(np.asarray(kws))
            latent = _fit_surrogate(log_kws, np.asarray(losses), log_span, seed + step + 1)
            mean_obs = latent.predict(log_kws.reshape(-1, 1))
            best_plugin = float(np.max(mean_obs))
            mean, std = latent.predict(np.log(candidates).reshape(-1, 1), return_std=True)
            ei = _expected_improvement(mean, std, best_plugin)
            if float(np.max(ei)) <= 0.0:
                next_kw = next_quasi_random()
            else:
                next_kw = float(candidates[int(np.argmax(ei))])
        loss, r2 = objective(next_kw, len(kws))
        kws.append(next_kw)
        losses.append(loss)
        r2s.append(r2)

    losses_arr = np.asarray(losses)
    degenerate = bool(np.ptp(losses_arr) < _DEGENERATE_SPREAD)
    return np.asarray(kws), losses_arr, np.asarray(r2s), degenerate


def optimize_kernel_width(
    predictor: Predictor,
    stats: FeatureStats,
    reference,
    config: LimeConfig,
    search: Optional[SearchConfig] = None,
    jobs: int = 1,
) -> OptimizationResult:
    """Find the largest kernel width meeting the target adherence.

    Each objective evaluation runs one explanation with a fresh derived
    seed (the objective is noisy by construction). After the search,
    the best width gets a full explanation and stability report at the
    base seed.
    """
    search = search or SearchConfig()
    bounds = search.resolve_bounds(stats.n_features)

    def objective(kw: float, index: int) -> tuple[float, float]:
        result = explain(
            predictor, stats, reference, config.with_kernel_width(kw).with_seed(config.seed + index)
        )
        return folded_loss(result.r_squared, search.target_adherence), result.r_squared

    kws, losses, r2s, degenerate = maximize_objective(
        objective,
        bounds,
        search.preliminary_calls,
        search.refinement_iterations,
        config.seed,
        jobs=jobs,
    )
    best_idx = int(np.argmax(losses))
    best_kw = float(np.mean(bounds)) if degenerate else float(kws[best_idx])

    best_config = config.with_kernel_width(best_kw)
    final_explanation = explain(predictor, stats, reference, best_config)
    report = evaluate_stability(
        predictor,
        stats,
        reference,
        best_config,
        StabilityConfig(search.stability_repetitions, search.confidence_level),
        jobs=jobs,
    )
    return OptimizationResult(
        best_kw=best_kw,
        best_loss=float(losses[best_idx]),
        achieved_r_squared=float(r2s[best_idx]),
        explanation=final_explanation,
        stability=report,
        trace=tuple((float(k), float(l), float(r)) for k, l, r in zip(kws, losses, r2s)),
        target_adherence=search.target_adherence,
        kw_bounds=(float(bounds[0]), float(bounds[1])),
        degenerate=degenerate,
    )


class KernelWidthSearch(BaseEstimator):
    """Estimator-style wrapper around the kernel-width optimization.

    Hyperparameters live in the constructor (scikit-learn convention);
    fit(X) learns sampling statistics, search() runs the optimization
    and stores the result as fitted attributes.
    """

    def __init__(
        self,
        target_adherence: float = 0.9,
        preliminary_calls: int = 10,
        refinement_iterations: int = 30,
        kw_bounds: Optional[tuple[float, float]] = None,
        num_samples: int = 5000,
        num_features: Optional[int] = None,
        ridge: float = 0.0,
        stability_repetitions: int = 10,
        confidence_level: float = 0.95,
        seed: int = 0,
    ):
        self.target_adherence = target_adherence
        self.preliminary_calls = preliminary_calls
        self.refinement_iterations = refinement_iterations
        self.kw_bounds = kw_bounds
        self.num_samples = num_samples
        self.num_features = num_features
        self.ridge = ridge
        self.stability_repetitions = stability_repetitions
        self.confidence_level = confidence_level
        self.seed = seed

    def fit(self, X, y=None):
        if isinstance(X, TabularDataset):
            self.stats_ = compute_stats(X)
        else:
            self.stats_ = stats_from_matrix(X)
        self.n_features_in_ = self.stats_.n_features
        return self

    def search(self, predictor: Predictor, reference, jobs: int = 1) -> OptimizationResult:
        if not hasattr(self, "stats_"):
            raise NotFittedError("KernelWidthSearch is not fitted yet; call fit(X) first")
        config = LimeConfig(
            kernel_width=1.0,  # replaced per evaluation
            num_samples=self.num_samples,
            num_features=self.num_features,
            ridge=self.ridge,
            seed=self.seed,
        )
        search = SearchConfig(
            target_adherence=self.target_adherence,
            preliminary_calls=self.preliminary_calls,
            refinement_iterations=self.refinement_iterations,
            kw_bounds=self.kw_bounds,
            stability_repetitions=self.stability_repetitions,
            confidence_level=self.confidence_level,
        )
        self.result_ = optimize_kernel_width(
            predictor, self.stats_, reference, config, search, jobs=jobs
        )
        self.best_kernel_width_ = self.result_.best_kw
        self.best_loss_ = self.result_.best_loss
        return self.result_
