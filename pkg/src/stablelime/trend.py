"""Kernel-width sweeps and logistic trend fits.

Scanning a grid of kernel widths yields noisy adherence (R-squared)
and stability (CSI/VSI) curves. Fitting a four-parameter logistic to
each curve certifies the monotone shape: adherence falls with width
(negative growth rate), stability rises (positive growth rate).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .data import FeatureStats
from .explainer import LimeConfig
from .predictors import Predictor
from .stability import StabilityConfig, run_repeated, stability_report
from .validation import as_float_vector, check_length

__all__ = ["KernelWidthScan", "LogisticFit", "scan", "fit_logistic", "logistic_curve"]

_EXP_CLIP = 500.0  # keeps exp() finite for any optimizer iterate


@dataclass(frozen=True)
class LogisticFit:
    """Four-parameter logistic y = lower + (upper-lower)/(1+exp(-k(x-x0))).

    Canonical orientation has lower <= upper, so a falling curve shows
    up as a negative growth_rate. mae is the mean absolute residual of
    the fit; converged=False marks a best-effort result.
    """

    lower: float
    upper: float
    growth_rate: float
    midpoint: float
    mae: float
    converged: bool = True

    def __call__(self, x) -> np.ndarray:
        return logistic_curve(np.asarray(x, dtype=np.float64), self.lower, self.upper, self.growth_rate, self.midpoint)

    def to_dict(self) -> dict:
        return {
            "lower": float(self.lower),
            "upper": float(self.upper),
            "growth_rate": float(self.growth_rate),
            "midpoint": float(self.midpoint),
            "mae": float(self.mae),
            "converged": bool(self.converged),
        }


@dataclass(frozen=True)
class KernelWidthScan:
    """Per-width metrics over an ascending grid of kernel widths."""

    grid: np.ndarray
    r_squared: np.ndarray
    csi: np.ndarray
    vsi: np.ndarray
    repetitions: int

    def to_rows(self) -> list[dict]:
        return [
            {
                "kernel_width": float(kw),
                "r_squared": float(r2),
                "csi": float(c),
                "vsi": float(v),
            }
            for kw, r2, c, v in zip(self.grid, self.r_squared, self.csi, self.vsi)
        ]

    def to_dict(self) -> dict:
        # logistic fits need 5+ grid points; shorter scans emit nulls
        fittable = len(self.grid) >= 5
        return {
            "schema": "stablelime/scan/v1",
            "repetitions": int(self.repetitions),
            "points": self.to_rows(),
            "logistic_fits": {
                "r_squared": fit_logistic(self.grid, self.r_squared).to_dict() if fittable else None,
                "csi": fit_logistic(self.grid, self.csi).to_dict() if fittable else None,
            },
        }


def scan(
    predictor: Predictor,
    stats: FeatureStats,
    reference,
    grid,
    config: LimeConfig,
    stability: StabilityConfig | None = None,
    jobs: int = 1,
) -> KernelWidthScan:
    """Evaluate mean R-squared, CSI and VSI at each kernel width.

    Each grid point gets its own block of derived seeds so the noise
    is independent across widths; the whole scan is deterministic
    given config.seed.
    """
    grid = as_float_vector(grid, "grid")
    if len(grid) == 0:
        raise ValueError("grid must be non-empty")
    if np.any(grid <= 0):
        raise ValueError("kernel widths must be positive")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    stability = stability or StabilityConfig()

    def _evaluate(idx_kw):
        idx, kw = idx_kw
        point_config = config.with_kernel_width(kw).with_seed(
            config.seed + idx * stability.repetitions
        )
        runs = run_repeated(predictor, stats, reference, point_config, stability.repetitions)
        report = stability_report(runs, stability.confidence_level)
        mean_r2 = float(np.mean([e.r_squared for e in runs]))
        return mean_r2, report.csi, report.vsi

    tasks = list(enumerate(grid))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]
    r2s, csis, vsis = (np.array(col) for col in zip(*results))
    return KernelWidthScan(
        grid=grid,
        r_squared=r2s,
        csi=csis,
        vsi=vsis,
        repetitions=stability.repetitions,
    )


def logistic_curve(x, lower, upper, growth_rate, midpoint) -> np.ndarray:
    z = np.clip(growth_rate * (np.asarray(x, dtype=np.float64) - midpoint), -_EXP_CLIP, _EXP_CLIP)
    return lower + (upper - lower) / (1.0 + np.exp(-z))


def _canonicalize(params: np.ndarray) -> np.ndarray:
    # (lower, upper, k, x0) and (upper, lower, -k, x0) describe the same
    # curve; pin the representative with lower <= upper.
    lower, upper, k, x0 = params
    if lower > upper:
        return np.array([upper, lower, -k, x0])
    return params


def fit_logistic(xs, ys) -> LogisticFit:
    """Least-squares logistic fit with deterministic multi-start.

    Eight starts: midpoints at the 0.25/0.5/0.75 quantiles of xs with
    both growth-rate signs, plus two flat (constant) starts so the fit
    can never lose to the best constant. Non-convergence of every
    start returns the best-effort parameters with converged=False.
    """
    xs = as_float_vector(xs, "xs")
    ys = as_float_vector(ys, "ys")
    check_length(ys, len(xs), "ys")
    if len(xs) < 5:
        raise ValueError("fit_logistic needs at least 5 points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly ascending")

    span = float(xs[-1] - xs[0])
    y_lo, y_hi = float(np.min(ys)), float(np.max(ys))
    y_mean = float(np.mean(ys))
    base_rate = 4.0 / span  # transition over roughly the grid span

    starts = []
    for q in (0.25, 0.5, 0.75):
        mid = float(np.quantile(xs, q))
        for sign in (1.0, -1.0):
            starts.append(np.array([y_lo, y_hi, sign * base_rate, mid]))
    mid = float(np.quantile(xs, 0.5))
    starts.append(np.array([y_mean, y_mean, 1e-6, mid]))
    starts.append(np.array([y_mean, y_mean, -1e-6, mid]))

    def residuals(params):
        return logistic_curve(xs, *params) - ys

    best_params = None
    best_sse = np.inf
    converged = False
    for start in starts:
        result = least_squares(residuals, start, max_nfev=2000)
        if not np.all(np.isfinite(result.x)):
            continue
        sse = float(np.sum(result.fun**2))
        if sse < best_sse:
            best_params, best_sse = result.x, sse
            converged = bool(result.success)
    if best_params is None:  # every start diverged; report the flat fit
        best_params = np.array([y_mean, y_mean, 0.0, float(np.quantile(xs, 0.5))])
        converged = False

    lower, upper, rate, midpoint = _canonicalize(best_params)
    mae = float(np.mean(np.abs(logistic_curve(xs, lower, upper, rate, midpoint) - ys)))
    return LogisticFit(
        lower=float(lower),
        upper=float(upper),
        growth_rate=float(rate),
        midpoint=float(midpoint),
        mae=mae,
        converged=converged,
    )
