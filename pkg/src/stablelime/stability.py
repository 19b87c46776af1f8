"""Stability of repeated explanations: the CSI and VSI indices.

Repeating an explanation at identical settings (only the seed varies)
yields a set of surrogate models. VSI measures agreement of the
feature-selection step as the mean pairwise Jaccard similarity of the
selected sets. CSI measures agreement of the coefficients: two runs
are concordant on a feature when their normal-approximation confidence
intervals overlap, and the index averages the per-feature concordant
fractions. Both live in [0, 1].
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .data import FeatureStats
from .explainer import Explanation, LimeConfig, explain
from .predictors import Predictor
from .validation import check_positive_int

__all__ = [
    "StabilityConfig",
    "StabilityReport",
    "run_repeated",
    "vsi",
    "csi",
    "stability_report",
    "evaluate_stability",
]


@dataclass(frozen=True)
class StabilityConfig:
    """How many repeated calls to run and at what confidence level.

    Seeds are derived from the base LimeConfig seed as seed, seed+1,
    ..., seed + repetitions - 1.
    """

    repetitions: int = 10
    confidence_level: float = 0.95

    def __post_init__(self):
        check_positive_int(self.repetitions, "repetitions")
        if self.repetitions < 2:
            raise ValueError("repetitions must be at least 2")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError("confidence_level must lie in (0, 1)")


@dataclass(frozen=True)
class StabilityReport:
    csi: float
    vsi: float
    per_feature_concordance: dict[str, float]
    pairwise_jaccard: np.ndarray
    explanations: tuple[Explanation, ...]

    def to_dict(self) -> dict:
        return {
            "schema": "stablelime/stability/v1",
            "csi": float(self.csi),
            "vsi": float(self.vsi),
            "per_feature_concordance": {
                k: float(v) for k, v in sorted(self.per_feature_concordance.items())
            },
            "pairwise_jaccard": [[float(v) for v in row] for row in self.pairwise_jaccard],
            "explanations": [e.to_dict() for e in self.explanations],
        }


def run_repeated(
    predictor: Predictor,
    stats: FeatureStats,
    reference,
    config: LimeConfig,
    repetitions: int,
    jobs: int = 1,
) -> list[Explanation]:
    """n explanation calls differing only in the derived seed.

    The calls are independent; jobs > 1 runs them on a thread pool
    (each call still owns its predictor batch via the predictor's own
    locking). Output order is by derived seed regardless of jobs.
    """
    check_positive_int(repetitions, "repetitions")
    configs = [config.with_seed(config.seed + i) for i in range(repetitions)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(explain, predictor, stats, reference, c) for c in configs]
            return [f.result() for f in futures]
    return [explain(predictor, stats, reference, c) for c in configs]


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def vsi(explanations: Sequence[Explanation]) -> float:
    """Mean pairwise Jaccard similarity of the selected-feature sets."""
    if len(explanations) < 2:
        raise ValueError("vsi needs at least 2 explanations")
    sets = [frozenset(e.selected_features) for e in explanations]
    pairs = list(combinations(sets, 2))
    return float(np.mean([_jaccard(a, b) for a, b in pairs]))


def pairwise_jaccard_matrix(explanations: Sequence[Explanation]) -> np.ndarray:
    sets = [frozenset(e.selected_features) for e in explanations]
    n = len(sets)
    matrix = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = _jaccard(sets[i], sets[j])
    return matrix


def csi(
    explanations: Sequence[Explanation],
    confidence_level: float = 0.95,
) -> tuple[float, dict[str, float]]:
    """Coefficient concordance across repeated explanations.

    For each feature selected in at least two explanations, every pair
    of runs featuring it is concordant when the intervals
    coefficient +/- z * std_error overlap. The feature score is the
    concordant fraction over those pairs, and the index is the mean of
    the feature scores.

    Returns:
        (csi value, per-feature concordance map).

    Raises:
        ValueError: fewer than 2 explanations, or no feature selected
        in at least two of them.
    """
    if len(explanations) < 2:
        raise ValueError("csi needs at least 2 explanations")
    if not 0.0 < confidence_level < 1.0:
        raise ValueError("confidence_level must lie in (0, 1)")
    z = float(norm.ppf(0.5 + confidence_level / 2.0))

    intervals: dict[str, list[tuple[float, float]]] = {}
    for e in explanations:
        for name in e.selected_features:
            beta = e.coefficients[name]
            half = z * e.std_errors[name]
            intervals.setdefault(name, []).append((beta - half, beta + half))

    per_feature: dict[str, float] = {}
    for name, ivals in intervals.items():
        if len(ivals) < 2:
            continue
        concordant = 0
        total = 0
        for (lo1, hi1), (lo2, hi2) in combinations(ivals, 2):
            total += 1
            # relative epsilon so intervals identical up to float noise
            # (noiseless black boxes) still count as overlapping
            tol = 1e-9 * max(1.0, abs(lo1), abs(hi1), abs(lo2), abs(hi2))
            if lo1 <= hi2 + tol and lo2 <= hi1 + tol:
                concordant += 1
        per_feature[name] = concordant / total
    if not per_feature:
        raise ValueError("no feature appears in at least two explanations; csi undefined")
    return float(np.mean(list(per_feature.values()))), per_feature


def stability_report(
    explanations: Sequence[Explanation],
    confidence_level: float = 0.95,
) -> StabilityReport:
    """Bundle CSI, VSI and the supporting detail for a set of runs."""
    csi_value, per_feature = csi(explanations, confidence_level)
    return StabilityReport(
        csi=csi_value,
        vsi=vsi(explanations),
        per_feature_concordance=per_feature,
        pairwise_jaccard=pairwise_jaccard_matrix(explanations),
        explanations=tuple(explanations),
    )


def evaluate_stability(
    predictor: Predictor,
    stats: FeatureStats,
    reference,
    config: LimeConfig,
    stability: Optional[StabilityConfig] = None,
    jobs: int = 1,
) -> StabilityReport:
    """Run repeated explanations and compute their stability report."""
    stability = stability or StabilityConfig()
    runs = run_repeated(predictor, stats, reference, config, stability.repetitions, jobs=jobs)
    return stability_report(runs, stability.confidence_level)
