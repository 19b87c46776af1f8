"""Shared fixtures: the canonical benchmark and small helper predictors."""
import sys
from pathlib import Path

import numpy as np
import pytest

from stablelime.data import compute_stats
from stablelime.explainer import Explanation
from stablelime.predictors import Predictor
from stablelime.synthetic import BenchmarkSpec, build_benchmark_model, generate, reference_row

HELPERS = Path(__file__).parent / "helpers"
PYTHON = sys.executable


class LinearPredictor(Predictor):
    """Noiseless affine surface y = intercept + slopes . x."""

    descriptor = "linear"

    def __init__(self, slopes, intercept=0.0):
        self.slopes = np.atleast_1d(np.asarray(slopes, dtype=np.float64))
        self.intercept = float(intercept)

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return self.intercept + X @ self.slopes


@pytest.fixture(scope="session")
def benchmark():
    data = generate(BenchmarkSpec())
    model = build_benchmark_model(data)
    stats = compute_stats(data)
    ref = data.rows[reference_row(data)]
    return data, model, stats, ref


@pytest.fixture
def linear_1d():
    return LinearPredictor([2.0], intercept=1.0)


def make_explanation(features, r_squared=1.0, kernel_width=1.0, seed=0, reference=(0.0,)):
    """Hand-built Explanation for index tests.

    features: mapping name -> (coefficient, std_error), insertion order
    is the selection rank.
    """
    return Explanation(
        reference=tuple(reference),
        intercept=0.0,
        coefficients={k: float(c) for k, (c, _) in features.items()},
        std_errors={k: float(s) for k, (_, s) in features.items()},
        selected_features=tuple(features),
        r_squared=r_squared,
        kernel_width=kernel_width,
        seed=seed,
    )
