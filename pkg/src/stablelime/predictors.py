"""Prediction backends the explainer can interrogate.

Two concrete predictors are provided: a univariate least-squares
polynomial regressor (the benchmark model) and a wrapper around an
external process speaking a line-delimited batch protocol, which lets
any model in any language serve predictions.

External protocol, per batch: the engine writes one line ``"B d"``
(batch size, feature count), then B lines of d comma-separated decimal
reals, then flushes. The process must reply with exactly B lines, each
a single decimal real, and flush. Batches repeat until the input
stream closes.
"""
from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import threading
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .data import TabularDataset
from .validation import as_float_matrix, as_float_vector

__all__ = [
    "Predictor",
    "PolynomialRegressor",
    "ExternalPredictor",
    "ProtocolError",
    "fit_polynomial",
]


class ProtocolError(RuntimeError):
    """External predictor violated the batch protocol."""


class Predictor:
    """Uniform prediction interface: a deterministic batch function.

    Subclasses implement :meth:`predict` mapping an (n, d) query matrix
    to n real predictions. Determinism (same matrix, same output) is
    required so generated points always lie on the same model surface.
    """

    descriptor: str = "predictor"

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError


class PolynomialRegressor(Predictor, BaseEstimator, RegressorMixin):
    """Univariate polynomial fitted by unweighted least squares.

    Parameters
    ----------
    degree : int
        Polynomial degree; the fit estimates degree + 1 coefficients.

    Attributes
    ----------
    coefficients_ : ndarray of shape (degree + 1,)
        Ascending-order coefficients (constant term first).
    """

    def __init__(self, degree: int = 5):
        self.degree = degree

    @property
    def descriptor(self) -> str:
        return f"poly{self.degree}"

    def fit(self, X, y=None):
        """Least-squares fit on (n, 1) inputs via the Vandermonde system.

        The solve goes through numpy's SVD-based lstsq, not the normal
        equations, and fails on rank-deficient designs.
        """
        if self.degree < 1:
            raise ValueError("degree must be a positive integer")
        X = as_float_matrix(X, "X")
        if X.shape[1] != 1:
            raise ValueError("PolynomialRegressor is univariate; X must have one column")
        y = as_float_vector(y, "y")
        if len(y) != X.shape[0]:
            raise ValueError("X and y have different lengths")
        if X.shape[0] < self.degree + 1:
            raise ValueError(
                f"need at least {self.degree + 1} rows to fit degree {self.degree}, got {X.shape[0]}"
            )
        design = np.vander(X[:, 0], N=self.degree + 1, increasing=True)
        coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < self.degree + 1:
            raise ValueError("Vandermonde system is singular (duplicated x beyond rank)")
        self.coefficients_ = coef
        return self

    def _check_fitted(self):
        if not hasattr(self, "coefficients_"):
            raise NotFittedError("PolynomialRegressor is not fitted yet")

    def predict(self, X) -> np.ndarray:
        """Evaluate the polynomial by Horner's scheme."""
        self._check_fitted()
        X = as_float_matrix(X, "X")
        if X.shape[1] != 1:
            raise ValueError("PolynomialRegressor is univariate; X must have one column")
        x = X[:, 0]
        result = np.zeros_like(x)
        for c in self.coefficients_[::-1]:
            result = result * x + c
        return result

    def derivative(self, x: float) -> float:
        """Analytic first derivative at a scalar point."""
        self._check_fitted()
        powers = np.arange(1, len(self.coefficients_))
        dcoef = self.coefficients_[1:] * powers
        result = 0.0
        for c in dcoef[::-1]:
            result = result * x + c
        return float(result)

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "degree": int(self.degree),
            "coefficients": [float(c) for c in self.coefficients_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PolynomialRegressor":
        model = cls(degree=int(payload["degree"]))
        coef = np.asarray(payload["coefficients"], dtype=np.float64)
        if len(coef) != model.degree + 1:
            raise ValueError("coefficient count does not match degree")
        model.coefficients_ = coef
        return model

    @classmethod
    def load(cls, path) -> "PolynomialRegressor":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_polynomial(data: TabularDataset, degree: int) -> PolynomialRegressor:
    """Fit a univariate polynomial to a dataset that carries a target."""
    if data.n_features != 1:
        raise ValueError("fit_polynomial requires a one-feature dataset")
    if data.target is None:
        raise ValueError("fit_polynomial requires a dataset with a target")
    return PolynomialRegressor(degree=degree).fit(data.rows, data.target)


class ExternalPredictor(Predictor):
    """Predictor backed by a subprocess speaking the line protocol.

    The process is launched lazily on the first batch and kept alive
    between batches. predict() is batch-atomic: an internal lock keeps
    concurrent explanation calls from interleaving two batches on one
    process.
    """

    def __init__(self, command: str, timeout: float = 30.0):
        if not command.strip():
            raise ValueError("external predictor command is empty")
        self.command = command
        self.timeout = float(timeout)
        self.descriptor = f"exec:{command}"
        self._proc: Optional[subprocess.Popen] = None
        self._lock = threading.Lock()

    def _ensure_process(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise ProtocolError(f"failed to launch {self.command!r}: {exc}") from exc

    def predict(self, X) -> np.ndarray:
        X = as_float_matrix(X, "X")
        with self._lock:
            self._ensure_process()
            proc = self._proc
            lines = [f"{X.shape[0]} {X.shape[1]}"]
            lines.extend(",".join(repr(float(v)) for v in row) for row in X)
            request = "\n".join(lines) + "\n"

            reply: list[str] = []
            error: list[BaseException] = []

            def _exchange():
                # writer runs apart from the reader so a server that
                # streams replies mid-batch cannot wedge both pipes
                def _send():
                    try:
                        proc.stdin.write(request)
                        proc.stdin.flush()
                    except BaseException as exc:
                        error.append(exc)

                try:
                    sender = threading.Thread(target=_send, daemon=True)
                    sender.start()
                    for _ in range(X.shape[0]):
                        line = proc.stdout.readline()
                        if line == "":
                            raise ProtocolError(
                                f"{self.command!r} closed its output stream mid-batch"
                            )
                        reply.append(line)
                    sender.join()
                except BaseException as exc:
                    error.append(exc)

            worker = threading.Thread(target=_exchange, daemon=True)
            worker.start()
            worker.join(self.timeout)
            if worker.is_alive():
                proc.kill()
                raise ProtocolError(
                    f"{self.command!r} timed out after {self.timeout} s on a "
                    f"{X.shape[0]}-row batch"
                )
            if error:
                proc.kill()
                exc = error[0]
                if isinstance(exc, ProtocolError):
                    raise exc
                raise ProtocolError(f"protocol exchange with {self.command!r} failed: {exc}")

            values = np.empty(X.shape[0], dtype=np.float64)
            for i, line in enumerate(reply):
                try:
                    values[i] = float(line.strip())
                except ValueError:
                    proc.kill()
                    raise ProtocolError(
                        f"{self.command!r} sent non-numeric reply line {i + 1}: {line.strip()!r}"
                    ) from None
            if not np.all(np.isfinite(values)):
                raise ProtocolError(f"{self.command!r} replied with non-finite predictions")
            return values

    def close(self):
        with self._lock:
            if self._proc is not None:
                if self._proc.stdin is not None:
                    try:
                        self._proc.stdin.close()
                    except OSError:
                        pass
                try:
                    self._proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class CachingPredictor(Predictor):
    """Memoizes batches by content hash for the span of one explanation call.

    Determinism across calls is already guaranteed by the Predictor
    contract, so the cache never outlives the explanation that owns it.
    """

    def __init__(self, inner: Predictor):
        self.inner = inner
        self.descriptor = inner.descriptor
        self._cache: dict[bytes, np.ndarray] = {}

    def predict(self, X) -> np.ndarray:
        X = as_float_matrix(X, "X")
        key = hashlib.sha256(np.ascontiguousarray(X).tobytes()).digest()
        hit = self._cache.get(key)
        if hit is None:
            hit = np.asarray(self.inner.predict(X), dtype=np.float64)
            if hit.shape != (X.shape[0],):
                raise ValueError(
                    f"predictor returned {hit.shape} predictions for {X.shape[0]} rows"
                )
            self._cache[key] = hit
        return hit
