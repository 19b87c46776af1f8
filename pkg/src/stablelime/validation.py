"""Input validation helpers shared across the package.

Small check_array-style utilities: coerce to float64 numpy arrays,
enforce shape and finiteness, and fail with messages that name the
offending argument.
"""
from __future__ import annotations

import numpy as np


def as_float_vector(values, name: str = "array") -> np.ndarray:
    """Coerce to a 1-d float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    ensure_finite(arr, name)
    return arr


def as_float_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    ensure_finite(arr, name)
    return arr


def ensure_finite(arr: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values (NaN or infinity)")


def check_length(arr: np.ndarray, expected: int, name: str = "array") -> None:
    if len(arr) != expected:
        raise ValueError(f"{name} has length {len(arr)}, expected {expected}")


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_non_negative(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a non-negative finite number, got {value}")
    return value


def check_positive_int(value: int, name: str) -> int:
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return int(value)
