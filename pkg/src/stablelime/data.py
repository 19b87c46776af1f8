"""Tabular data ingestion and the per-feature statistics driving perturbations.

A :class:`TabularDataset` is an immutable numeric feature matrix with
optional target column. :class:`FeatureStats` carries the per-feature
mean and sample standard deviation used both to sample perturbations
and to standardize distances.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .validation import as_float_matrix, as_float_vector, check_length

__all__ = [
    "TabularDataset",
    "FeatureStats",
    "load_csv",
    "write_csv",
    "compute_stats",
    "standardize",
]


@dataclass(frozen=True)
class TabularDataset:
    """Numeric feature matrix plus optional target vector.

    Rows and target are validated and copied at construction; instances
    are safe to share across concurrent explanation calls.
    """

    feature_names: tuple[str, ...]
    rows: np.ndarray
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        rows = as_float_matrix(self.rows, "rows").copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        names = tuple(str(n) for n in self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if rows.shape[1] != len(names):
            raise ValueError(
                f"rows have {rows.shape[1]} columns but {len(names)} feature names given"
            )
        if rows.shape[1] < 1:
            raise ValueError("dataset needs at least one feature")
        if rows.shape[0] < 2:
            raise ValueError("dataset needs at least two rows")
        if any(not n for n in names):
            raise ValueError("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if self.target is not None:
            target = as_float_vector(self.target, "target").copy()
            check_length(target, rows.shape[0], "target")
            target.setflags(write=False)
            object.__setattr__(self, "target", target)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature mean and sample standard deviation.

    ``std_dev`` uses the n-1 denominator; it is zero only for constant
    columns. ``feature_names`` keeps explanations keyed by name.
    """

    feature_names: tuple[str, ...]
    mean: np.ndarray
    std_dev: np.ndarray

    def __post_init__(self):
        mean = as_float_vector(self.mean, "mean").copy()
        std = as_float_vector(self.std_dev, "std_dev").copy()
        check_length(std, len(mean), "std_dev")
        if len(self.feature_names) != len(mean):
            raise ValueError("feature_names and mean lengths differ")
        if np.any(std < 0):
            raise ValueError("std_dev entries must be non-negative")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std_dev", std)
        object.__setattr__(self, "feature_names", tuple(str(n) for n in self.feature_names))

    @property
    def n_features(self) -> int:
        return len(self.mean)


def load_csv(path, target_column: Optional[str] = None) -> TabularDataset:
    """Read a numeric CSV (header row, '.' decimals) into a TabularDataset.

    Args:
        path: CSV file path.
        target_column: optional header name split out as the target.

    Raises:
        FileNotFoundError: missing file.
        ValueError: unknown target column, ragged rows, or a cell that
            does not parse as a finite real (the message names the
            offending row and column).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        data_rows: list[list[float]] = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ValueError(
                    f"{path}: row {line_no} has {len(record)} cells, expected {len(header)}"
                )
            parsed = []
            for col, cell in zip(header, record):
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell {cell!r} at row {line_no}, column {col!r}"
                    ) from None
                if not np.isfinite(value):
                    raise ValueError(
                        f"{path}: non-finite cell {cell!r} at row {line_no}, column {col!r}"
                    )
                parsed.append(value)
            data_rows.append(parsed)
    if not data_rows:
        raise ValueError(f"{path}: no data rows")
    matrix = np.asarray(data_rows, dtype=np.float64)
    if target_column is None:
        return TabularDataset(tuple(header), matrix)
    if target_column not in header:
        raise ValueError(f"{path}: unknown target column {target_column!r}")
    t_idx = header.index(target_column)
    keep = [i for i in range(len(header)) if i != t_idx]
    names = tuple(header[i] for i in keep)
    return TabularDataset(names, matrix[:, keep], target=matrix[:, t_idx])


def write_csv(data: TabularDataset, path, target_name: str = "y") -> None:
    """Write a dataset back to CSV; floats use shortest round-trip repr."""
    path = Path(path)
    header = list(data.feature_names)
    columns = [data.rows]
    if data.target is not None:
        header.append(target_name)
        columns.append(data.target.reshape(-1, 1))
    table = np.hstack(columns)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])


def compute_stats(data: TabularDataset) -> FeatureStats:
    """Per-feature mean and sample (n-1) standard deviation."""
    if data.n_rows < 2:
        raise ValueError("need at least two rows to compute feature statistics")
    return stats_from_matrix(data.rows, data.feature_names)


def stats_from_matrix(X, feature_names: Optional[Sequence[str]] = None) -> FeatureStats:
    """Build FeatureStats from a raw (n, d) matrix."""
    X = as_float_matrix(X, "X")
    if X.shape[0] < 2:
        raise ValueError("need at least two rows to compute feature statistics")
    if feature_names is None:
        feature_names = tuple(f"x{i}" for i in range(X.shape[1]))
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    return FeatureStats(tuple(feature_names), mean, std)


def standardize(point, stats: FeatureStats) -> np.ndarray:
    """Center by mean and scale by std_dev; constant columns map to 0."""
    point = as_float_vector(point, "point")
    check_length(point, stats.n_features, "point")
    scale = np.where(stats.std_dev > 0, stats.std_dev, 1.0)
    out = (point - stats.mean) / scale
    return np.where(stats.std_dev > 0, out, 0.0)


def standardize_matrix(X, stats: FeatureStats) -> np.ndarray:
    """Row-wise :func:`standardize` over an (n, d) matrix."""
    X = as_float_matrix(X, "X")
    if X.shape[1] != stats.n_features:
        raise ValueError(f"matrix has {X.shape[1]} columns, stats expect {stats.n_features}")
    scale = np.where(stats.std_dev > 0, stats.std_dev, 1.0)
    out = (X - stats.mean) / scale
    out[:, stats.std_dev == 0] = 0.0
    return out
