"""Command-line surface: dataset/model setup, explanations, stability
reports, kernel-width scans, and full width optimizations.

Every command writes machine-readable artifacts (JSON validated against
the published schemas, plus CSV where tabular) into --out, together
with a manifest sufficient to reproduce the run bit for bit (timing
fields aside). Exit status is 0 only when every artifact was fully
written and valid.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data import TabularDataset, compute_stats, load_csv, write_csv
from .explainer import LimeConfig, explain
from .predictors import ExternalPredictor, PolynomialRegressor, Predictor, ProtocolError
from .schemas import validate_payload
from .search import SearchConfig, optimize_kernel_width
from .stability import StabilityConfig, evaluate_stability
from .synthetic import CANONICAL_SEED, BenchmarkSpec, build_benchmark_model, generate, reference_row
from .trend import scan as run_scan

_JSON_KW = dict(indent=2, sort_keys=True)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, payload: dict, schema: str) -> None:
    validate_payload(schema, payload)
    path.write_text(json.dumps(payload, **_JSON_KW) + "\n", encoding="utf-8")


class _Run:
    """Collects resolved config and input digests, then emits the manifest."""

    def __init__(self, command: str, out_dir: str, seed: int, config: dict):
        self.command = command
        self.seed = int(seed)
        self.config = config
        self.inputs: dict[str, str] = {}
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = time.time()

    def track_input(self, path) -> None:
        path = Path(path)
        self.inputs[str(path)] = _sha256(path)

    def finish(self) -> None:
        manifest = {
            "schema": "stablelime/manifest/v1",
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "config": self.config,
            "inputs": dict(sorted(self.inputs.items())),
            "timing": {
                "started_utc": datetime.fromtimestamp(self.started, tz=timezone.utc).isoformat(),
                "elapsed_seconds": time.time() - self.started,
            },
        }
        _write_json(self.out / "manifest.json", manifest, "manifest")


def _load_dataset(data_path: str, target_column: str | None) -> TabularDataset:
    try:
        return load_csv(data_path, target_column)
    except (OSError, ValueError) as exc:
        raise click.ClickException(str(exc))


def _resolve_predictor(spec: str, run: _Run) -> Predictor:
    if spec.startswith("builtin:poly"):
        kind, _, model_path = spec[len("builtin:"):].partition(":")
        if not model_path:
            raise click.ClickException(
                f"predictor spec {spec!r} needs a model file: builtin:poly<deg>:<file>"
            )
        try:
            degree = int(kind[len("poly"):])
        except ValueError:
            raise click.ClickException(f"bad builtin predictor kind {kind!r}")
        try:
            model = PolynomialRegressor.load(model_path)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise click.ClickException(f"cannot load model file {model_path!r}: {exc}")
        if model.degree != degree:
            raise click.ClickException(
                f"model file {model_path!r} has degree {model.degree}, spec says {degree}"
            )
        run.track_input(model_path)
        return model
    if spec.startswith("exec:"):
        command = spec[len("exec:"):].strip()
        if not command:
            raise click.ClickException("exec predictor spec has an empty command")
        return ExternalPredictor(command)
    raise click.ClickException(
        f"unknown predictor spec {spec!r}; use builtin:poly<deg>:<file> or exec:<command>"
    )


def _resolve_reference(data: TabularDataset, row: int | None, point: str | None) -> np.ndarray:
    if (row is None) == (point is None):
        raise click.ClickException("give exactly one of --row or --point")
    if row is not None:
        if not 0 <= row < data.n_rows:
            raise click.ClickException(f"--row {row} outside dataset with {data.n_rows} rows")
        return data.rows[row]
    try:
        values = np.array([float(v) for v in point.split(",")], dtype=np.float64)
    except ValueError:
        raise click.ClickException(f"--point {point!r} is not a comma-separated real vector")
    if len(values) != data.n_features:
        raise click.ClickException(
            f"--point has {len(values)} coordinates, dataset has {data.n_features} features"
        )
    if not np.all(np.isfinite(values)):
        raise click.ClickException("--point contains non-finite values")
    return values


def _close_predictor(predictor: Predictor) -> None:
    if isinstance(predictor, ExternalPredictor):
        predictor.close()


# Options shared by the explanation-driven commands.
def _data_options(fn):
    fn = click.option("--data", "data_path", required=True, type=click.Path(), help="CSV dataset")(fn)
    fn = click.option("--target-column", default=None, help="Header name split out as target")(fn)
    fn = click.option("--predictor", "predictor_spec", required=True,
                      help="builtin:poly<deg>:<file> or exec:<command>")(fn)
    fn = click.option("--row", type=int, default=None, help="Reference row index into --data")(fn)
    fn = click.option("--point", default=None, help="Reference as comma-separated reals")(fn)
    return fn


def _lime_options(fn):
    fn = click.option("--num-samples", default=5000, show_default=True, type=int)(fn)
    fn = click.option("--ridge", default=0.0, show_default=True, type=float)(fn)
    fn = click.option("--num-features", default=None, type=int,
                      help="Features kept by selection (default: all)")(fn)
    fn = click.option("--seed", default=0, show_default=True, type=int)(fn)
    fn = click.option("--jobs", default=1, show_default=True, type=int,
                      help="Max concurrent explanation calls")(fn)
    fn = click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory")(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def main():
    """Local surrogate explanations with stability diagnostics and
    automatic kernel-width tuning."""


@main.command()
@click.option("--seed", default=CANONICAL_SEED, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def toy(seed, out_dir):
    """Write the canonical benchmark dataset and its degree-5 model."""
    run = _Run("toy", out_dir, seed, {"seed": seed})
    data = generate(BenchmarkSpec(seed=seed))
    model = build_benchmark_model(data)
    write_csv(data, run.out / "toy.csv", target_name="y")
    payload = {
        "schema": "stablelime/polynomial_model/v1",
        **model.to_dict(),
        "feature_name": "x",
        "reference_row": reference_row(data),
        "training_rows": data.n_rows,
    }
    _write_json(run.out / "model.json", payload, "polynomial_model")
    run.finish()
    click.echo(f"wrote {run.out / 'toy.csv'} and {run.out / 'model.json'}")


@main.command("explain")
@_data_options
@click.option("--kernel-width", required=True, type=float)
@_lime_options
def explain_cmd(data_path, target_column, predictor_spec, row, point,
                kernel_width, num_samples, ridge, num_features, seed, jobs, out_dir):
    """Explain one prediction with a kernel-weighted linear surrogate."""
    config_echo = {
        "data": str(data_path), "target_column": target_column,
        "predictor": predictor_spec, "row": row, "point": point,
        "kernel_width": kernel_width, "num_samples": num_samples,
        "ridge": ridge, "num_features": num_features, "jobs": jobs,
    }
    run = _Run("explain", out_dir, seed, config_echo)
    data = _load_dataset(data_path, target_column)
    run.track_input(data_path)
    predictor = _resolve_predictor(predictor_spec, run)
    try:
        reference = _resolve_reference(data, row, point)
        config = LimeConfig(kernel_width, num_samples, num_features, ridge, seed)
        try:
            result = explain(predictor, compute_stats(data), reference, config)
        except (ValueError, ProtocolError) as exc:
            raise click.ClickException(str(exc))
        _write_json(run.out / "explanation.json", result.to_dict(), "explanation")
    finally:
        _close_predictor(predictor)
    run.finish()
    click.echo(f"wrote {run.out / 'explanation.json'}")


@main.command("stability")
@_data_options
@click.option("--kernel-width", required=True, type=float)
@click.option("--repetitions", default=10, show_default=True, type=int)
@click.option("--confidence", default=0.95, show_default=True, type=float)
@_lime_options
def stability_cmd(data_path, target_column, predictor_spec, row, point, kernel_width,
                  repetitions, confidence, num_samples, ridge, num_features, seed, jobs, out_dir):
    """Repeat explanations and report the CSI/VSI stability indices."""
    config_echo = {
        "data": str(data_path), "target_column": target_column,
        "predictor": predictor_spec, "row": row, "point": point,
        "kernel_width": kernel_width, "repetitions": repetitions,
        "confidence": confidence, "num_samples": num_samples,
        "ridge": ridge, "num_features": num_features, "jobs": jobs,
    }
    run = _Run("stability", out_dir, seed, config_echo)
    data = _load_dataset(data_path, target_column)
    run.track_input(data_path)
    predictor = _resolve_predictor(predictor_spec, run)
    try:
        reference = _resolve_reference(data, row, point)
        config = LimeConfig(kernel_width, num_samples, num_features, ridge, seed)
        try:
            report = evaluate_stability(
                predictor, compute_stats(data), reference, config,
                StabilityConfig(repetitions, confidence), jobs=jobs,
            )
        except (ValueError, ProtocolError) as exc:
            raise click.ClickException(str(exc))
        _write_json(run.out / "stability.json", report.to_dict(), "stability")
    finally:
        _close_predictor(predictor)
    run.finish()
    click.echo(f"wrote {run.out / 'stability.json'}")


@main.command("scan")
@_data_options
@click.option("--kw-min", default=0.05, show_default=True, type=float)
@click.option("--kw-max", default=None, type=float,
              help="Largest width (default: 3*sqrt(n_features))")
@click.option("--steps", default=15, show_default=True, type=int)
@click.option("--repetitions", default=10, show_default=True, type=int)
@click.option("--confidence", default=0.95, show_default=True, type=float)
@_lime_options
def scan_cmd(data_path, target_column, predictor_spec, row, point, kw_min, kw_max, steps,
             repetitions, confidence, num_samples, ridge, num_features, seed, jobs, out_dir):
    """Sweep kernel widths; emit per-width metrics and logistic fits."""
    config_echo = {
        "data": str(data_path), "target_column": target_column,
        "predictor": predictor_spec, "row": row, "point": point,
        "kw_min": kw_min, "kw_max": kw_max, "steps": steps,
        "repetitions": repetitions, "confidence": confidence,
        "num_samples": num_samples, "ridge": ridge,
        "num_features": num_features, "jobs": jobs,
    }
    run = _Run("scan", out_dir, seed, config_echo)
    data = _load_dataset(data_path, target_column)
    run.track_input(data_path)
    predictor = _resolve_predictor(predictor_spec, run)
    try:
        reference = _resolve_reference(data, row, point)
        if kw_max is None:
            kw_max = 3.0 * math.sqrt(data.n_features)
        if not 0 < kw_min < kw_max:
            raise click.ClickException("need 0 < --kw-min < --kw-max")
        if steps < 2:
            raise click.ClickException("--steps must be at least 2")
        grid = np.geomspace(kw_min, kw_max, steps)
        config = LimeConfig(grid[0], num_samples, num_features, ridge, seed)
        try:
            result = run_scan(
                predictor, compute_stats(data), reference, grid, config,
                StabilityConfig(repetitions, confidence), jobs=jobs,
            )
        except (ValueError, ProtocolError) as exc:
            raise click.ClickException(str(exc))
        with (run.out / "scan.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["kw", "r_squared", "csi", "vsi"])
            for point_row in result.to_rows():
                writer.writerow([
                    repr(point_row["kernel_width"]), repr(point_row["r_squared"]),
                    repr(point_row["csi"]), repr(point_row["vsi"]),
                ])
        _write_json(run.out / "scan.json", result.to_dict(), "scan")
    finally:
        _close_predictor(predictor)
    run.finish()
    click.echo(f"wrote {run.out / 'scan.csv'} and {run.out / 'scan.json'}")


@main.command("optimize")
@_data_options
@click.option("--target", "target_adherence", default=0.9, show_default=True, type=float,
              help="Requested adherence (weighted R-squared)")
@click.option("--preliminary", "preliminary_calls", default=10, show_default=True, type=int)
@click.option("--iterations", "refinement_iterations", default=30, show_default=True, type=int)
@click.option("--kw-min", default=None, type=float, help="Search lower bound (default 0.05)")
@click.option("--kw-max", default=None, type=float,
              help="Search upper bound (default 3*sqrt(n_features))")
@click.option("--repetitions", default=10, show_default=True, type=int,
              help="Repetitions for the final stability report")
@click.option("--confidence", default=0.95, show_default=True, type=float)
@_lime_options
def optimize_cmd(data_path, target_column, predictor_spec, row, point, target_adherence,
                 preliminary_calls, refinement_iterations, kw_min, kw_max, repetitions,
                 confidence, num_samples, ridge, num_features, seed, jobs, out_dir):
    """Find the largest kernel width meeting the adherence target."""
    config_echo = {
        "data": str(data_path), "target_column": target_column,
        "predictor": predictor_spec, "row": row, "point": point,
        "target": target_adherence, "preliminary": preliminary_calls,
        "iterations": refinement_iterations, "kw_min": kw_min, "kw_max": kw_max,
        "repetitions": repetitions, "confidence": confidence,
        "num_samples": num_samples, "ridge": ridge,
        "num_features": num_features, "jobs": jobs,
    }
    run = _Run("optimize", out_dir, seed, config_echo)
    data = _load_dataset(data_path, target_column)
    run.track_input(data_path)
    predictor = _resolve_predictor(predictor_spec, run)
    try:
        reference = _resolve_reference(data, row, point)
        bounds = None
        if kw_min is not None or kw_max is not None:
            low = kw_min if kw_min is not None else 0.05
            high = kw_max if kw_max is not None else 3.0 * math.sqrt(data.n_features)
            if not 0 < low < high:
                raise click.ClickException("need 0 < --kw-min < --kw-max")
            bounds = (low, high)
        config = LimeConfig(1.0, num_samples, num_features, ridge, seed)
        search = SearchConfig(
            target_adherence, preliminary_calls, refinement_iterations,
            bounds, repetitions, confidence,
        )
        try:
            result = optimize_kernel_width(
                predictor, compute_stats(data), reference, config, search, jobs=jobs
            )
        except (ValueError, ProtocolError) as exc:
            raise click.ClickException(str(exc))
        _write_json(run.out / "optimization.json", result.to_dict(), "optimization")
    finally:
        _close_predictor(predictor)
    run.finish()
    click.echo(f"wrote {run.out / 'optimization.json'}")


if __name__ == "__main__":
    sys.exit(main())
