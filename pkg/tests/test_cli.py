import json

import numpy as np
import pytest
from click.testing import CliRunner

from stablelime.cli import main
from stablelime.schemas import validate_payload
from stablelime.synthetic import CANONICAL_SEED

from conftest import HELPERS, PYTHON


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory, runner):
    out = tmp_path_factory.mktemp("toy")
    result = runner.invoke(main, ["toy", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture(scope="module")
def linear_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("lin") / "line.csv"
    rng = np.random.default_rng(0)
    x = rng.normal(0, 1, size=40)
    lines = ["x,y"] + [f"{repr(float(v))},{repr(float(2.0 * v + 1.0))}" for v in x]
    path.write_text("\n".join(lines) + "\n")
    return path


def _payload(path):
    return json.loads(path.read_text())


def _strip_timing(manifest):
    manifest = dict(manifest)
    manifest.pop("timing")
    return manifest


class TestToyCommand:
    def test_writes_expected_files(self, toy_run):
        assert (toy_run / "toy.csv").exists()
        assert (toy_run / "model.json").exists()
        assert (toy_run / "manifest.json").exists()

    def test_row_count_and_process_values(self, toy_run):
        lines = (toy_run / "toy.csv").read_text().strip().splitlines()
        assert lines[0] == "x,y"
        assert len(lines) == 21
        for line in lines[1:]:
            x, y = (float(v) for v in line.split(","))
            assert y == pytest.approx(np.sin(x) * x + 10.0, abs=1e-12)

    def test_seeded_rerun_is_identical(self, runner, toy_run, tmp_path):
        again = tmp_path / "again"
        result = runner.invoke(main, ["toy", "--out", str(again)])
        assert result.exit_code == 0
        assert (again / "toy.csv").read_bytes() == (toy_run / "toy.csv").read_bytes()
        assert (again / "model.json").read_bytes() == (toy_run / "model.json").read_bytes()
        assert _strip_timing(_payload(again / "manifest.json")) == _strip_timing(
            _payload(toy_run / "manifest.json")
        )

    def test_model_and_manifest_validate(self, toy_run):
        validate_payload("polynomial_model", _payload(toy_run / "model.json"))
        validate_payload("manifest", _payload(toy_run / "manifest.json"))
        manifest = _payload(toy_run / "manifest.json")
        assert manifest["command"] == "toy"
        assert manifest["seed"] == CANONICAL_SEED


class TestExplainCommand:
    def test_linear_slope_recovered(self, runner, linear_csv, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(main, [
            "explain", "--data", str(linear_csv), "--target-column", "y",
            "--predictor", f"exec:{PYTHON} {HELPERS / 'identity_server.py'}",
            "--point", "0.0", "--kernel-width", "1.0",
            "--num-samples", "500", "--seed", "3", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payload = _payload(out / "explanation.json")
        validate_payload("explanation", payload)
        assert payload["features"][0]["coefficient"] == pytest.approx(1.0, abs=1e-7)

    def test_ridge_lowers_r_squared_on_toy(self, runner, toy_run, tmp_path):
        scores = {}
        for lam in ("0", "1"):
            out = tmp_path / f"lam{lam}"
            result = runner.invoke(main, [
                "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
                "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
                "--row", "4", "--kernel-width", "0.15", "--num-samples", "1000",
                "--ridge", lam, "--seed", "0", "--out", str(out),
            ])
            assert result.exit_code == 0, result.output
            scores[lam] = _payload(out / "explanation.json")["r_squared"]
        assert scores["1"] < scores["0"]

    def test_same_seed_byte_identical(self, runner, toy_run, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
                "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
                "--row", "4", "--kernel-width", "0.3", "--seed", "11", "--out", str(out),
            ])
            assert result.exit_code == 0
            blobs.append((out / "explanation.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_row_and_point_mutually_exclusive(self, runner, toy_run, tmp_path):
        result = runner.invoke(main, [
            "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "1", "--point", "2.0", "--kernel-width", "0.3",
            "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0
        assert "exactly one" in result.output

    def test_row_out_of_range(self, runner, toy_run, tmp_path):
        result = runner.invoke(main, [
            "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "99", "--kernel-width", "0.3", "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0
        assert "outside dataset" in result.output

    def test_bad_cell_reported(self, runner, toy_run, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n3,oops\n")
        result = runner.invoke(main, [
            "explain", "--data", str(bad), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "0", "--kernel-width", "0.3", "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0
        assert "row 3" in result.output

    def test_missing_data_file(self, runner, toy_run, tmp_path):
        result = runner.invoke(main, [
            "explain", "--data", str(tmp_path / "absent.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "0", "--kernel-width", "0.3", "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0
        assert "no such file" in result.output

    def test_broken_external_predictor_reported(self, runner, toy_run, tmp_path):
        result = runner.invoke(main, [
            "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"exec:{PYTHON} {HELPERS / 'broken_server.py'} garbage",
            "--row", "0", "--kernel-width", "0.3", "--num-samples", "200",
            "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0
        assert "non-numeric" in result.output

    def test_unknown_predictor_spec(self, runner, toy_run, tmp_path):
        result = runner.invoke(main, [
            "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", "magic:model", "--row", "0", "--kernel-width", "0.3",
            "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0
        assert "unknown predictor spec" in result.output


class TestStabilityCommand:
    def test_linear_box_fully_stable(self, runner, linear_csv, tmp_path):
        out = tmp_path / "stab"
        result = runner.invoke(main, [
            "stability", "--data", str(linear_csv), "--target-column", "y",
            "--predictor", f"exec:{PYTHON} {HELPERS / 'identity_server.py'}",
            "--point", "0.5", "--kernel-width", "0.8", "--num-samples", "400",
            "--repetitions", "3", "--seed", "0", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payload = _payload(out / "stability.json")
        validate_payload("stability", payload)
        assert payload["csi"] == 1.0
        assert payload["vsi"] == 1.0

    def test_two_repetitions_single_pair(self, runner, toy_run, tmp_path):
        out = tmp_path / "pair"
        result = runner.invoke(main, [
            "stability", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "4", "--kernel-width", "0.3", "--num-samples", "500",
            "--repetitions", "2", "--seed", "1", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payload = _payload(out / "stability.json")
        assert len(payload["explanations"]) == 2
        assert payload["csi"] in (0.0, 1.0)  # a single pair either agrees or not
        assert len(payload["pairwise_jaccard"]) == 2


class TestScanCommand:
    def test_writes_csv_and_json(self, runner, toy_run, tmp_path):
        out = tmp_path / "scan"
        result = runner.invoke(main, [
            "scan", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "4", "--kw-min", "0.1", "--kw-max", "1.0", "--steps", "6",
            "--num-samples", "500", "--repetitions", "3", "--seed", "0",
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payload = _payload(out / "scan.json")
        validate_payload("scan", payload)
        lines = (out / "scan.csv").read_text().strip().splitlines()
        assert lines[0] == "kw,r_squared,csi,vsi"
        assert len(lines) == 7
        # CSV and JSON carry the same numbers
        first = lines[1].split(",")
        assert float(first[0]) == payload["points"][0]["kernel_width"]
        assert float(first[1]) == payload["points"][0]["r_squared"]

    def test_deterministic_outputs(self, runner, toy_run, tmp_path):
        blobs = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "scan", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
                "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
                "--row", "4", "--kw-min", "0.1", "--kw-max", "1.0", "--steps", "5",
                "--num-samples", "400", "--repetitions", "3", "--seed", "5",
                "--out", str(out),
            ])
            assert result.exit_code == 0
            blobs.append((out / "scan.csv").read_bytes() + (out / "scan.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_bad_grid_rejected(self, runner, toy_run, tmp_path):
        result = runner.invoke(main, [
            "scan", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "4", "--kw-min", "2.0", "--kw-max", "1.0",
            "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0


class TestOptimizeCommand:
    def test_trace_length_and_schema(self, runner, toy_run, tmp_path):
        out = tmp_path / "opt"
        result = runner.invoke(main, [
            "optimize", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "4", "--target", "0.9", "--preliminary", "5", "--iterations", "5",
            "--num-samples", "500", "--repetitions", "3", "--seed", "0",
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payload = _payload(out / "optimization.json")
        validate_payload("optimization", payload)
        assert len(payload["trace"]) == 10
        assert payload["best_loss"] == max(t["loss"] for t in payload["trace"])

    def test_deterministic(self, runner, toy_run, tmp_path):
        blobs = []
        for name in ("o1", "o2"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "optimize", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
                "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
                "--row", "4", "--preliminary", "4", "--iterations", "4",
                "--num-samples", "400", "--repetitions", "3", "--seed", "2",
                "--out", str(out),
            ])
            assert result.exit_code == 0, result.output
            blobs.append((out / "optimization.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_external_predictor_round_trip(self, runner, toy_run, tmp_path):
        # exec: predictor drives the whole pipeline through the protocol
        out = tmp_path / "ext"
        result = runner.invoke(main, [
            "optimize", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"exec:{PYTHON} {HELPERS / 'poly_server.py'} {toy_run / 'model.json'}",
            "--row", "4", "--preliminary", "4", "--iterations", "3",
            "--num-samples", "300", "--repetitions", "3", "--seed", "0",
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        validate_payload("optimization", _payload(out / "optimization.json"))


class TestManifest:
    def test_inputs_digested(self, runner, toy_run, tmp_path):
        out = tmp_path / "m"
        result = runner.invoke(main, [
            "explain", "--data", str(toy_run / "toy.csv"), "--target-column", "y",
            "--predictor", f"builtin:poly5:{toy_run / 'model.json'}",
            "--row", "4", "--kernel-width", "0.3", "--out", str(out),
        ])
        assert result.exit_code == 0
        manifest = _payload(out / "manifest.json")
        validate_payload("manifest", manifest)
        assert str(toy_run / "toy.csv") in manifest["inputs"]
        assert str(toy_run / "model.json") in manifest["inputs"]
        assert manifest["config"]["kernel_width"] == 0.3
