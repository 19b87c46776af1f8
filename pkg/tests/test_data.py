import numpy as np
import pytest

from stablelime.data import (
    FeatureStats,
    TabularDataset,
    compute_stats,
    load_csv,
    standardize,
    standardize_matrix,
    stats_from_matrix,
    write_csv,
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_with_target_column(self, tmp_path):
        path = _write(tmp_path, "x,y\n1,2\n3,4\n5,6\n")
        data = load_csv(path, target_column="y")
        assert data.feature_names == ("x",)
        assert data.n_features == 1
        assert data.n_rows == 3
        np.testing.assert_array_equal(data.rows[:, 0], [1, 3, 5])
        np.testing.assert_array_equal(data.target, [2, 4, 6])

    def test_without_target(self, tmp_path):
        path = _write(tmp_path, "x,y\n1,2\n3,4\n5,6\n")
        data = load_csv(path)
        assert data.n_features == 2
        assert data.target is None

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = _write(tmp_path, "x,y\n1,2\n3,abc\n")
        with pytest.raises(ValueError, match=r"row 3.*'y'"):
            load_csv(path)

    def test_non_finite_cell_rejected(self, tmp_path):
        path = _write(tmp_path, "x\n1\nnan\n")
        with pytest.raises(ValueError, match="non-finite"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "absent.csv")

    def test_unknown_target_column(self, tmp_path):
        path = _write(tmp_path, "x,y\n1,2\n3,4\n")
        with pytest.raises(ValueError, match="unknown target column"):
            load_csv(path, target_column="z")

    def test_ragged_row_rejected(self, tmp_path):
        path = _write(tmp_path, "x,y\n1,2\n3\n")
        with pytest.raises(ValueError, match="row 3"):
            load_csv(path)

    def test_round_trip_preserves_values(self, tmp_path):
        rng = np.random.default_rng(3)
        data = TabularDataset(("a", "b"), rng.normal(size=(7, 2)), target=rng.normal(size=7))
        path = tmp_path / "round.csv"
        write_csv(data, path, target_name="t")
        back = load_csv(path, target_column="t")
        np.testing.assert_allclose(back.rows, data.rows, rtol=0, atol=1e-12)
        np.testing.assert_allclose(back.target, data.target, rtol=0, atol=1e-12)
        assert back.feature_names == data.feature_names


class TestDatasetInvariants:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            TabularDataset(("x",), [[1.0], [np.nan]])

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError, match="unique"):
            TabularDataset(("x", "x"), [[1.0, 2.0], [3.0, 4.0]])

    def test_rejects_empty_name(self):
        with pytest.raises(ValueError, match="non-empty"):
            TabularDataset(("x", ""), [[1.0, 2.0], [3.0, 4.0]])

    def test_rejects_single_row(self):
        with pytest.raises(ValueError, match="two rows"):
            TabularDataset(("x",), [[1.0]])

    def test_rejects_target_length_mismatch(self):
        with pytest.raises(ValueError):
            TabularDataset(("x",), [[1.0], [2.0]], target=[1.0])

    def test_does_not_freeze_caller_arrays(self):
        rows = np.ones((3, 1))
        data = TabularDataset(("x",), rows)
        rows[0, 0] = 5.0  # caller's array stays writable and detached
        assert data.rows[0, 0] == 1.0
        with pytest.raises(ValueError):
            data.rows[0, 0] = 9.0


class TestComputeStats:
    def test_constant_column(self):
        data = TabularDataset(("x",), [[0.0], [0.0], [0.0]])
        stats = compute_stats(data)
        assert stats.mean[0] == 0.0
        assert stats.std_dev[0] == 0.0

    def test_two_point_sample_convention(self):
        data = TabularDataset(("x",), [[1.0], [3.0]])
        stats = compute_stats(data)
        assert stats.mean[0] == 2.0
        assert stats.std_dev[0] == pytest.approx(np.sqrt(2.0), abs=1e-15)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(11)
        X = rng.normal(5.0, 3.0, size=(50, 3))
        stats = stats_from_matrix(X)
        for j in range(3):
            column = [float(v) for v in X[:, j]]
            mean = sum(column) / len(column)
            var = sum((v - mean) ** 2 for v in column) / (len(column) - 1)
            assert stats.mean[j] == pytest.approx(mean, rel=1e-12)
            assert stats.std_dev[j] == pytest.approx(var**0.5, rel=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 2))
        shuffled = X[rng.permutation(20)]
        a, b = stats_from_matrix(X), stats_from_matrix(shuffled)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
        np.testing.assert_allclose(a.std_dev, b.std_dev, atol=1e-12)


class TestStandardize:
    def test_mean_vector_maps_to_zero(self):
        stats = FeatureStats(("a", "b"), [1.5, -2.0], [0.5, 3.0])
        np.testing.assert_array_equal(standardize([1.5, -2.0], stats), [0.0, 0.0])

    def test_simple_case(self):
        stats = FeatureStats(("x",), [0.0], [2.0])
        np.testing.assert_array_equal(standardize([4.0], stats), [2.0])

    def test_constant_column_maps_to_zero(self):
        stats = FeatureStats(("x", "c"), [1.0, 7.0], [2.0, 0.0])
        np.testing.assert_array_equal(standardize([5.0, 123.0], stats), [2.0, 0.0])

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(9)
        mean, std = rng.normal(size=4), rng.uniform(0.1, 2.0, size=4)
        stats = FeatureStats(("a", "b", "c", "d"), mean, std)
        point = rng.normal(size=4)
        np.testing.assert_allclose(
            standardize(point, stats), (point - mean) / std, rtol=1e-14
        )

    def test_length_mismatch(self):
        stats = FeatureStats(("x",), [0.0], [1.0])
        with pytest.raises(ValueError, match="length"):
            standardize([1.0, 2.0], stats)

    def test_matrix_agrees_with_rowwise(self):
        rng = np.random.default_rng(2)
        stats = FeatureStats(("a", "b"), rng.normal(size=2), rng.uniform(0.5, 2, size=2))
        X = rng.normal(size=(6, 2))
        Z = standardize_matrix(X, stats)
        for i in range(6):
            np.testing.assert_allclose(Z[i], standardize(X[i], stats), atol=1e-15)
