import numpy as np
import pytest

from pseudoiv import (ConfigurationError, DataError, Dataset, DimensionError,
                      LinearAlgebraError, ParseError, RngStream, center,
                      load_csv, partial_out_covariates)


class TestDataset:
    def test_shapes_and_properties(self, rng):
        Z = rng.standard_normal((10, 4))
        ds = Dataset(Z=Z, D=rng.standard_normal(10), Y=rng.standard_normal(10))
        assert ds.n == 10
        assert ds.p == 4
        assert not ds.pseudo_mask.any()

    def test_mismatched_lengths(self, rng):
        Z = rng.standard_normal((10, 4))
        with pytest.raises(DimensionError):
            Dataset(Z=Z, D=rng.standard_normal(9), Y=rng.standard_normal(10))

    def test_rejects_nonfinite(self, rng):
        Z = rng.standard_normal((10, 4))
        D = rng.standard_normal(10)
        D[3] = np.nan
        with pytest.raises(DataError):
            Dataset(Z=Z, D=D, Y=rng.standard_normal(10))

    def test_centered_flag_is_checked(self, rng):
        Z = rng.standard_normal((10, 4)) + 5.0
        with pytest.raises(DataError):
            Dataset(Z=Z, D=rng.standard_normal(10), Y=rng.standard_normal(10),
                    centered=True)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(7).generator().standard_normal(5)
        b = RngStream(7).generator().standard_normal(5)
        assert np.array_equal(a, b)

    def test_children_are_distinct(self):
        base = RngStream(7)
        a = base.child(0).generator().standard_normal(5)
        b = base.child(1).generator().standard_normal(5)
        c = base.generator().standard_normal(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_hashable_and_frozen(self):
        assert hash(RngStream(1)) == hash(RngStream(1))
        with pytest.raises(AttributeError):
            RngStream(1).master_seed = 2


class TestLoadCsv:
    def _write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return path

    def test_roundtrip(self, tmp_path):
        path = self._write(tmp_path, "d,y,z1,z2\n1,2,3,4\n5,6,7,8\n9,1,2,3\n")
        ds = load_csv(path, exposure_col="d", outcome_col="y")
        assert ds.n == 3 and ds.p == 2
        assert np.array_equal(ds.D, [1.0, 5.0, 9.0])
        assert np.array_equal(ds.Z[:, 1], [4.0, 8.0, 3.0])

    def test_covariates(self, tmp_path):
        path = self._write(tmp_path, "d,y,x,z\n1,2,3,4\n5,6,7,8\n")
        ds = load_csv(path, exposure_col="d", outcome_col="y",
                      covariate_cols=("x",))
        assert ds.X.shape == (2, 1)
        assert ds.p == 1

    def test_missing_column(self, tmp_path):
        path = self._write(tmp_path, "d,y,z\n1,2,3\n4,5,6\n")
        with pytest.raises(ConfigurationError):
            load_csv(path, exposure_col="d", outcome_col="missing")

    def test_parse_error_reports_location(self, tmp_path):
        path = self._write(tmp_path, "d,y,z\n1,2,3\n4,oops,6\n")
        with pytest.raises(ParseError) as err:
            load_csv(path, exposure_col="d", outcome_col="y")
        assert err.value.row == 3
        assert err.value.column == "y"

    def test_ragged_row(self, tmp_path):
        path = self._write(tmp_path, "d,y,z\n1,2,3\n4,5\n")
        with pytest.raises(ParseError):
            load_csv(path, exposure_col="d", outcome_col="y")


class TestCenter:
    def test_centering(self, rng):
        ds = Dataset(Z=rng.standard_normal((50, 3)) + 2.0,
                     D=rng.standard_normal(50) - 1.0,
                     Y=rng.standard_normal(50) + 0.5)
        out = center(ds)
        assert out.centered
        assert np.allclose(out.Z.mean(axis=0), 0.0, atol=1e-12)
        assert abs(out.D.mean()) < 1e-12
        assert abs(out.Y.mean()) < 1e-12

    def test_scaling(self, rng):
        ds = Dataset(Z=3.0 * rng.standard_normal((50, 3)),
                     D=rng.standard_normal(50), Y=rng.standard_normal(50))
        out = center(ds, scale=True)
        assert np.allclose(out.Z.std(axis=0), 1.0, atol=1e-12)


class TestPartialOut:
    def test_residuals_orthogonal_to_covariates(self, rng):
        X = rng.standard_normal((80, 2))
        ds = center(Dataset(Z=rng.standard_normal((80, 3)),
                            D=rng.standard_normal(80),
                            Y=rng.standard_normal(80), X=X))
        out = partial_out_covariates(ds)
        assert out.X is None
        assert np.allclose(ds.X.T @ out.D, 0.0, atol=1e-8)
        assert np.allclose(ds.X.T @ out.Y, 0.0, atol=1e-8)
        assert np.allclose(ds.X.T @ out.Z, 0.0, atol=1e-8)

    def test_requires_centered(self, rng):
        ds = Dataset(Z=rng.standard_normal((20, 2)), D=rng.standard_normal(20),
                     Y=rng.standard_normal(20), X=rng.standard_normal((20, 1)))
        with pytest.raises(DataError):
            partial_out_covariates(ds)

    def test_rank_deficient_covariates(self, rng):
        X = rng.standard_normal((30, 1))
        X = np.hstack([X, X])
        ds = center(Dataset(Z=rng.standard_normal((30, 2)),
                            D=rng.standard_normal(30),
                            Y=rng.standard_normal(30), X=X))
        with pytest.raises(LinearAlgebraError):
            partial_out_covariates(ds)

    def test_noop_without_covariates(self, rng):
        ds = center(Dataset(Z=rng.standard_normal((20, 2)),
                            D=rng.standard_normal(20),
                            Y=rng.standard_normal(20)))
        assert partial_out_covariates(ds) is ds
