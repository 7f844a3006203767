import math

import numpy as np
import pytest
from scipy import stats

from pseudoiv import (DegeneracyError, split_ci, split_estimator,
                      split_variance, split_weight_matrix, ols, tsls)


class TestTsls:
    def test_single_instrument_equals_wald_ratio(self, rng):
        for _ in range(10):
            z = rng.standard_normal((40, 1))
            D = 2.0 * z[:, 0] + rng.standard_normal(40)
            Y = 1.5 * D + rng.standard_normal(40)
            est = tsls(z, D, Y)
            wald = float(z[:, 0] @ Y) / float(z[:, 0] @ D)
            assert abs(est.beta_hat - wald) < 1e-12

    def test_instrument_equal_to_exposure_gives_ols(self, rng):
        D = rng.standard_normal(50)
        Y = 0.7 * D + rng.standard_normal(50)
        est = tsls(D.reshape(-1, 1), D, Y)
        slope = float(D @ Y) / float(D @ D)
        assert est.beta_hat == pytest.approx(slope, rel=1e-12)

    def test_matrix_formula(self, rng):
        Z = rng.standard_normal((60, 3))
        D = Z @ np.array([1.0, -1.0, 0.5]) + rng.standard_normal(60)
        Y = 2.0 * D + rng.standard_normal(60)
        est = tsls(Z, D, Y)
        P = Z @ np.linalg.inv(Z.T @ Z) @ Z.T
        beta = float(D @ P @ Y) / float(D @ P @ D)
        sigma2 = float(np.sum((Y - beta * D) ** 2)) / 60
        se = math.sqrt(sigma2 / float(D @ P @ D))
        assert est.beta_hat == pytest.approx(beta, rel=1e-12)
        assert est.se == pytest.approx(se, rel=1e-12)
        assert est.n_used == 60
        assert est.method == "tsls"

    def test_ci_uses_normal_quantile(self, rng):
        Z = rng.standard_normal((50, 2))
        D = Z[:, 0] + rng.standard_normal(50)
        Y = D + rng.standard_normal(50)
        est = tsls(Z, D, Y, alpha=0.05)
        z975 = stats.norm.ppf(0.975)
        assert est.ci_high - est.ci_low == pytest.approx(2 * z975 * est.se,
                                                         rel=1e-12)

    def test_degenerate_instruments(self, rng):
        Z = rng.standard_normal((30, 1))
        D = rng.standard_normal(30)
        D_orth = D - Z[:, 0] * (Z[:, 0] @ D) / (Z[:, 0] @ Z[:, 0])
        with pytest.raises(DegeneracyError):
            tsls(Z, D_orth, rng.standard_normal(30))


class TestOls:
    def test_slope(self, rng):
        x = rng.standard_normal(40)
        y = 3.0 * x + rng.standard_normal(40)
        est = ols(x, y)
        assert est.beta_hat == pytest.approx(float(x @ y) / float(x @ x),
                                             rel=1e-12)
        assert est.method == "ols"


class TestSplitWeightMatrix:
    def test_schur_complement_hand_case(self):
        Sigma = np.array([[4.0, 1.0, 0.5],
                          [1.0, 3.0, 0.2],
                          [0.5, 0.2, 2.0]])
        W = split_weight_matrix(Sigma, [0, 2])
        # A - B C^{-1} B' with A the S4 block and C the complement block
        A = Sigma[np.ix_([0, 2], [0, 2])]
        B = Sigma[np.ix_([0, 2], [1])]
        C = Sigma[np.ix_([1], [1])]
        expect = A - B @ np.linalg.inv(C) @ B.T
        assert np.allclose(W, expect, atol=1e-14)

    def test_full_set_returns_block(self):
        Sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
        W = split_weight_matrix(Sigma, [0, 1])
        assert np.allclose(W, Sigma)

    def test_positive_definite(self, rng):
        X = rng.standard_normal((100, 5))
        Sigma = X.T @ X / 100
        W = split_weight_matrix(Sigma, [0, 2, 3])
        eigvals = np.linalg.eigvalsh(W)
        assert np.all(eigvals > 0)


class TestSplitEstimator:
    def test_exact_proportionality(self, rng):
        gamma = rng.uniform(0.5, 2.0, size=4)
        Gamma = 1.7 * gamma
        W = np.eye(4)
        assert split_estimator(gamma, Gamma, W, [0, 1, 2, 3]) == pytest.approx(
            1.7, rel=1e-12)

    def test_weighted_formula(self, rng):
        gamma = rng.uniform(0.5, 2.0, size=3)
        Gamma = rng.uniform(0.5, 2.0, size=3)
        X = rng.standard_normal((50, 3))
        W = X.T @ X / 50
        S4 = [0, 2]
        g, G = gamma[S4], Gamma[S4]
        Wb = split_weight_matrix(W, [0, 1])  # any SPD 2x2 works here
        expect = float(g @ Wb @ G) / float(g @ Wb @ g)
        assert split_estimator(gamma, Gamma, Wb, S4) == pytest.approx(
            expect, rel=1e-12)


class TestSplitVariance:
    def test_formula(self, rng):
        gamma = np.array([1.0, 2.0])
        Gamma = np.array([2.0, 4.5])
        W = np.array([[1.5, 0.2], [0.2, 1.0]])
        thetas = (3.0, 2.0, 0.5)
        beta = split_estimator(gamma, Gamma, W, [0, 1])
        v = split_variance(beta, gamma, Gamma, W, [0, 1], thetas)
        t11, t22, t12 = thetas
        num = t11 + beta ** 2 * t22 - 2 * beta * t12
        expect = num / float(gamma @ W @ gamma)
        assert v == pytest.approx(expect, rel=1e-12)

    def test_nonpositive_numerator_floored(self, rng):
        gamma = np.array([1.0])
        Gamma = np.array([1.0])
        W = np.eye(1)
        import warnings
        with pytest.warns(Warning):
            v = split_variance(1.0, gamma, Gamma, W, [0], (0.0, 0.0, 1.0))
        assert v > 0


class TestSplitCi:
    def test_half_width(self):
        # se = sqrt(v / n2) = 0.2, z_{0.975} = 1.959964...
        est = split_ci(1.0, v_split=0.04 * 100, n2=100, alpha=0.05)
        z = stats.norm.ppf(0.975)
        assert est.se == pytest.approx(0.2, rel=1e-12)
        assert est.ci_high - est.ci_low == pytest.approx(2 * z * 0.2, rel=1e-12)
        assert est.method == "split"

    def test_serialization(self):
        d = split_ci(1.0, 1.0, 25, instruments=[3, 5]).to_dict()
        assert d["method"] == "split"
        assert d["instruments_used"] == [3, 5]
