import math

import numpy as np
import pytest

from pseudoiv import (DebiasedFit, DegeneracyError, DimensionError,
                      NodewisePrecision, RngStream, ThresholdPolicy,
                      generate_pseudos, joint_threshold, marginal_screen,
                      mode_find, ratio_estimates, remove_spurious,
                      se_ratio_difference, vote_naive)


def make_fit(estimates, ses):
    return DebiasedFit(estimates=np.asarray(estimates, dtype=float),
                       ses=np.asarray(ses, dtype=float),
                       residual_ss_over_n=1.0, lasso=None)


class TestThresholdPolicy:
    def test_joint_value(self):
        # sqrt(omega * log(max(n, s))) at omega=2.01, n=500, s=100
        policy = ThresholdPolicy(omega=2.01, n=500, s=100)
        assert policy.joint_threshold_value == pytest.approx(
            math.sqrt(2.01 * math.log(500)), rel=1e-14)

    def test_mode_value(self):
        policy = ThresholdPolicy(omega=2.01, n=500, s=100)
        assert policy.mode_threshold_value == pytest.approx(
            math.sqrt(2.01 ** 2 * math.log(500)), rel=1e-14)

    def test_s_dominates_when_larger(self):
        policy = ThresholdPolicy(omega=2.0, n=100, s=5000)
        assert policy.log_scale == pytest.approx(math.log(5000))

    def test_monotone_in_omega(self, rng):
        for _ in range(100):
            n = int(rng.integers(10, 10_000))
            s = int(rng.integers(2, 10_000))
            w1, w2 = sorted(rng.uniform(0.5, 5.0, size=2))
            a = ThresholdPolicy(omega=w1, n=n, s=s)
            b = ThresholdPolicy(omega=w2, n=n, s=s)
            assert a.joint_threshold_value <= b.joint_threshold_value
            assert a.mode_threshold_value <= b.mode_threshold_value


class TestMarginalScreen:
    def test_hand_example(self):
        # rho_j = |Z_j'D| / Z_j'Z_j computed by hand
        Z = np.array([[1.0, 2.0, 0.0],
                      [1.0, -2.0, 1.0],
                      [-2.0, 0.0, 1.0]])
        D = np.array([1.0, 1.0, -1.0])
        # scores: |1+1+2|/6 = 2/3, |2-2|/8 = 0, |0+1-1|/2 = 0
        assert marginal_screen(Z, D, 1) == [0]
        assert marginal_screen(Z, D, 3)[0] == 0

    def test_tie_break_prefers_smaller_index(self):
        Z = np.array([[1.0, 1.0], [1.0, 1.0], [-1.0, -1.0]])
        D = np.array([1.0, 1.0, 1.0])
        assert marginal_screen(Z, D, 2) == [0, 1]

    def test_bad_s(self, rng):
        Z = rng.standard_normal((10, 3))
        D = rng.standard_normal(10)
        with pytest.raises(DimensionError):
            marginal_screen(Z, D, 0)
        with pytest.raises(DimensionError):
            marginal_screen(Z, D, 4)

    def test_zero_norm_column(self, rng):
        Z = rng.standard_normal((10, 2))
        Z[:, 1] = 0.0
        with pytest.raises(DegeneracyError):
            marginal_screen(Z, rng.standard_normal(10), 1)


class TestGeneratePseudos:
    def test_gram_preserved(self, rng):
        Z = rng.standard_normal((40, 6))
        Zp = generate_pseudos(Z, RngStream(11))
        G1 = Z.T @ Z
        G2 = Zp.T @ Zp
        assert np.max(np.abs(G1 - G2)) <= 1e-12 * max(1.0, np.max(np.abs(G1)))

    def test_is_a_row_permutation(self, rng):
        Z = rng.standard_normal((15, 3))
        Zp = generate_pseudos(Z, RngStream(5))
        a = sorted(map(tuple, Z))
        b = sorted(map(tuple, Zp))
        assert a == b
        assert not np.array_equal(Z, Zp)

    def test_reproducible(self, rng):
        Z = rng.standard_normal((15, 3))
        assert np.array_equal(generate_pseudos(Z, RngStream(5)),
                              generate_pseudos(Z, RngStream(5)))


class TestJointThreshold:
    def test_hand_case(self):
        policy = ThresholdPolicy(omega=4.0, n=math.e ** 1, s=1)  # delta = 2
        fit = make_fit([3.0, -3.0, 1.9, -1.9, 2.0], [1.0] * 5)
        assert joint_threshold(fit, policy) == [0, 1, 4]


class TestRatioEstimates:
    def test_values(self):
        dg = make_fit([2.0, 4.0], [1, 1])
        dG = make_fit([1.0, 2.0], [1, 1])
        assert ratio_estimates(dg, dG, [0, 1]) == {0: 0.5, 1: 0.5}

    def test_zero_gamma(self):
        dg = make_fit([0.0], [1])
        dG = make_fit([1.0], [1])
        with pytest.raises(DegeneracyError):
            ratio_estimates(dg, dG, [0])


class TestRemoveSpurious:
    def test_hand_case(self):
        S2 = [0, 1, 2, 3, 4]
        ratios = {0: 1.0, 1: 1.3, 2: 1.35, 3: 1.4, 4: 2.0}
        S3, span = remove_spurious(S2, ratios, pseudo_positions={1, 3})
        assert S3 == [0, 4]
        assert span == (1.3, 1.4)

    def test_boundary_is_closed(self):
        S2 = [0, 1, 2]
        ratios = {0: 1.3, 1: 1.3, 2: 1.3000001}
        S3, span = remove_spurious(S2, ratios, pseudo_positions={1})
        assert S3 == [2]
        assert span == (1.3, 1.3)

    def test_without_pseudos_everything_survives(self):
        S3, span = remove_spurious([5, 7], {5: 1.0, 7: 2.0}, pseudo_positions=set())
        assert S3 == [5, 7]
        assert span is None


class TestSeRatioDifference:
    def _setup(self):
        g = make_fit([2.0, 1.0], [0.1, 0.1])
        G = make_fit([4.0, 3.0], [0.1, 0.1])
        M = np.array([[2.0, 0.5], [0.5, 1.0]])
        thetas = (3.0, 2.0, 1.0)
        return g, G, M, thetas

    def test_hand_value(self):
        g, G, M, thetas = self._setup()
        t11, t22, t12 = thetas
        n = 100

        def v(a, b, ga, gb, ra, rb, m):
            return m / (ga * gb) * (t11 - (ra + rb) * t12 + ra * rb * t22)

        vjj = v(0, 0, 2, 2, 2, 2, 2.0)
        vll = v(1, 1, 1, 1, 3, 3, 1.0)
        vjl = v(0, 1, 2, 1, 2, 3, 0.5)
        expect = math.sqrt((vjj - 2 * vjl + vll) / n)
        got = se_ratio_difference(0, 1, g, G, M, thetas, n)
        assert got == pytest.approx(expect, rel=1e-14)

    def test_symmetric(self):
        g, G, M, thetas = self._setup()
        assert se_ratio_difference(0, 1, g, G, M, thetas, 50) == pytest.approx(
            se_ratio_difference(1, 0, g, G, M, thetas, 50), rel=1e-14)

    def test_self_pair_floors_silently(self):
        g, G, M, thetas = self._setup()
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            se = se_ratio_difference(0, 0, g, G, M, thetas, 50)
        assert se > 0

    def test_accepts_nodewise_precision(self):
        g, G, M, thetas = self._setup()
        prec = NodewisePrecision(M=M, tau2=np.ones(2), thetas=np.zeros((2, 2)),
                                 lambdas=(0.0, 0.0))
        assert se_ratio_difference(0, 1, g, G, prec, thetas, 50) == \
            se_ratio_difference(0, 1, g, G, M, thetas, 50)


class TestModeFind:
    def test_two_against_one(self):
        policy = ThresholdPolicy(omega=1.0, n=int(math.e ** 4), s=1)  # thr = 2
        ratios = {0: 2.00, 1: 2.01, 2: 5.0}
        S4, votes = mode_find([0, 1, 2], ratios, lambda j, l: 0.1, policy)
        assert votes == {0: 2, 1: 2, 2: 1}
        assert S4 == [0, 1]

    def test_empty_input(self):
        policy = ThresholdPolicy(omega=1.0, n=10, s=1)
        with pytest.raises(DegeneracyError):
            mode_find([], {}, lambda j, l: 1.0, policy)

    def test_singleton(self):
        policy = ThresholdPolicy(omega=1.0, n=10, s=1)
        S4, votes = mode_find([3], {3: 1.5}, lambda j, l: 1.0, policy)
        assert S4 == [3]
        assert votes == {3: 1}


class TestVoteNaive:
    def test_majority_cluster_wins(self):
        # three candidates share one ratio, two share another; with a small
        # noise scale only the big cluster survives
        g = make_fit([1.0, 1.0, 1.0, 1.0, 1.0], [0.01] * 5)
        G = make_fit([2.0, 2.0, 2.0, 5.0, 5.0], [0.01] * 5)
        M = np.eye(5)
        thetas = (1e-6, 1e-6, 0.0)
        policy = ThresholdPolicy(omega=1.0, n=100, s=5)
        S4, votes = vote_naive([0, 1, 2, 3, 4], g, G, M_wrap(M), thetas, policy)
        assert S4 == [0, 1, 2]
        assert votes[0] == 3 and votes[3] == 2

    def test_asymmetric_acceptance(self):
        # voter variance depends on the voter's ratio, so acceptance need not
        # be symmetric: candidate with tiny gamma is easy to accept
        g = make_fit([1.0, 0.02], [0.01, 0.01])
        G = make_fit([2.0, 0.0], [0.01, 0.01])
        M = np.eye(2)
        thetas = (0.02, 0.02, 0.0)
        policy = ThresholdPolicy(omega=1.0, n=100, s=2)
        S4, votes = vote_naive([0, 1], g, G, M_wrap(M), thetas, policy)
        # candidate 1 collects both votes: |G_1 - g_1 b| stays small for both
        assert votes[1] == 2
        assert votes[0] == 1
        assert S4 == [1]


def M_wrap(M):
    return NodewisePrecision(M=M, tau2=np.ones(len(M)),
                             thetas=np.zeros_like(M),
                             lambdas=(0.0,) * len(M))
