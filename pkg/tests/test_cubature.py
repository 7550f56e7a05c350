"""Cubature rules, empirical measures, transport, and the moment oracle."""

import numpy as np
import pytest

from gaussfilt import DiscreteMeasure, RuleKind, cubature3, cubature5, empirical
from gaussfilt.cubature import moment_defect, moments, standard_rule, transform
from gaussfilt.errors import DimensionMismatch, InvalidDimension, Unsupported


class TestRuleKind:
    def test_empirical_needs_samples(self):
        with pytest.raises(ValueError):
            RuleKind("empirical")
        with pytest.raises(ValueError):
            empirical(1)

    def test_unknown_tag(self):
        with pytest.raises(ValueError):
            RuleKind("gauss-hermite")


class TestDiscreteMeasure:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to one"):
            DiscreteMeasure([0.5, 0.4], [[0.0], [1.0]])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([1.0], [[0.0], [1.0]])

    def test_negative_weights_allowed(self):
        DiscreteMeasure([1.5, -0.5], [[0.0], [1.0]])


class TestStandardRule:
    def test_degree3_k1(self):
        mu = standard_rule(cubature3(), 1)
        assert sorted(mu.points[:, 0]) == [-1.0, 1.0]
        assert np.allclose(mu.weights, 0.5)

    def test_degree5_k1_matches_three_point_hermite(self):
        mu = standard_rule(cubature5(), 1)
        pts = sorted(mu.points[:, 0])
        assert np.allclose(pts, [-np.sqrt(3.0), 0.0, np.sqrt(3.0)])
        order = np.argsort(mu.points[:, 0])
        assert np.allclose(mu.weights[order], [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])

    @pytest.mark.parametrize("k", range(1, 7))
    def test_support_sizes(self, k):
        assert standard_rule(cubature3(), k).size == 2 * k
        assert standard_rule(cubature5(), k).size == 2 * k * k + 1

    @pytest.mark.parametrize("k", range(1, 7))
    def test_moment_exactness(self, k):
        assert moment_defect(standard_rule(cubature3(), k), 3) <= 1e-12
        assert moment_defect(standard_rule(cubature5(), k), 5) <= 1e-12

    def test_degree5_negative_weights_beyond_dim4(self):
        mu = standard_rule(cubature5(), 5)
        assert np.min(mu.weights) < 0.0

    def test_invalid_dimension(self):
        with pytest.raises(InvalidDimension):
            standard_rule(cubature3(), 0)

    def test_empirical_requires_rng(self):
        with pytest.raises(ValueError):
            standard_rule(empirical(10), 2)

    def test_empirical_moments_converge(self):
        rng = np.random.default_rng(0)
        for n in (10 ** 3, 10 ** 5):
            mu = standard_rule(empirical(n), 3, rng)
            mean, cov = moments(mu)
            band = 4.0 / np.sqrt(n)
            assert np.max(np.abs(mean)) <= band
            assert np.max(np.abs(cov - np.eye(3))) <= band * np.sqrt(2.0) * 2.0


class TestTransform:
    def test_identity(self):
        mu = standard_rule(cubature3(), 2)
        out = transform(mu, np.zeros(2), np.eye(2))
        assert np.array_equal(out.points, mu.points)

    def test_scalar_affine(self):
        mu = standard_rule(cubature3(), 1)
        out = transform(mu, [2.0], [[3.0]])
        assert sorted(out.points[:, 0]) == [-1.0, 5.0]

    def test_pushes_moments_exactly(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 3))
        m = rng.standard_normal(3)
        mu = standard_rule(cubature3(), 3)
        mean, cov = moments(transform(mu, m, a))
        assert np.max(np.abs(mean - m)) <= 1e-12 * (1 + np.max(np.abs(m)))
        assert np.max(np.abs(cov - a @ a.T)) <= 1e-12 * (1 + np.max(np.abs(a @ a.T)))

    def test_dimension_mismatch(self):
        mu = standard_rule(cubature3(), 2)
        with pytest.raises(DimensionMismatch):
            transform(mu, np.zeros(3), np.eye(3))


class TestMoments:
    def test_single_point(self):
        mu = DiscreteMeasure([1.0], [[2.0, 3.0]])
        mean, cov = moments(mu)
        assert np.allclose(mean, [2.0, 3.0])
        assert np.allclose(cov, 0.0)

    def test_degree3_k2_standard(self):
        mean, cov = moments(standard_rule(cubature3(), 2))
        assert np.allclose(mean, 0.0)
        assert np.allclose(cov, np.eye(2))

    def test_two_point_hand_sum(self):
        mean, cov = moments(DiscreteMeasure([0.5, 0.5], [[-1.0], [1.0]]))
        assert np.allclose(mean, [0.0])
        assert np.allclose(cov, [[1.0]])


class TestMomentDefect:
    def test_degree3_exact_at_degree3(self):
        assert moment_defect(standard_rule(cubature3(), 2), 3) <= 1e-12

    def test_degree3_k1_fourth_moment_defect(self):
        # The two-point rule gives E[x^4] = 1 against the Gaussian's 3.
        assert np.isclose(moment_defect(standard_rule(cubature3(), 1), 4), 2.0)

    def test_degree5_exact_at_degree5(self):
        assert moment_defect(standard_rule(cubature5(), 2), 5) <= 1e-12

    def test_guard(self):
        mu = standard_rule(cubature3(), 2)
        with pytest.raises(Unsupported):
            moment_defect(mu, 7)
