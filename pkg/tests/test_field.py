import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracfield.errors import DegenerateInput, FactorizationFailure
from fracfield.field import (
    FieldParams,
    PointSet,
    build_covariance,
    covariance,
    factor_covariance,
    kappa,
    proof_correlations,
    sample_pair,
    semivariogram,
)

finite_coord = st.floats(-2.0, 2.0)
point = st.tuples(finite_coord, finite_coord)


class TestCovariance:
    def test_diagonal_collapses_to_variance(self):
        p = FieldParams(sigma2=1.0, alpha=0.5)
        x = (0.3, 0.4)
        assert covariance(p, x, x) == pytest.approx(0.5**0.5, rel=1e-12)

    def test_origin_annihilates(self):
        p = FieldParams(sigma2=1.7, alpha=0.3)
        assert covariance(p, (0.2, 0.1), (0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        # (2/2) (1 + 1 - sqrt(2)^0.8) = 2 - 2^0.4
        p = FieldParams(sigma2=2.0, alpha=0.8)
        assert covariance(p, (1.0, 0.0), (0.0, 1.0)) == pytest.approx(
            2.0 - 2.0**0.4, rel=1e-12
        )

    @given(x=point, y=point)
    def test_symmetry(self, x, y):
        p = FieldParams(sigma2=1.3, alpha=0.6)
        assert covariance(p, x, y) == covariance(p, y, x)

    @given(x=point, y=point, lam=st.floats(0.01, 50.0))
    @settings(max_examples=200)
    def test_self_similarity(self, x, y, lam):
        p = FieldParams(sigma2=1.0, alpha=0.45)
        base = covariance(p, x, y)
        scaled = covariance(p, np.multiply(lam, x), np.multiply(lam, y))
        assert scaled == pytest.approx(lam**p.alpha * base, rel=1e-12, abs=1e-12)

    def test_stationary_increments(self, rng_for):
        # var(W(x+h) - W(x0+h)) from the covariance must not depend on h
        p = FieldParams(sigma2=2.2, alpha=0.7)
        x, x0 = np.array([0.4, -0.1]), np.array([-0.3, 0.2])

        def incr_var(h):
            return (
                covariance(p, x + h, x + h)
                - 2 * covariance(p, x + h, x0 + h)
                + covariance(p, x0 + h, x0 + h)
            )

        ref = incr_var(np.zeros(2))
        for h in rng_for("h").uniform(-3, 3, size=(10, 2)):
            assert incr_var(h) == pytest.approx(ref, rel=1e-10)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            FieldParams(sigma2=-1.0, alpha=0.5)
        with pytest.raises(ValueError):
            FieldParams(sigma2=1.0, alpha=1.0)
        with pytest.raises(ValueError):
            FieldParams(sigma2=1.0, alpha=0.0)


class TestSemivariogram:
    def test_zero_at_origin(self):
        assert semivariogram(FieldParams(1.0, 0.5), (0.0, 0.0)) == 0.0

    def test_unit_norm(self):
        assert semivariogram(FieldParams(1.0, 0.5), (1.0, 0.0)) == pytest.approx(0.5)

    def test_hand_value(self):
        # 1.5 * 0.5^0.6
        got = semivariogram(FieldParams(3.0, 0.6), (0.5, 0.0))
        assert got == pytest.approx(1.5 * 0.5**0.6, rel=1e-12)

    @given(x=point)
    def test_half_of_variance(self, x):
        p = FieldParams(1.9, 0.35)
        assert semivariogram(p, x) == pytest.approx(0.5 * covariance(p, x, x), rel=1e-12)


class TestPointSet:
    def test_rejects_close_points(self):
        with pytest.raises(DegenerateInput):
            PointSet(np.array([[0.1, 0.1], [0.1, 0.1 + 1e-10]]))

    def test_rejects_bad_roles(self):
        with pytest.raises(DegenerateInput):
            PointSet(np.array([[0.0, 0.0]]), np.array(["weird"]))

    def test_order_is_stable(self):
        pts = PointSet(np.array([[0.5, 0.5], [-0.3, 0.2]]))
        assert pts.points[0].tolist() == [0.5, 0.5]
        assert len(pts) == 2

    def test_concatenate_keeps_roles(self):
        a = PointSet(np.array([[0.1, 0.2]]), np.array(["poisson"]))
        b = PointSet(np.array([[0.3, 0.4]]), np.array(["grid"]))
        joint = PointSet.concatenate([a, b])
        assert list(joint.roles) == ["poisson", "grid"]


class TestBuildCovariance:
    def test_single_origin(self):
        p = FieldParams(1.0, 0.5)
        cov = build_covariance(p, PointSet(np.array([[0.0, 0.0]])))
        assert cov.shape == (1, 1)
        assert 0 < cov[0, 0] <= 1e-12

    def test_two_points_with_origin(self):
        p = FieldParams(1.5, 0.4)
        x = np.array([0.3, -0.2])
        cov = build_covariance(p, PointSet(np.array([[0.0, 0.0], x])))
        assert cov[0, 1] == pytest.approx(0.0, abs=1e-15)
        assert cov[1, 1] == pytest.approx(
            1.5 * np.linalg.norm(x) ** 0.4, rel=1e-12, abs=1e-11
        )

    def test_psd_before_nugget(self, rng_for):
        # eigenvalue oracle on small random instances
        p = FieldParams(1.0, 0.5)
        for trial in range(5):
            pts = PointSet(rng_for("pts", trial).uniform(-0.5, 0.5, size=(3, 2)))
            cov = build_covariance(p, pts)
            eigenvalues = np.linalg.eigvalsh(cov)
            assert eigenvalues.min() >= -1e-10

    def test_matches_pairwise_covariance(self, rng_for):
        p = FieldParams(1.3, 0.65)
        pts = PointSet(rng_for("pts").uniform(-0.5, 0.5, size=(6, 2)))
        cov = build_covariance(p, pts)
        for i in range(6):
            for j in range(6):
                expected = covariance(p, pts.points[i], pts.points[j])
                tol = 1e-11 if i == j else 1e-12
                assert cov[i, j] == pytest.approx(expected, abs=tol)

    def test_factorization_failure_on_indefinite(self):
        with pytest.raises(FactorizationFailure):
            factor_covariance(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestSamplePair:
    def test_origin_only_is_nugget_noise(self, rng_for):
        p = FieldParams(1.0, 0.5)
        scene = sample_pair(p, PointSet(np.array([[0.0, 0.0]])), rng_for("draw"))
        assert abs(scene.w1[0]) <= 1e-5
        assert abs(scene.w2[0]) <= 1e-5

    def test_deterministic_given_stream(self, rng_for):
        p = FieldParams(1.0, 0.5)
        pts = PointSet(np.array([[0.1, 0.2], [-0.3, 0.4], [0.25, -0.15]]))
        s1 = sample_pair(p, pts, rng_for("same"))
        s2 = sample_pair(p, pts, rng_for("same"))
        assert s1.w1.tobytes() == s2.w1.tobytes()
        assert s1.w2.tobytes() == s2.w2.tobytes()

    def test_empirical_covariance(self, rng_for):
        # Monte Carlo oracle: empirical covariance within 3 standard errors
        p = FieldParams(1.0, 0.5)
        pts = PointSet(np.array([[0.3, 0.1], [-0.2, 0.25], [0.05, -0.4]]))
        target = build_covariance(p, pts)
        factor = factor_covariance(target)
        z = rng_for("z").standard_normal((3, 20000))
        draws = (factor @ z).T
        products = draws[:, :, None] * draws[:, None, :]
        emp = products.mean(axis=0)
        se = products.std(axis=0, ddof=1) / np.sqrt(len(draws))
        assert np.all(np.abs(emp - target) < 3.0 * se + 1e-12)

    def test_fields_independent(self, rng_for):
        p = FieldParams(1.0, 0.5)
        pts = PointSet(np.array([[0.3, 0.1], [-0.2, 0.25]]))
        rng = rng_for("draw")
        w1 = np.empty(4000)
        w2 = np.empty(4000)
        for i in range(4000):
            scene = sample_pair(p, pts, rng)
            w1[i], w2[i] = scene.w1[0], scene.w2[0]
        corr = np.corrcoef(w1, w2)[0, 1]
        assert abs(corr) < 3.0 / np.sqrt(4000)

    def test_scene_derived_fields(self, rng_for):
        p = FieldParams(1.0, 0.5)
        pts = PointSet(np.array([[0.3, 0.1], [-0.2, 0.25]]))
        scene = sample_pair(p, pts, rng_for("draw"))
        assert np.array_equal(scene.w_diff, scene.w2 - scene.w1)
        assert np.array_equal(scene.w_max, np.maximum(scene.w1, scene.w2))


class TestKappa:
    def test_equal_points(self):
        assert kappa((0.4, 0.1), (0.4, 0.1), 0.5) == pytest.approx(1.0, rel=1e-12)

    def test_hand_value(self):
        got = kappa((1.0, 0.0), (0.0, 1.0), 0.5)
        assert got == pytest.approx((2.0 - 2.0**0.25) / 2.0, rel=1e-12)

    def test_origin_rejected(self):
        with pytest.raises(DegenerateInput):
            kappa((0.0, 0.0), (0.1, 0.1), 0.5)

    def test_small_separation_ratio(self):
        # (1 - kappa^2) ||x1||^a / d^a near 1 for small d (alpha = 0.5)
        x1 = np.array([0.3, 0.2])
        d = 1e-3
        k = kappa(x1, x1 + np.array([d, 0.0]), 0.5)
        ratio = (1.0 - k**2) * np.linalg.norm(x1) ** 0.5 / d**0.5
        assert 0.98 <= ratio <= 1.02

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_error_shrinks_monotonically(self, alpha):
        x1 = np.array([0.3, 0.2])
        errors = []
        for d in (1e-2, 1e-3, 1e-4):
            k = kappa(x1, x1 + np.array([d, 0.0]), alpha)
            ratio = (1.0 - k**2) * np.linalg.norm(x1) ** alpha / d**alpha
            errors.append(abs(ratio - 1.0))
        assert errors[0] > errors[1] > errors[2]


class TestProofCorrelations:
    X = ((0.25, 0.1), (0.45, 0.3), (-0.2, 0.35), (-0.05, -0.3))

    def test_identical_edges_give_eta_one(self):
        x1, x2 = (0.2, 0.1), (0.4, 0.5)
        pc = proof_correlations(x1, x2, x1, x2, 0.5)
        assert pc.eta == pytest.approx(1.0, rel=1e-12)
        assert pc.kappa13 == pytest.approx(1.0, rel=1e-12)

    def test_values_are_correlations(self):
        pc = proof_correlations(*self.X, alpha=0.5)
        for value in (pc.eta, pc.rho12, pc.rho34, pc.nu123, pc.nu341, pc.kappa13):
            assert -1.0 - 1e-12 <= value <= 1.0 + 1e-12

    def test_monte_carlo_oracle(self, rng_for):
        # empirical correlations of the six-vector over 5e4 joint draws
        alpha = 0.5
        pc = proof_correlations(*self.X, alpha=alpha)
        p = FieldParams(1.0, alpha)
        pts = PointSet(np.array(self.X))
        factor = factor_covariance(build_covariance(p, pts))
        n = 50000
        z = rng_for("z").standard_normal((2, 4, n))
        w = np.einsum("ij,fjn->fin", factor, z)  # (field, point, draw)
        d12 = np.linalg.norm(np.subtract(self.X[1], self.X[0]))
        d34 = np.linalg.norm(np.subtract(self.X[3], self.X[2]))
        u12 = (w[0, 1] - w[0, 0]) / d12 ** (alpha / 2)
        u34 = (w[0, 3] - w[0, 2]) / d34 ** (alpha / 2)
        diff1 = w[1, 0] - w[0, 0]
        diff3 = w[1, 2] - w[0, 2]

        def emp(a, b):
            return np.corrcoef(a, b)[0, 1]

        se = 3.0 / np.sqrt(n)  # conservative 3-sigma band for a correlation
        assert abs(emp(u12, u34) - pc.eta) < se
        assert abs(-emp(u12, w[0, 0]) - pc.rho12) < se
        assert abs(-emp(u34, w[0, 2]) - pc.rho34) < se
        assert abs(-emp(u12, w[0, 2]) - pc.nu123) < se
        assert abs(-emp(u34, w[0, 0]) - pc.nu341) < se
        assert abs(emp(diff1, diff3) - pc.kappa13) < se

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateInput):
            proof_correlations((0.1, 0.1), (0.1, 0.1), (0.2, 0.2), (0.3, 0.3), 0.5)
