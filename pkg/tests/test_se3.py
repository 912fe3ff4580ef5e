"""Core operator tests: series oracles, round trips, algebraic identities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from tacservo import se3


def random_twist(rng, max_rot=3.0, max_trans=10.0):
    phi = rng.uniform(-1.0, 1.0, 3)
    phi *= rng.uniform(0.0, max_rot) / np.linalg.norm(phi)
    rho = rng.uniform(-max_trans, max_trans, 3)
    return np.concatenate([rho, phi])


def series_exp(twist, terms=30):
    """Truncated matrix power series of the exponential (independent oracle)."""
    H = se3.hat(twist)
    out = np.eye(4)
    term = np.eye(4)
    for n in range(1, terms):
        term = term @ H / n
        out = out + term
    return out


class TestHatVee:
    def test_zero(self):
        assert np.array_equal(se3.hat(np.zeros(6)), np.zeros((4, 4)))
        assert np.array_equal(se3.vee(np.zeros((4, 4))), np.zeros(6))

    def test_unit_rotation_block(self):
        H = se3.hat([0, 0, 0, 1, 0, 0])
        assert np.array_equal(H[:3, :3], np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]]))
        assert np.array_equal(H[:3, 3], np.zeros(3))

    def test_pure_translation(self):
        H = se3.hat([1, 2, 3, 0, 0, 0])
        assert np.array_equal(H[:3, :3], np.zeros((3, 3)))
        assert np.array_equal(H[:3, 3], [1, 2, 3])

    def test_round_trip(self):
        t = np.array([1, 2, 3, 0.1, 0.2, 0.3])
        assert np.array_equal(se3.vee(se3.hat(t)), t)

    def test_rejects_symmetric_block(self):
        m = np.zeros((4, 4))
        m[0, 1] = m[1, 0] = 0.5
        with pytest.raises(ValueError):
            se3.vee(m)

    def test_rejects_nonzero_bottom_row(self):
        m = np.zeros((4, 4))
        m[3, 0] = 1e-6
        with pytest.raises(ValueError):
            se3.vee(m)

    @given(st.lists(st.floats(-100, 100), min_size=6, max_size=6))
    def test_bijection_property(self, vals):
        t = np.array(vals)
        assert np.array_equal(se3.vee(se3.hat(t)), t)


class TestExpLog:
    def test_pure_translation_exact(self):
        X = se3.exp_map([1, 2, 3, 0, 0, 0])
        assert np.array_equal(X[:3, :3], np.eye(3))
        assert np.array_equal(X[:3, 3], [1, 2, 3])

    def test_axis_rotation(self):
        X = se3.exp_map([0, 0, 0, math.pi / 2, 0, 0])
        expected = np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
        assert np.allclose(X[:3, :3], expected, atol=1e-12)
        assert np.allclose(X[:3, 3], 0, atol=1e-12)

    def test_exp_matches_power_series(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            t = random_twist(rng, max_rot=3.1, max_trans=5.0)
            assert np.abs(se3.exp_map(t) - series_exp(t)).max() < 1e-9

    def test_log_trivials(self):
        assert np.allclose(se3.log_map(np.eye(4)), 0, atol=1e-15)
        assert np.allclose(
            se3.log_map(se3.make_pose(np.eye(3), [5, 0, 0])), [5, 0, 0, 0, 0, 0]
        )

    def test_round_trip_1000(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(1000):
            t = random_twist(rng, max_rot=3.0, max_trans=10.0)
            err = np.abs(se3.log_map(se3.exp_map(t)) - t).max()
            worst = max(worst, err)
        assert worst < 1e-9

    def test_log_near_pi_raises(self):
        X = se3.exp_map([0, 0, 0, math.pi - 1e-9, 0, 0])
        with pytest.raises(ValueError):
            se3.log_map(X)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6))
    def test_round_trip_property(self, vals):
        t = np.array(vals)
        assert np.abs(se3.log_map(se3.exp_map(t)) - t).max() < 1e-9


class TestAdjoints:
    def test_adjoint_identity(self):
        assert np.array_equal(se3.adjoint(np.eye(4)), np.eye(6))

    def test_adjoint_translation_block(self):
        Ad = se3.adjoint(se3.make_pose(np.eye(3), [1, 0, 0]))
        expected = np.eye(6)
        expected[:3, 3:] = se3.skew([1, 0, 0])
        assert np.array_equal(Ad, expected)

    def test_homomorphism(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            X1 = se3.exp_map(random_twist(rng, 2.5, 5.0))
            X2 = se3.exp_map(random_twist(rng, 2.5, 5.0))
            lhs = se3.adjoint(X1 @ X2)
            rhs = se3.adjoint(X1) @ se3.adjoint(X2)
            assert np.abs(lhs - rhs).max() < 1e-9

    def test_ad_small_zero_and_block(self):
        assert np.array_equal(se3.ad_small(np.zeros(6)), np.zeros((6, 6)))
        A = se3.ad_small([0, 0, 0, 0, 0, 1])
        S = se3.skew([0, 0, 1])
        assert np.array_equal(A[:3, :3], S)
        assert np.array_equal(A[3:, 3:], S)
        assert np.array_equal(A[:3, 3:], np.zeros((3, 3)))

    def test_ad_small_group_consistency(self):
        # exp(ad(t)) equals Ad(exp(t)); checked with a generic matrix exponential.
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = random_twist(rng, 0.1, 0.1)
            assert np.abs(expm(se3.ad_small(t)) - se3.adjoint(se3.exp_map(t))).max() < 1e-6


def series_left_jacobian(twist, terms=10):
    A = se3.ad_small(twist)
    out = np.eye(6)
    term = np.eye(6)
    for n in range(1, terms):
        term = term @ A / n
        out = out + term / (n + 1)
    return out


class TestJacobians:
    def test_zero_is_identity(self):
        assert np.array_equal(se3.left_jacobian(np.zeros(6)), np.eye(6))
        assert np.array_equal(se3.inv_left_jacobian(np.zeros(6)), np.eye(6))

    def test_truncated_form_direct(self):
        t = np.array([0, 0, 0, 0.1, 0, 0])
        A = se3.ad_small(t)
        assert np.allclose(se3.left_jacobian(t), np.eye(6) + A / 2 + A @ A / 6, atol=1e-15)

    def test_against_full_series(self):
        # The implementation truncates after second order, so it matches the
        # full series to O(|t|^3): tight at small arguments, ~|t|^3/24 at 0.1.
        t_small = np.array([0, 0, 0, 0.02, 0, 0])
        assert np.abs(se3.left_jacobian(t_small) - series_left_jacobian(t_small)).max() < 1e-6
        t = np.array([0, 0, 0, 0.1, 0, 0])
        assert np.abs(se3.left_jacobian(t) - series_left_jacobian(t)).max() < 5e-5

    def test_bernoulli_linear_coefficient(self):
        # B1 = -1/2 shows up as the linear term of the inverse Jacobian.
        t = np.array([0, 0, 0, 1e-4, 0, 0])
        A = se3.ad_small(t)
        assert np.abs((se3.inv_left_jacobian(t) - np.eye(6)) - (-0.5 * A + A @ A / 12)).max() < 1e-15

    def test_mutual_inverse_residual(self):
        rng = np.random.default_rng(4)
        for norm_bound, tol in ((0.1, 2e-4), (0.13, 1e-4 * 1.2), (0.3, 2e-3)):
            worst = 0.0
            for _ in range(100):
                t = rng.uniform(-1, 1, 6)
                t *= rng.uniform(0, norm_bound) / np.linalg.norm(t)
                r = np.abs(se3.left_jacobian(t) @ se3.inv_left_jacobian(t) - np.eye(6)).max()
                worst = max(worst, r)
            assert worst < tol, (norm_bound, worst)
        # residual scales as |t|^3/24: well under 1e-4 once |t| <= 0.13
        t = np.ones(6) * (0.13 / math.sqrt(6))
        r = np.abs(se3.left_jacobian(t) @ se3.inv_left_jacobian(t) - np.eye(6)).max()
        assert r < 1e-4


class TestBch:
    def test_zero_first(self):
        t2 = np.array([1, 2, 3, 0.1, 0.2, 0.3])
        assert np.allclose(se3.bch_compose(np.zeros(6), t2, "first"), t2)

    def test_zero_second(self):
        t1 = np.array([1, 2, 3, 0.1, 0.2, 0.3])
        assert np.allclose(se3.bch_compose(t1, np.zeros(6), "second"), t1)

    def test_against_exact_log_exp(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(500):
            small = rng.uniform(-1, 1, 6)
            small *= rng.uniform(0, 0.05) / np.linalg.norm(small)
            other = rng.uniform(-1, 1, 6)
            other *= rng.uniform(0, 0.1) / np.linalg.norm(other)
            exact = se3.log_map(se3.exp_map(small) @ se3.exp_map(other))
            approx = se3.bch_compose(small, other, "first")
            worst = max(worst, np.abs(exact - approx).max())
            exact = se3.log_map(se3.exp_map(other) @ se3.exp_map(small))
            approx = se3.bch_compose(other, small, "second")
            worst = max(worst, np.abs(exact - approx).max())
        assert worst < 1e-4

    def test_rejects_large_small_argument(self):
        with pytest.raises(ValueError):
            se3.bch_compose(np.ones(6), np.zeros(6), "first")

    def test_rejects_bad_selector(self):
        with pytest.raises(ValueError):
            se3.bch_compose(np.zeros(6), np.zeros(6), "both")


class TestGroupHygiene:
    def test_composition_closure_with_renormalization(self):
        rng = np.random.default_rng(6)
        X = np.eye(4)
        for _ in range(10_000):
            X = se3.renormalize_pose(X @ se3.exp_map(random_twist(rng, 0.5, 2.0)))
        assert se3.rotation_drift(X) < 1e-9

    def test_inverse_composes_to_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            X = se3.exp_map(random_twist(rng, 3.0, 10.0))
            assert np.abs(X @ se3.inv_pose(X) - np.eye(4)).max() < 1e-9

    def test_project_rotation(self):
        rng = np.random.default_rng(8)
        C = se3.exp_map(random_twist(rng, 2.0, 0.0))[:3, :3] + 1e-6 * rng.standard_normal((3, 3))
        P = se3.project_rotation(C)
        assert np.abs(P.T @ P - np.eye(3)).max() < 1e-12
        assert np.linalg.det(P) > 0


class TestEulerBoundary:
    def test_matches_scipy_extrinsic_xyz(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            angles = rng.uniform(-80, 80, 3)
            ours = se3.rot_from_euler_xyz(*angles)
            ref = Rotation.from_euler("xyz", angles, degrees=True).as_matrix()
            assert np.abs(ours - ref).max() < 1e-12
            back = se3.euler_xyz_from_rot(ours)
            assert np.abs(back - angles).max() < 1e-9

    def test_pose_euler_round_trip(self):
        v = np.array([1.0, -2.0, 3.0, 10.0, -20.0, 30.0])
        assert np.abs(se3.euler_from_pose(se3.pose_from_euler(v)) - v).max() < 1e-9
