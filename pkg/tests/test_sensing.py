"""Contact geometry, samplers, surrogate calibration, loss/activation numerics."""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from tacservo import se3
from tacservo.sensing import (
    OBSERVATION_MAE_TARGETS,
    ContactPose,
    SurrogateNoiseProfile,
    contact_to_pose,
    dataset_to_csv,
    default_noise_profile,
    gdn_nll,
    generate_dataset,
    pose_to_inverted_tangent,
    sample_contact,
    sample_disk,
    sample_spherical_cap,
    softbound,
    surrogate_observe,
    weighted_mse,
)

_DEG = math.pi / 180.0


class FakeRng:
    """Returns scripted values from uniform(); standard_normal passes zeros."""

    def __init__(self, values):
        self.values = list(values)

    def uniform(self, lo, hi):
        return self.values.pop(0)

    def standard_normal(self, n):
        return np.zeros(n)


class TestContactGeometry:
    def test_zero_contact_is_identity(self):
        X = contact_to_pose(ContactPose(0, 0, 0, 0, 0, 0))
        assert np.array_equal(X, np.eye(4))

    def test_pure_depth(self):
        X = contact_to_pose(ContactPose(0, 0, 3.5, 0, 0, 0))
        assert np.allclose(X, se3.make_pose(np.eye(3), [0, 0, 3.5]))

    def test_two_stage_composition_oracle(self):
        rng = np.random.default_rng(30)
        for _ in range(200):
            c = sample_contact(rng)
            normal = se3.make_pose(
                se3.rot_y(c.beta * _DEG) @ se3.rot_x(c.alpha * _DEG), [0, 0, c.z]
            )
            shear = se3.make_pose(se3.rot_z(c.gamma * _DEG), [c.x, c.y, 0])
            assert np.abs(contact_to_pose(c) - shear @ normal).max() < 1e-9

    def test_euler_components_recovered(self):
        c = ContactPose(1.0, -2.0, 4.0, 10.0, -15.0, 3.0)
        v = se3.euler_from_pose(contact_to_pose(c))
        assert np.abs(v - c.as_array()).max() < 1e-9

    def test_injective_on_envelope(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            c1 = sample_contact(rng)
            arr = c1.as_array().copy()
            j = rng.integers(0, 6)
            arr[j] += rng.choice([-1, 1]) * rng.uniform(1e-4, 0.1)
            c2 = ContactPose(*arr)
            d = np.abs(contact_to_pose(c1) - contact_to_pose(c2)).max()
            assert d > 1e-9


class TestInvertedTangent:
    def test_zero(self):
        assert np.allclose(pose_to_inverted_tangent(ContactPose(0, 0, 0, 0, 0, 0)), 0)

    def test_pure_depth(self):
        xi = pose_to_inverted_tangent(ContactPose(0, 0, 3, 0, 0, 0))
        assert np.allclose(xi, [0, 0, -3, 0, 0, 0])

    def test_inverse_composition(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            c = sample_contact(rng)
            xi = pose_to_inverted_tangent(c)
            assert np.abs(se3.exp_map(xi) @ contact_to_pose(c) - np.eye(4)).max() < 1e-9


class TestSamplers:
    def test_disk_endpoints(self):
        assert sample_disk(FakeRng([0.0, 0.0]), 5.0) == (0.0, 0.0)
        x, y = sample_disk(FakeRng([1.0, 0.0]), 5.0)
        assert abs(x - 5.0) < 1e-12 and abs(y) < 1e-12

    def test_disk_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            sample_disk(FakeRng([0, 0]), 0.0)

    def test_disk_mean_radius(self):
        rng = np.random.default_rng(33)
        n = 100_000
        r = np.array([math.hypot(*sample_disk(rng, 5.0)) for _ in range(n)])
        assert abs(r.mean() - (2.0 / 3.0) * 5.0) < 0.01 * (2.0 / 3.0) * 5.0

    def test_cap_apex(self):
        a, b = sample_spherical_cap(FakeRng([0.0, 0.0]), 25.0)
        assert a == 0.0 and b == 0.0

    def test_cap_edge_meridian(self):
        a, b = sample_spherical_cap(FakeRng([1.0, math.pi / 2.0]), 25.0)
        assert abs(a + 25.0) < 1e-9
        assert abs(b) < 1e-9

    def test_cap_rejects_bad_angle(self):
        with pytest.raises(ValueError):
            sample_spherical_cap(FakeRng([0, 0]), 95.0)

    def test_cap_area_uniformity(self):
        # reconstruct the sampled direction and chi-square equal-area cells
        rng = np.random.default_rng(34)
        n = 100_000
        cos_max = math.cos(25.0 * _DEG)
        cells = np.zeros((10, 8))
        for _ in range(n):
            a, b = sample_spherical_cap(rng, 25.0)
            a *= _DEG
            b *= _DEG
            q = -math.sin(a)
            p = -math.sin(b) * math.cos(a)
            r = math.cos(b) * math.cos(a)
            i = min(int((r - cos_max) / (1.0 - cos_max) * 10), 9)
            j = int((math.atan2(q, p) + math.pi) / (2 * math.pi) * 8) % 8
            cells[i, j] += 1
        _, pvalue = chisquare(cells.ravel())
        assert pvalue > 0.01

    def test_determinism(self):
        a = [sample_disk(np.random.default_rng(5), 5.0) for _ in range(3)]
        b = [sample_disk(np.random.default_rng(5), 5.0) for _ in range(3)]
        assert a == b


class TestDataset:
    def test_envelope(self):
        rng = np.random.default_rng(35)
        for c, xi in generate_dataset(rng, 500):
            assert math.hypot(c.x, c.y) <= 5.0 + 1e-12
            assert 0.5 <= c.z <= 6.0
            assert abs(c.gamma) <= 5.0
            # contact direction within the 25 deg cap
            ca, cb = c.alpha * _DEG, c.beta * _DEG
            cos_phi = math.cos(cb) * math.cos(ca)
            assert cos_phi >= math.cos(25.0 * _DEG) - 1e-12

    def test_label_round_trip(self):
        rng = np.random.default_rng(36)
        for c, xi in generate_dataset(rng, 100):
            assert np.abs(se3.exp_map(xi) @ contact_to_pose(c) - np.eye(4)).max() < 1e-9

    def test_csv_line_count_and_header(self):
        rng = np.random.default_rng(37)
        text = dataset_to_csv(generate_dataset(rng, 50))
        lines = text.strip().split("\n")
        assert len(lines) == 51
        assert lines[0].startswith("x_mm,y_mm,z_mm,alpha_deg")

    def test_rejects_nonpositive_n(self):
        with pytest.raises(ValueError):
            generate_dataset(np.random.default_rng(0), 0)


class TestSurrogate:
    def test_vanishing_noise_limit(self):
        rng = np.random.default_rng(38)
        truth = ContactPose(1, 1, 3, 5, -5, 2)
        profile = SurrogateNoiseProfile(sigma=np.full(6, 1e-12))
        tg = surrogate_observe(truth, profile, rng)
        assert np.abs(tg.mu - pose_to_inverted_tangent(truth)).max() < 1e-9
        assert np.abs(tg.cov).max() < 1e-20

    def test_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            SurrogateNoiseProfile(sigma=np.zeros(6))

    def test_default_profile_mae_calibration(self):
        # MAE within 5% of the targets, measured inside the non-slip envelope
        rng = np.random.default_rng(39)
        profile = default_noise_profile()
        n = 10_000
        err = np.zeros(6)
        for _ in range(n):
            truth = sample_contact(rng, shear_radius=profile.aliasing_slip_threshold)
            tg = surrogate_observe(truth, profile, rng)
            err += np.abs(tg.mu - pose_to_inverted_tangent(truth))
        mae = err / n / np.array([1, 1, 1, _DEG, _DEG, _DEG])
        assert np.all(np.abs(mae - OBSERVATION_MAE_TARGETS) / OBSERVATION_MAE_TARGETS < 0.05)

    def test_reported_covariance_consistent(self):
        rng = np.random.default_rng(40)
        profile = default_noise_profile()
        truth = ContactPose(1, 0, 3, 5, 0, 1)
        n = 10_000
        label = pose_to_inverted_tangent(truth)
        errs = np.empty((n, 6))
        reported = None
        for i in range(n):
            tg = surrogate_observe(truth, profile, rng)
            errs[i] = tg.mu - label
            reported = np.diag(tg.cov)
        emp = errs.var(axis=0)
        assert np.all(np.abs(emp - reported) / reported < 0.10)

    def test_aliasing_inflates_variance(self):
        rng = np.random.default_rng(41)
        profile = default_noise_profile()
        inside = surrogate_observe(ContactPose(1, 0, 3, 0, 0, 0), profile, rng)
        beyond = surrogate_observe(ContactPose(4.5, 1.0, 3, 0, 0, 0), profile, rng)
        d_in = np.diag(inside.cov)
        d_out = np.diag(beyond.cov)
        assert np.allclose(d_out[[0, 1, 5]], 4.0 * d_in[[0, 1, 5]])
        assert np.allclose(d_out[[2, 3, 4]], d_in[[2, 3, 4]])


class TestFormulaNumerics:
    def test_softbound_interior_identity(self):
        assert abs(softbound(5.0, 0.0, 10.0) - 5.0) < 1e-12

    def test_softbound_saturation(self):
        assert abs(softbound(-100.0, 0.0, 10.0) - 0.0) < 1e-9
        assert abs(softbound(100.0, 0.0, 10.0) - 10.0) < 1e-9

    def test_softbound_monotone_smooth(self):
        xs = np.linspace(-20, 30, 2001)
        ys = np.array([softbound(x, 0.0, 10.0) for x in xs])
        assert np.all(np.diff(ys) > 0)

    def test_softbound_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            softbound(0.0, 1.0, 1.0)

    def test_weighted_mse_trivials(self):
        labels = np.ones((3, 6))
        assert weighted_mse(labels, labels, np.ones(6)) == 0.0
        pred = np.zeros((1, 6))
        lab = np.array([[1, 0, 0, 0, 0, 0.0]])
        assert weighted_mse(pred, lab, np.ones(6)) == 1.0

    def test_weighted_mse_paper_weights(self):
        alpha = np.array([1, 1, 1, 100, 100, 100.0])
        pred = np.zeros((1, 6))
        lab = np.array([[0, 0, 0, 0.1, 0, 0]])
        assert abs(weighted_mse(pred, lab, alpha) - 100 * 0.01) < 1e-12

    def test_weighted_mse_rejects_empty(self):
        with pytest.raises(ValueError):
            weighted_mse([], [], np.ones(6))

    def test_nll_zero_for_perfect_unit_sigma(self):
        labels = np.random.default_rng(42).standard_normal((4, 6))
        assert gdn_nll(labels, np.ones_like(labels), labels) == 0.0

    def test_nll_rejects_nonpositive_inv_sigma(self):
        with pytest.raises(ValueError):
            gdn_nll(np.zeros((1, 6)), np.zeros((1, 6)), np.zeros((1, 6)))

    def test_nll_equals_weighted_mse_for_fixed_sigma(self):
        rng = np.random.default_rng(43)
        preds = rng.standard_normal((20, 6))
        labels = rng.standard_normal((20, 6))
        inv_sigma = np.array([0.5, 1.0, 2.0, 4.0, 0.25, 3.0])
        nll = gdn_nll(preds, np.tile(inv_sigma, (20, 1)), labels)
        mse = weighted_mse(preds, labels, inv_sigma**2)
        expected = 0.5 * mse - np.sum(np.log(inv_sigma))
        assert abs(nll - expected) < 1e-12

    def test_nll_matches_gaussian_pdf(self):
        # exp(-(NLL + c)) for one sample equals the diagonal-Gaussian density
        rng = np.random.default_rng(44)
        mu = rng.standard_normal(6)
        inv_sigma = rng.uniform(0.5, 2.0, 6)
        x = rng.standard_normal(6)
        nll = gdn_nll(mu[None, :], inv_sigma[None, :], x[None, :])
        c = 0.5 * 6 * math.log(2 * math.pi)
        direct = np.prod(
            inv_sigma / math.sqrt(2 * math.pi)
            * np.exp(-0.5 * (inv_sigma * (x - mu)) ** 2)
        )
        assert abs(math.exp(-(nll + c)) - direct) < 1e-12 * max(1.0, direct)
