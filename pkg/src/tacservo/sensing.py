"""Surface-contact geometry, training-range samplers, and the observation surrogate.

A contact is described by six numbers: tangential shear displacement (x, y) in
mm, contact depth z in mm, contact angles (alpha, beta) in deg, and rotational
shear gamma in deg.  The equivalent rigid transform composes a normal-contact
stage (tilt by alpha/beta, approach by z) with a tangential-shear stage
(slide by x/y, spin by gamma about the contact normal).

The neural estimator of the original system is replaced by a calibrated
stochastic surrogate: it perturbs the true label twist per component and
reports the matching diagonal covariance, with variance inflation once the
tangential shear exceeds a slip threshold (aliasing emulation).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import se3
from .uncertainty import TangentGaussian

_DEG = math.pi / 180.0

# Training envelope.
SHEAR_RADIUS_MM = 5.0
DEPTH_RANGE_MM = (0.5, 6.0)
CAP_ANGLE_DEG = 25.0
SPIN_RANGE_DEG = 5.0

# Observation MAE targets per component (mm, mm, mm, deg, deg, deg) that the
# default surrogate is calibrated against; for Gaussian noise MAE = sigma *
# sqrt(2/pi), so the default sigmas are these targets scaled by sqrt(pi/2).
OBSERVATION_MAE_TARGETS = np.array([0.426, 0.422, 0.123, 0.45, 0.64, 1.16])

# Twist components treated as shear-dominated for aliasing inflation.
_SHEAR_COMPONENTS = (0, 1, 5)


@dataclass(frozen=True)
class ContactPose:
    """Surface contact pose and post-contact shear (mm / deg)."""

    x: float
    y: float
    z: float
    alpha: float
    beta: float
    gamma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.alpha, self.beta, self.gamma])


@dataclass(frozen=True)
class SurrogateNoiseProfile:
    """Per-component observation noise (mm / deg) plus aliasing emulation.

    Beyond ``aliasing_slip_threshold`` mm of tangential shear, the noise and
    the reported variance of the shear-dominated components are inflated by
    ``aliasing_inflation``.
    """

    sigma: np.ndarray
    aliasing_slip_threshold: float = 4.0
    aliasing_inflation: float = 4.0

    def __post_init__(self):
        sig = np.asarray(self.sigma, dtype=float)
        if sig.shape != (6,) or np.any(sig <= 0):
            raise ValueError("sigma must be a positive 6-vector")
        object.__setattr__(self, "sigma", sig)


def default_noise_profile() -> SurrogateNoiseProfile:
    """Noise profile calibrated so sample MAEs hit OBSERVATION_MAE_TARGETS."""
    return SurrogateNoiseProfile(sigma=OBSERVATION_MAE_TARGETS * math.sqrt(math.pi / 2.0))


def contact_to_pose(c: ContactPose) -> np.ndarray:
    """Rigid transform of the sensor in the surface feature frame.

    Normal-contact stage: rotate by (alpha, beta), approach to depth z along
    the feature z-axis.  Shear stage: translate by (x, y) in the tangent plane
    while spinning by gamma about the normal.  The composed transform has
    extrinsic-xyz Euler components exactly (x, y, z, alpha, beta, gamma).
    """
    X_normal = se3.make_pose(
        se3.rot_y(c.beta * _DEG) @ se3.rot_x(c.alpha * _DEG), [0.0, 0.0, c.z]
    )
    X_shear = se3.make_pose(se3.rot_z(c.gamma * _DEG), [c.x, c.y, 0.0])
    return X_shear @ X_normal


def pose_to_inverted_tangent(c: ContactPose) -> np.ndarray:
    """Label twist: log of the inverted contact transform.

    Inversion re-expresses the surface feature pose in the sensor frame,
    which is the format consumed by the filter and the controllers.
    """
    return se3.log_map(se3.inv_pose(contact_to_pose(c)))


def sample_disk(rng: np.random.Generator, r_max: float) -> tuple[float, float]:
    """Uniform point on a disk of radius ``r_max`` via r = r_max * sqrt(u)."""
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    r = r_max * math.sqrt(rng.uniform(0.0, 1.0))
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return r * math.cos(theta), r * math.sin(theta)


def sample_spherical_cap(rng: np.random.Generator, phi_max_deg: float) -> tuple[float, float]:
    """Contact angles (alpha, beta) in deg, uniform over a spherical cap.

    The polar angle is drawn so the direction is area-uniform over the cap
    subtended by ``phi_max_deg``; the angles are then

        alpha = -asin(q),  beta = -atan2(p, r)

    with (p, q, r) = (sin phi cos theta, sin phi sin theta, cos phi).
    """
    if not 0.0 < phi_max_deg < 90.0:
        raise ValueError("phi_max_deg must be in (0, 90)")
    phi_max = phi_max_deg * _DEG
    u = rng.uniform(0.0, 1.0)
    phi = math.acos(1.0 - (1.0 - math.cos(phi_max)) * u)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    p = math.sin(phi) * math.cos(theta)
    q = math.sin(phi) * math.sin(theta)
    r = math.cos(phi)
    return -math.asin(q) / _DEG, -math.atan2(p, r) / _DEG


def sample_contact(rng: np.random.Generator, shear_radius: float = SHEAR_RADIUS_MM) -> ContactPose:
    """One random contact from the training ranges."""
    x, y = sample_disk(rng, shear_radius)
    z = rng.uniform(*DEPTH_RANGE_MM)
    alpha, beta = sample_spherical_cap(rng, CAP_ANGLE_DEG)
    gamma = rng.uniform(-SPIN_RANGE_DEG, SPIN_RANGE_DEG)
    return ContactPose(x, y, z, alpha, beta, gamma)


def generate_dataset(rng: np.random.Generator, n: int) -> list[tuple[ContactPose, np.ndarray]]:
    """n training samples: (contact, label twist) with labels from the inverted transform."""
    if n <= 0:
        raise ValueError("n must be positive")
    out = []
    for _ in range(n):
        c = sample_contact(rng)
        out.append((c, pose_to_inverted_tangent(c)))
    return out


DATASET_COLUMNS = [
    "x_mm", "y_mm", "z_mm", "alpha_deg", "beta_deg", "gamma_deg",
    "xi_1_mm", "xi_2_mm", "xi_3_mm", "xi_4_rad", "xi_5_rad", "xi_6_rad",
]


def dataset_to_csv(samples) -> str:
    """Render samples as CSV text (units annotated in the header names)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_COLUMNS)
    for c, xi in samples:
        row = [f"{v:.10g}" for v in np.concatenate([c.as_array(), xi])]
        w.writerow(row)
    return buf.getvalue()


def surrogate_observe(
    truth: ContactPose,
    profile: SurrogateNoiseProfile,
    rng: np.random.Generator,
) -> TangentGaussian:
    """Noisy observation of a contact, with matching reported covariance.

    mu is the true label twist plus per-component Gaussian noise; the reported
    covariance is the diagonal of the noise actually applied.  Once the
    tangential shear magnitude passes the slip threshold, noise variance on
    the shear-dominated components is inflated (tactile aliasing emulation).
    """
    label = pose_to_inverted_tangent(truth)
    sigma = profile.sigma * np.array([1.0, 1.0, 1.0, _DEG, _DEG, _DEG])
    var = sigma**2
    if math.hypot(truth.x, truth.y) > profile.aliasing_slip_threshold:
        var = var.copy()
        for j in _SHEAR_COMPONENTS:
            var[j] *= profile.aliasing_inflation
    std = np.sqrt(var)
    mu = label + std * rng.standard_normal(6)
    return TangentGaussian(mu, np.diag(var))


# --- loss / activation numerics ----------------------------------------------


def softplus(x: float) -> float:
    """Numerically stable ln(1 + exp(x)); exact identity x + softplus(-x) for large x."""
    if x > 30.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def softbound(x: float, x_min: float, x_max: float) -> float:
    """Smooth clamp of x into [x_min, x_max].

    softbound(x) = x_min + softplus(x - x_min) - softplus(x - x_max); it is
    strictly increasing, C-infinity, and the identity away from both bounds.
    """
    if x_min >= x_max:
        raise ValueError("x_min must be below x_max")
    return x_min + softplus(x - x_min) - softplus(x - x_max)


def weighted_mse(preds, labels, alpha) -> float:
    """Mean over samples of the alpha-weighted squared component errors."""
    p = np.atleast_2d(np.asarray(preds, dtype=float))
    l = np.atleast_2d(np.asarray(labels, dtype=float))
    if p.size == 0 or l.size == 0:
        raise ValueError("empty input")
    if p.shape != l.shape:
        raise ValueError("prediction/label shapes differ")
    a = np.asarray(alpha, dtype=float)
    return float(np.mean(np.sum(a * (l - p) ** 2, axis=1)))


def gdn_nll(preds_mu, preds_inv_sigma, labels) -> float:
    """Mean negative log likelihood of labels under diagonal Gaussians.

    Parameterized by means and inverse standard deviations; the additive
    (M/2) ln(2 pi) constant is excluded.
    """
    mu = np.atleast_2d(np.asarray(preds_mu, dtype=float))
    inv_sig = np.atleast_2d(np.asarray(preds_inv_sigma, dtype=float))
    l = np.atleast_2d(np.asarray(labels, dtype=float))
    if mu.size == 0:
        raise ValueError("empty input")
    if not (mu.shape == inv_sig.shape == l.shape):
        raise ValueError("input shapes differ")
    if np.any(inv_sig <= 0):
        raise ValueError("inverse standard deviations must be positive")
    per = 0.5 * (inv_sig * (l - mu)) ** 2 - np.log(inv_sig)
    return float(np.mean(np.sum(per, axis=1)))
