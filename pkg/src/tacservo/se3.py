"""Rigid-transform operators on SE(3): hat/vee, exp/log, adjoints, Jacobians.

Conventions used throughout the package:

* a pose is a 4x4 homogeneous matrix with an orthonormal 3x3 rotation block,
  translation in mm;
* a twist is a 6-vector ordered translation-first, ``xi = (rho, phi)`` with
  ``rho`` in mm and ``phi`` in rad;
* Euler angles at module boundaries (configs, logs, contact poses) follow the
  extrinsic-xyz convention, i.e. ``R = Rz(c) @ Ry(b) @ Rx(a)``.

All functions are pure and return fresh arrays.
"""

from __future__ import annotations

import math

import numpy as np

# Below this rotation angle the exp/log coefficient functions switch to their
# series expansions.  The closed forms lose ~eps/theta^2 absolute accuracy to
# cancellation in (1 - cos theta), which would break 1e-9 round trips anywhere
# below ~1e-3; at 1e-2 the truncated series are accurate to ~1e-17.
SMALL_ANGLE = 1e-2
# log_map refuses rotations closer than this to pi.
NEAR_PI_MARGIN = 1e-6

_DEG = math.pi / 180.0


def skew(v) -> np.ndarray:
    """3x3 skew-symmetric matrix of a 3-vector, so that skew(a) @ b = a x b."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unskew(m) -> np.ndarray:
    """Inverse of :func:`skew` (takes the off-diagonal entries as-is)."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def hat(twist) -> np.ndarray:
    """Map a twist to its 4x4 matrix form: skew(phi) block plus rho column."""
    t = np.asarray(twist, dtype=float)
    out = np.zeros((4, 4))
    out[:3, :3] = skew(t[3:6])
    out[:3, 3] = t[:3]
    return out


def vee(mat, tol: float = 1e-9) -> np.ndarray:
    """Extract the twist from a 4x4 hat-form matrix.

    Raises ValueError if the rotation block is not skew-symmetric within
    ``tol`` or the bottom row is not zero.
    """
    m = np.asarray(mat, dtype=float)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    if np.abs(m[3]).max() > tol:
        raise ValueError("bottom row of a hat-form matrix must be zero")
    r = m[:3, :3]
    if np.abs(r + r.T).max() > tol:
        raise ValueError("rotation block is not skew-symmetric")
    return np.array([m[0, 3], m[1, 3], m[2, 3], r[2, 1], r[0, 2], r[1, 0]])


def make_pose(rotation, translation) -> np.ndarray:
    """Assemble a 4x4 pose from a 3x3 rotation and a 3-vector translation."""
    X = np.eye(4)
    X[:3, :3] = rotation
    X[:3, 3] = translation
    return X


def inv_pose(pose) -> np.ndarray:
    """Closed-form inverse of a rigid transform."""
    X = np.asarray(pose, dtype=float)
    Ct = X[:3, :3].T
    out = np.eye(4)
    out[:3, :3] = Ct
    out[:3, 3] = -Ct @ X[:3, 3]
    return out


def exp_map(twist) -> np.ndarray:
    """SE(3) exponential: closed-form Rodrigues rotation plus V-matrix translation.

    Below SMALL_ANGLE the coefficient functions use series expansions, which
    makes the pure-translation case exact.
    """
    t = np.asarray(twist, dtype=float)
    rho = t[:3]
    P = skew(t[3:6])
    P2 = P @ P
    th2 = t[3] * t[3] + t[4] * t[4] + t[5] * t[5]
    if th2 < SMALL_ANGLE * SMALL_ANGLE:
        # sin(th)/th, (1-cos th)/th^2, (th-sin th)/th^3 to O(th^6)
        a = 1.0 - th2 / 6.0 * (1.0 - th2 / 20.0)
        b = 0.5 - th2 / 24.0 * (1.0 - th2 / 30.0)
        g = (1.0 - th2 / 20.0 * (1.0 - th2 / 42.0)) / 6.0
    else:
        th = math.sqrt(th2)
        s, c = math.sin(th), math.cos(th)
        a = s / th
        b = (1.0 - c) / th2
        g = (th - s) / (th2 * th)
    C = np.eye(3) + a * P + b * P2
    V = np.eye(3) + b * P + g * P2
    X = np.eye(4)
    X[:3, :3] = C
    X[:3, 3] = V @ rho
    return X


def log_map(pose) -> np.ndarray:
    """SE(3) logarithm, the inverse of :func:`exp_map`.

    Valid for rotation angles strictly below ``pi - NEAR_PI_MARGIN``; raises
    ValueError at or beyond that (the angle-pi branch is ambiguous and never
    occurs in the servoing/filtering regime this package targets).
    """
    X = np.asarray(pose, dtype=float)
    C = X[:3, :3]
    w = 0.5 * unskew(C - C.T)  # sin(theta) * axis
    s = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    c = max(-1.0, min(1.0, 0.5 * (C[0, 0] + C[1, 1] + C[2, 2] - 1.0)))
    th = math.atan2(s, c)
    if th >= math.pi - NEAR_PI_MARGIN:
        raise ValueError(f"rotation angle {th:.9f} too close to pi for log_map")
    th2 = th * th
    if th < SMALL_ANGLE:
        # th/sin(th) and the V-inverse quadratic coefficient as series; the
        # closed forms cancel catastrophically for small angles.
        phi = (1.0 + th2 / 6.0 * (1.0 + 7.0 * th2 / 60.0)) * w
        A = 1.0 / 12.0 + th2 / 720.0 + th2 * th2 / 30240.0
    else:
        phi = (th / s) * w
        A = (1.0 - th * s / (2.0 * (1.0 - c))) / th2
    P = skew(phi)
    Vinv = np.eye(3) - 0.5 * P + A * (P @ P)
    out = np.empty(6)
    out[:3] = Vinv @ X[:3, 3]
    out[3:] = phi
    return out


def adjoint(pose) -> np.ndarray:
    """6x6 adjoint of a pose: block form [[C, skew(r) C], [0, C]]."""
    X = np.asarray(pose, dtype=float)
    C = X[:3, :3]
    out = np.zeros((6, 6))
    out[:3, :3] = C
    out[:3, 3:] = skew(X[:3, 3]) @ C
    out[3:, 3:] = C
    return out


def ad_small(twist) -> np.ndarray:
    """6x6 adjoint of a twist (the curly-wedge operator on the algebra)."""
    t = np.asarray(twist, dtype=float)
    P = skew(t[3:6])
    out = np.zeros((6, 6))
    out[:3, :3] = P
    out[:3, 3:] = skew(t[:3])
    out[3:, 3:] = P
    return out


def left_jacobian(twist) -> np.ndarray:
    """Left Jacobian of SE(3), series truncated after second order.

    J = I + (1/2) ad + (1/6) ad^2, where ad = ad_small(twist).
    """
    A = ad_small(twist)
    return np.eye(6) + 0.5 * A + (A @ A) / 6.0


def inv_left_jacobian(twist) -> np.ndarray:
    """Bernoulli-series inverse left Jacobian truncated after second order.

    J^-1 = I - (1/2) ad + (1/12) ad^2.  Note this is the truncated series,
    not the matrix inverse of :func:`left_jacobian`; their product is
    I + O(|twist|^3).
    """
    A = ad_small(twist)
    return np.eye(6) - 0.5 * A + (A @ A) / 12.0


def bch_compose(t1, t2, which_small: str) -> np.ndarray:
    """First-order BCH approximation of log(exp(t1) exp(t2)).

    ``which_small`` names the argument assumed small ("first" or "second");
    its norm must not exceed 0.3 for the approximation to be meaningful.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if which_small == "first":
        small = t1
    elif which_small == "second":
        small = t2
    else:
        raise ValueError(f"which_small must be 'first' or 'second', got {which_small!r}")
    if np.linalg.norm(small) > 0.3:
        raise ValueError("designated-small twist has norm > 0.3")
    if which_small == "first":
        return inv_left_jacobian(t2) @ t1 + t2
    return t1 + inv_left_jacobian(-t1) @ t2


def project_rotation(m) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    d = np.linalg.det(u @ vt)
    return u @ np.diag([1.0, 1.0, d]) @ vt


def renormalize_pose(pose, drift_tol: float = 1e-8) -> np.ndarray:
    """Re-orthonormalize the rotation block when drift exceeds ``drift_tol``.

    Keeps long chains of compositions valid; a no-op (copy) when the block is
    already orthonormal to within the tolerance.
    """
    X = np.array(pose, dtype=float)
    C = X[:3, :3]
    if np.linalg.norm(C.T @ C - np.eye(3)) > drift_tol:
        X[:3, :3] = project_rotation(C)
    return X


def rotation_drift(pose) -> float:
    """Frobenius deviation of the rotation block from orthonormality."""
    C = np.asarray(pose, dtype=float)[:3, :3]
    return float(np.linalg.norm(C.T @ C - np.eye(3)))


# --- extrinsic-xyz Euler boundary helpers -----------------------------------


def rot_x(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_from_euler_xyz(alpha: float, beta: float, gamma: float, degrees: bool = True) -> np.ndarray:
    """Rotation from extrinsic-xyz Euler angles: Rz(gamma) Ry(beta) Rx(alpha)."""
    if degrees:
        alpha, beta, gamma = alpha * _DEG, beta * _DEG, gamma * _DEG
    return rot_z(gamma) @ rot_y(beta) @ rot_x(alpha)


def euler_xyz_from_rot(rotation, degrees: bool = True) -> np.ndarray:
    """Extrinsic-xyz Euler angles (alpha, beta, gamma) of a rotation matrix.

    Gimbal lock (|beta| = 90 deg) resolves with gamma = 0; contact angles in
    this package stay far from it.
    """
    R = np.asarray(rotation, dtype=float)
    sb = -R[2, 0]
    sb = max(-1.0, min(1.0, sb))
    beta = math.asin(sb)
    if abs(sb) < 1.0 - 1e-12:
        alpha = math.atan2(R[2, 1], R[2, 2])
        gamma = math.atan2(R[1, 0], R[0, 0])
    else:
        alpha = math.atan2(-R[1, 2], R[1, 1])
        gamma = 0.0
    out = np.array([alpha, beta, gamma])
    return out / _DEG if degrees else out


def pose_from_euler(xyzabc, degrees: bool = True) -> np.ndarray:
    """Pose from a 6-vector (x, y, z, alpha, beta, gamma), extrinsic-xyz."""
    v = np.asarray(xyzabc, dtype=float)
    return make_pose(rot_from_euler_xyz(v[3], v[4], v[5], degrees=degrees), v[:3])


def euler_from_pose(pose, degrees: bool = True) -> np.ndarray:
    """Inverse of :func:`pose_from_euler`."""
    X = np.asarray(pose, dtype=float)
    return np.concatenate([X[:3, 3], euler_xyz_from_rot(X[:3, :3], degrees=degrees)])
