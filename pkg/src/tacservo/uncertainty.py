"""Concentrated Gaussians on SE(3) and their iterative normalized-product fusion.

A pose belief is a deterministic 4x4 mean left-perturbed by a small zero-mean
Gaussian twist: X = exp(eps^) @ mean, eps ~ N(0, cov).  Covariances are 6x6 in
twist coordinates (mm/rad blocks), symmetrized after every arithmetic step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import se3

# Inputs to fuse() must have eigenvalues above this to count as invertible.
MIN_COV_EIGENVALUE = 1e-12
# Fusion stops early once the operating-point update drops below this norm.
FUSE_CONVERGENCE_TOL = 1e-10
DEFAULT_FUSE_ITERS = 5


def symmetrize(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class PoseBelief:
    """Mean pose (4x4) with a 6x6 left-perturbation covariance."""

    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class TangentGaussian:
    """Gaussian over twist coordinates: mean twist mu and 6x6 covariance."""

    mu: np.ndarray
    cov: np.ndarray


def _check_invertible(cov: np.ndarray, label: str) -> None:
    w = np.linalg.eigvalsh(symmetrize(cov))
    if w.min() <= MIN_COV_EIGENVALUE:
        raise ValueError(f"{label} covariance is singular (min eigenvalue {w.min():.3e})")


def inv_psd(cov) -> np.ndarray:
    """Invert a symmetric PSD matrix, clamping eigenvalues at MIN_COV_EIGENVALUE."""
    a = symmetrize(cov)
    try:
        np.linalg.cholesky(a)
        return symmetrize(np.linalg.inv(a))
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(a)
        w = np.maximum(w, MIN_COV_EIGENVALUE)
        return symmetrize((v / w) @ v.T)


def belief_from_tangent(g: TangentGaussian) -> PoseBelief:
    """Lift a tangent-space Gaussian to a pose belief.

    mean = exp(mu), cov = J(mu) g.cov J(mu)^T with the left Jacobian, which
    converts a distribution over exponential coordinates into an equivalent
    left-perturbation distribution around the exponential of its mean.
    """
    J = se3.left_jacobian(g.mu)
    return PoseBelief(se3.exp_map(g.mu), symmetrize(J @ g.cov @ J.T))


def belief_to_tangent(b: PoseBelief) -> TangentGaussian:
    """Inverse of :func:`belief_from_tangent`.

    Uses the exact matrix inverse of the (truncated) left Jacobian so the
    round trip reproduces the input to machine precision.
    """
    mu = se3.log_map(b.mean)
    Jinv = np.linalg.inv(se3.left_jacobian(mu))
    return TangentGaussian(mu, symmetrize(Jinv @ b.cov @ Jinv.T))


def propagate(b: PoseBelief, transform_mean, noise_cov) -> PoseBelief:
    """Push a belief through a noisy left transform.

    mean' = T @ mean;  cov' = Ad(T) cov Ad(T)^T + noise_cov.
    """
    T = np.asarray(transform_mean, dtype=float)
    Ad = se3.adjoint(T)
    mean = se3.renormalize_pose(T @ b.mean)
    cov = symmetrize(Ad @ b.cov @ Ad.T + np.asarray(noise_cov, dtype=float))
    return PoseBelief(mean, cov)


def fuse_info(
    b1: PoseBelief,
    b2: PoseBelief,
    iters: int = DEFAULT_FUSE_ITERS,
    tol: float = FUSE_CONVERGENCE_TOL,
) -> tuple[PoseBelief, int, bool]:
    """Normalized product of two pose beliefs, with iteration diagnostics.

    Fixed-point iteration on an operating point initialized at b1.mean: each
    pass maps both factors into the operating tangent space through truncated
    inverse Jacobians, combines them in information form, and moves the
    operating point by the resulting mean update.  Returns (belief, iterations
    used, converged flag); convergence means the update norm fell below
    ``tol``.  Non-convergence within ``iters`` is advisory, not an error.
    """
    _check_invertible(b1.cov, "first factor")
    _check_invertible(b2.cov, "second factor")
    inv1 = inv_psd(b1.cov)
    inv2 = inv_psd(b2.cov)
    m1_inv = se3.inv_pose(b1.mean)
    m2_inv = se3.inv_pose(b2.mean)

    X = np.array(b1.mean, dtype=float)
    cov = np.array(b1.cov, dtype=float)
    used = 0
    converged = False
    for _ in range(iters):
        used += 1
        xi1 = se3.log_map(X @ m1_inv)
        xi2 = se3.log_map(X @ m2_inv)
        Ji1 = se3.inv_left_jacobian(xi1)
        Ji2 = se3.inv_left_jacobian(xi2)
        w1 = Ji1.T @ inv1
        w2 = Ji2.T @ inv2
        cov = inv_psd(w1 @ Ji1 + w2 @ Ji2)
        mu = -cov @ (w1 @ xi1 + w2 @ xi2)
        X = se3.renormalize_pose(se3.exp_map(mu) @ X)
        if float(np.linalg.norm(mu)) < tol:
            converged = True
            break
    return PoseBelief(X, symmetrize(cov)), used, converged


def fuse(b1: PoseBelief, b2: PoseBelief, iters: int = DEFAULT_FUSE_ITERS) -> PoseBelief:
    """Normalized product of two pose beliefs (see :func:`fuse_info`)."""
    out, _, _ = fuse_info(b1, b2, iters=iters)
    return out


def sample_pose(b: PoseBelief, rng: np.random.Generator) -> np.ndarray:
    """Draw one pose X = exp(eps^) @ mean with eps ~ N(0, cov)."""
    L = np.linalg.cholesky(symmetrize(b.cov) + 1e-15 * np.eye(6))
    eps = L @ rng.standard_normal(6)
    return se3.exp_map(eps) @ b.mean
