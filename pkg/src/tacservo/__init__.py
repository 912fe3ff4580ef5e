"""Tactile pose-and-shear servoing toolkit.

SE(3) operators, concentrated-Gaussian pose beliefs with on-manifold fusion,
a discriminative Bayesian filter driven by sensor kinematics, tangent-space
feedforward-feedback controllers, and a deterministic contact simulation that
exercises them end to end.
"""

from . import bayes, control, se3, sensing, simenv, uncertainty

__all__ = ["se3", "uncertainty", "bayes", "sensing", "control", "simenv"]
__version__ = "0.1.0"
