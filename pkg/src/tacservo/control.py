"""Tangent-space feedforward-feedback PID control, servoing and pushing.

Controller signals live in "control units": translations in mm (mm/s) and
rotations in deg (deg/s), matching how the gain tables, reference poses and
feedforward velocities are written.  Geometry (poses, log/exp) stays in rad;
the deg/rad scaling is applied exactly once, at the error-computation
boundary (:func:`twist_to_ctl` / :func:`twist_from_ctl`).

The discrete PID accumulates the integral as a per-cycle sum and differences
the smoothed error per cycle (backward Euler at the controller rate); the
published gains are interpreted as acting on those per-cycle quantities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import se3

_DEG = math.pi / 180.0
_CTL_SCALE = np.array([1.0, 1.0, 1.0, 1.0 / _DEG, 1.0 / _DEG, 1.0 / _DEG])


def twist_to_ctl(xi) -> np.ndarray:
    """Physical twist (mm, rad) -> control units (mm, deg)."""
    return np.asarray(xi, dtype=float) * _CTL_SCALE


def twist_from_ctl(u) -> np.ndarray:
    """Control units (mm, deg) -> physical twist (mm, rad)."""
    return np.asarray(u, dtype=float) / _CTL_SCALE


def ctl_adjoint(pose) -> np.ndarray:
    """Adjoint of a pose acting on control-unit twists (S Ad S^-1)."""
    return (se3.adjoint(pose) * _CTL_SCALE[:, None]) / _CTL_SCALE[None, :]


@dataclass(frozen=True)
class PidConfig:
    """Diagonal PID gains plus optional clipping; works for any channel count.

    ``kp``/``ki``/``kd`` are the diagonals of the gain matrices.  Clips are
    (lo, hi) applied per component, to the integral accumulator and to the
    feedback output respectively.
    """

    kp: np.ndarray
    ki: np.ndarray
    kd: np.ndarray
    integral_clip: tuple[float, float] | None = None
    output_clip: tuple[float, float] | None = None
    ewma_decay: float = 0.5

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            g = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(~np.isfinite(g)) or np.any(g < 0):
                raise ValueError(f"{name} gains must be finite and >= 0")
            object.__setattr__(self, name, g)
        for name in ("integral_clip", "output_clip"):
            clip = getattr(self, name)
            if clip is not None:
                lo, hi = clip
                if not lo < hi:
                    raise ValueError(f"{name} lower bound must be below upper bound")
        if not 0.0 < self.ewma_decay < 1.0:
            raise ValueError("ewma_decay must be in (0, 1)")


@dataclass(frozen=True)
class ControllerState:
    """Integral accumulator, smoothed error and elapsed time; caller-owned."""

    integral: np.ndarray
    smoothed_error: np.ndarray | None
    prev_time: float

    @classmethod
    def initial(cls, dim: int = 6) -> "ControllerState":
        return cls(np.zeros(dim), None, 0.0)


def pid_update(
    cfg: PidConfig, state: ControllerState, error, dt: float
) -> tuple[np.ndarray, ControllerState]:
    """One discrete PID cycle: returns (feedback signal, new state).

    The integral is a clipped per-cycle sum; the derivative is the per-cycle
    difference of the EWMA-smoothed error (zero on the first cycle after
    reset).  Proportional acts on the raw error.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    e = np.atleast_1d(np.asarray(error, dtype=float))
    integral = state.integral + e
    if cfg.integral_clip is not None:
        integral = np.clip(integral, *cfg.integral_clip)
    if state.smoothed_error is None:
        smoothed = e
        deriv = np.zeros_like(e)
    else:
        d = cfg.ewma_decay
        smoothed = d * state.smoothed_error + (1.0 - d) * e
        deriv = smoothed - state.smoothed_error
    u = cfg.kp * e + cfg.ki * integral + cfg.kd * deriv
    if cfg.output_clip is not None:
        u = np.clip(u, *cfg.output_clip)
    return u, ControllerState(integral, smoothed, state.prev_time + dt)


# --- servoing -----------------------------------------------------------------


@dataclass(frozen=True)
class ServoConfig:
    """Feedback reference pose (sensor-in-feature, 4x4) and feedforward twist.

    The feedforward is expressed in the reference sensor frame, in control
    units (mm/s, deg/s).
    """

    reference_pose: np.ndarray
    feedforward: np.ndarray


def pose_error(observed, reference) -> np.ndarray:
    """Twist moving the observed pose onto the reference, in the observed frame.

    e = log(inv(observed) @ reference), so reference = observed @ exp(e).
    """
    return se3.log_map(se3.inv_pose(observed) @ np.asarray(reference, dtype=float))


def servo_error(filtered_feature_pose, reference_sensor_to_feature) -> np.ndarray:
    """Transform from the current sensor frame to the reference sensor frame.

    E = X_sf @ inv(X_s'f): the estimated feature pose in the sensor frame
    composed with the feature-to-reference-sensor transform.  Its log is the
    servo feedback error.
    """
    return np.asarray(filtered_feature_pose, dtype=float) @ se3.inv_pose(
        reference_sensor_to_feature
    )


def servo_control(
    cfg: ServoConfig,
    pid_cfg: PidConfig,
    state: ControllerState,
    feature_pose,
    dt: float,
) -> tuple[np.ndarray, ControllerState]:
    """Tactile servoing: PID on the tangent error plus adjoint-mapped feedforward.

    ``feature_pose`` is the (filtered) surface feature pose in the current
    sensor frame.  Returns the velocity command in control units, expressed
    in the current sensor frame.
    """
    E = servo_error(feature_pose, se3.inv_pose(cfg.reference_pose))
    e = twist_to_ctl(se3.log_map(E))
    u_fb, state = pid_update(pid_cfg, state, e, dt)
    return u_fb + ctl_adjoint(E) @ cfg.feedforward, state


# --- pushing ------------------------------------------------------------------


def target_geometry(servo_err_pose, sensor_pose_world, target_pose_world) -> tuple[float, float]:
    """Bearing (deg) and in-plane distance (mm) of the target, in the reference sensor frame.

    The target is mapped through inv(E) inv(X_ws) X_wt; bearing and distance
    come from the (y, z) translation components of the result, with z the
    push direction and y the steering direction.
    """
    X = se3.inv_pose(servo_err_pose) @ se3.inv_pose(sensor_pose_world) @ np.asarray(
        target_pose_world, dtype=float
    )
    y, z = X[1, 3], X[2, 3]
    return math.atan2(y, z) / _DEG, math.hypot(y, z)


@dataclass(frozen=True)
class PushConfig:
    """Servoing config plus the target-alignment loop parameters."""

    servo: ServoConfig
    align_pid: PidConfig
    reference_bearing: float = 0.0
    align_gate_mm: float = 120.0
    done_radius_mm: float = 20.0


def push_control(
    cfg: PushConfig,
    servo_pid: PidConfig,
    servo_state: ControllerState,
    align_state: ControllerState,
    feature_pose,
    sensor_pose_world,
    target_pose_world,
    dt: float,
) -> tuple[np.ndarray, ControllerState, ControllerState, bool]:
    """Pushing cycle: servo feedback plus a bearing-alignment channel.

    A scalar PID on the bearing error (reference minus observed) produces a
    tangential y velocity in the reference sensor frame; it is zeroed inside
    ``align_gate_mm`` of the target for stability and mapped to the current
    sensor frame through the servo-error adjoint together with the
    feedforward.  ``done`` flags arrival within ``done_radius_mm``.
    """
    E = servo_error(feature_pose, se3.inv_pose(cfg.servo.reference_pose))
    e = twist_to_ctl(se3.log_map(E))
    u_fb, servo_state = pid_update(servo_pid, servo_state, e, dt)

    bearing, dist = target_geometry(E, sensor_pose_world, target_pose_world)
    bearing_error = cfg.reference_bearing - bearing
    u_align, align_state = pid_update(cfg.align_pid, align_state, [bearing_error], dt)
    ref_frame_cmd = np.array(cfg.servo.feedforward, dtype=float)
    if dist >= cfg.align_gate_mm:
        ref_frame_cmd[1] += u_align[0]
    u = u_fb + ctl_adjoint(E) @ ref_frame_cmd
    return u, servo_state, align_state, dist < cfg.done_radius_mm


# --- parameter tables ---------------------------------------------------------

# Built-in controller parameter sets (diagonal gains as 6-vectors, clip
# ranges, reference pose as an Euler 6-vector in mm/deg, feedforward as a
# twist 6-vector in mm/s and deg/s).
_BUILTIN_PARAMS: dict[str, dict] = {
    "tracking": {
        "pid": {
            "kp": [5, 5, 5, 2, 2, 0],
            "ki": [0.5, 0.5, 0.5, 0.2, 0.2, 0.2],
            "kd": [0.5, 0.5, 0.5, 0.2, 0.2, 0.2],
            "integral_clip": None,
        },
        "reference_pose_mm_deg": [0, 0, 6, 0, 0, 0],
        "feedforward_mm_s_deg_s": [0, 0, 0, 0, 0, 0],
    },
    "surface_follow": {
        "pid": {
            "kp": [0, 0, 2, 2, 2, 0],
            "ki": [0, 0, 0.1, 0.1, 0.1, 0],
            "kd": [0, 0, 0.05, 0.05, 0.05, 0],
            "integral_clip": [-25, 25],
        },
        "reference_pose_mm_deg": [0, 0, 3, 0, 0, 0],
        "feedforward_mm_s_deg_s": [0, 0, 0, 0, 0, 0],
    },
    "push_single": {
        "pid": {
            "kp": [1, 0, 0, 1, 0, 0],
            "ki": [0.1, 0, 0, 0.1, 0, 0],
            "kd": [0.1, 0, 0, 0.1, 0, 0],
            "integral_clip": [-25, 25],
        },
        "reference_pose_mm_deg": [0, 0, 0, 0, 0, 0],
        "feedforward_mm_s_deg_s": [0, 0, 10, 0, 0, 0],
        "align_pid": {
            "kp": 0.9,
            "ki": 0.3,
            "kd": 0.9,
            "integral_clip": [-10, 10],
            "output_clip": [-15, 15],
        },
        "reference_bearing_deg": 0.0,
        "align_gate_mm": 120.0,
        "done_radius_mm": 20.0,
    },
    "stabilizer": {
        "pid": {
            "kp": [5, 0, 5, 1, 0, 0],
            "ki": [0.5, 0, 0.5, 0.1, 0, 0],
            "kd": [0.5, 0, 0.5, 0.1, 0, 0],
            "integral_clip": [-200, 200],
        },
        "reference_pose_mm_deg": [0, 0, 3, 0, 0, 0],
        "feedforward_mm_s_deg_s": [0, 0, 0, 0, 0, 0],
    },
}


def _with_overrides(base: str, **changes) -> dict:
    import copy

    out = copy.deepcopy(_BUILTIN_PARAMS[base])
    out.update(changes)
    return out


# Dual-arm leader uses a stiffer alignment integral; tall-object variants
# shift the vertical reference by 0.5 mm (down on the pushed side, up on the
# stabilized side).
_BUILTIN_PARAMS["push_dual_leader"] = _with_overrides("push_single")
_BUILTIN_PARAMS["push_dual_leader"]["align_pid"]["ki"] = 0.5
_BUILTIN_PARAMS["push_dual_leader_tall"] = _with_overrides(
    "push_dual_leader", reference_pose_mm_deg=[0.5, 0, 0, 0, 0, 0]
)
_BUILTIN_PARAMS["stabilizer_tall"] = _with_overrides(
    "stabilizer", reference_pose_mm_deg=[-0.5, 0, 3, 0, 0, 0]
)


def builtin_controller_names() -> list[str]:
    return sorted(_BUILTIN_PARAMS)


def builtin_controller_params(name: str) -> dict:
    """Deep copy of a built-in parameter table."""
    import copy

    if name not in _BUILTIN_PARAMS:
        raise KeyError(f"unknown controller parameter set {name!r}")
    return copy.deepcopy(_BUILTIN_PARAMS[name])


def save_controller_params(path, params: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(params, f, indent=2, sort_keys=True)
        f.write("\n")


def load_controller_params(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _pid_from_dict(d: dict, scalar: bool = False) -> PidConfig:
    def g(key):
        v = d[key]
        return np.atleast_1d(np.asarray(v, dtype=float))

    def clip(key):
        v = d.get(key)
        return None if v is None else (float(v[0]), float(v[1]))

    return PidConfig(
        kp=g("kp"),
        ki=g("ki"),
        kd=g("kd"),
        integral_clip=clip("integral_clip"),
        output_clip=clip("output_clip"),
        ewma_decay=float(d.get("ewma_decay", 0.5)),
    )


def servo_setup(params: dict) -> tuple[ServoConfig, PidConfig]:
    """Build the servoing configs from a parameter table dict."""
    servo = ServoConfig(
        reference_pose=se3.pose_from_euler(params["reference_pose_mm_deg"]),
        feedforward=np.asarray(params["feedforward_mm_s_deg_s"], dtype=float),
    )
    return servo, _pid_from_dict(params["pid"])


def push_setup(params: dict) -> tuple[PushConfig, PidConfig]:
    """Build the pushing configs from a parameter table dict."""
    servo, servo_pid = servo_setup(params)
    cfg = PushConfig(
        servo=servo,
        align_pid=_pid_from_dict(params["align_pid"], scalar=True),
        reference_bearing=float(params.get("reference_bearing_deg", 0.0)),
        align_gate_mm=float(params.get("align_gate_mm", 120.0)),
        done_radius_mm=float(params.get("done_radius_mm", 20.0)),
    )
    return cfg, servo_pid
