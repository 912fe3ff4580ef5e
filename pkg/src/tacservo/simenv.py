"""Deterministic kinematic simulation of sensor-surface contact.

Replaces the physical platform: surfaces (flat plane, sinusoidal ramp,
hemispherical dome, faces of a pushed object), a velocity-integrating
kinematic arm, a quasi-static planar pushed object, and closed-loop task
runners wiring sensing -> filtering -> control -> integration.

Frames: surface-following and tracking tasks use a world with +z up and the
sensor pointing down.  Pushing tasks use the plan convention of the
controllers: +x up, the push plane spanned by (y, z), sensors horizontal.

The sensor tip is a sphere of radius ``TIP_RADIUS_MM``; contact depth is its
penetration past the surface.  Tangential and rotational shear accumulate
from the contact-onset anchor, saturating at the trained envelope (the skin
slips beyond it), and reset when contact breaks.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import control as ctl
from . import se3
from .bayes import DynamicsNoise, filter_init, filter_step
from .sensing import (
    SHEAR_RADIUS_MM,
    SPIN_RANGE_DEG,
    ContactPose,
    SurrogateNoiseProfile,
    default_noise_profile,
    surrogate_observe,
)
from .uncertainty import belief_from_tangent

_DEG = math.pi / 180.0

TIP_RADIUS_MM = 20.0
STEP_BUDGET = 10_000
WORKSPACE_HALFWIDTH_MM = 1500.0


# --- surfaces -----------------------------------------------------------------


class FlatSurface:
    """Plane given by a pose: origin on the plane, +z the outward normal.

    The pose may be rebound between steps (e.g. a plate carried by an arm);
    shear anchors are stored in plane coordinates and move with it.
    """

    def __init__(self, pose):
        self.pose = np.array(pose, dtype=float)

    def query(self, p):
        o = self.pose[:3, 3]
        n = self.pose[:3, 2]
        q = p - np.dot(p - o, n) * n
        return q, n

    def world_from_surface(self):
        return self.pose


class RampSurface:
    """Height field z = amplitude * sin(2 pi y / wavelength), uniform in x."""

    def __init__(self, amplitude: float = 20.0, wavelength: float = 300.0):
        self.amplitude = float(amplitude)
        self.wavelength = float(wavelength)

    def height(self, y: float) -> float:
        return self.amplitude * math.sin(2.0 * math.pi * y / self.wavelength)

    def slope(self, y: float) -> float:
        k = 2.0 * math.pi / self.wavelength
        return self.amplitude * k * math.cos(k * y)

    def query(self, p):
        py, pz = float(p[1]), float(p[2])

        def d2(y):
            dz = self.height(y) - pz
            dy = y - py
            return dy * dy + dz * dz

        res = minimize_scalar(
            d2, bounds=(py - 80.0, py + 80.0), method="bounded",
            options={"xatol": 1e-10},
        )
        ys = float(res.x)
        q = np.array([p[0], ys, self.height(ys)])
        g = self.slope(ys)
        n = np.array([0.0, -g, 1.0]) / math.sqrt(1.0 + g * g)
        return q, n

    def world_from_surface(self):
        return np.eye(4)


class HemisphereSurface:
    """Dome: sphere of ``radius`` centred at ``center``, contacted from outside."""

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def query(self, p):
        u = p - self.center
        d = np.linalg.norm(u)
        n = u / d
        return self.center + self.radius * n, n


    def world_from_surface(self):
        return np.eye(4)


# --- pushed object ------------------------------------------------------------


@dataclass(frozen=True)
class Footprint:
    """Plan-view outline of a prism: convex polygon (local CCW verts) or circle."""

    kind: str
    radius: float = 0.0
    vertices: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "circle":
            if self.radius <= 0:
                raise ValueError("circle footprint needs a positive radius")
        elif self.kind == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise ValueError("polygon footprint needs at least 3 2-D vertices")
            object.__setattr__(self, "vertices", v)
        else:
            raise ValueError(f"unknown footprint kind {self.kind!r}")


def square_footprint(side: float) -> Footprint:
    h = side / 2.0
    return Footprint("polygon", vertices=np.array([[h, h], [-h, h], [-h, -h], [h, -h]]))


def hexagon_footprint(across_flats: float) -> Footprint:
    r = across_flats / 2.0 / math.cos(math.pi / 6.0)
    ang = np.deg2rad(30.0 + 60.0 * np.arange(6))
    return Footprint("polygon", vertices=r * np.column_stack([np.cos(ang), np.sin(ang)]))


def circle_footprint(radius: float) -> Footprint:
    return Footprint("circle", radius=radius)


# Plan dimensions for the stock pushing objects (mm).
FOOTPRINTS = {
    "square_large": square_footprint(60.0),
    "square_small": square_footprint(40.0),
    "circle": circle_footprint(30.0),
    "hexagon": hexagon_footprint(50.0),
}


@dataclass(frozen=True)
class ObjectState:
    """Quasi-static planar object on the support plane.

    ``position`` is the footprint centroid in plan (y, z) mm; ``heading_deg``
    rotates local footprint coordinates into the plan frame (positive about
    the up axis, +y toward +z).
    """

    position: np.ndarray
    heading_deg: float
    footprint: Footprint
    height_class: str = "short"

    def rot2(self) -> np.ndarray:
        c = math.cos(self.heading_deg * _DEG)
        s = math.sin(self.heading_deg * _DEG)
        return np.array([[c, -s], [s, c]])


def _point_in_convex_polygon(p2, verts) -> bool:
    m = len(verts)
    for i in range(m):
        a, b = verts[i], verts[(i + 1) % m]
        if np.cross(b - a, p2 - a) < 0.0:
            return False
    return True


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def step_pushed_object(
    obj: ObjectState,
    contact_point,
    push_direction,
    advance: float,
    kappa: float = 0.02,
) -> ObjectState:
    """Quasi-static push response: translate along the push, rotate by moment arm.

    The object advances by ``advance`` mm along ``push_direction``; its
    heading turns by ``kappa * m * advance`` rad, where ``m`` is the signed
    moment arm (mm) of the contact-normal line about the centroid.  The sign
    convention matches the torque of the contact force about the centroid.
    """
    contact = np.asarray(contact_point, dtype=float)
    push = np.asarray(push_direction, dtype=float)
    _, _, bd = _nearest_boundary(obj, contact)
    if abs(bd) > 0.5:
        raise ValueError(f"contact point is {bd:.2f} mm off the footprint boundary")
    moment = _cross2(contact - obj.position, push)
    heading = obj.heading_deg + (kappa * moment * advance) / _DEG
    return replace(obj, position=obj.position + advance * push, heading_deg=heading)


def _nearest_boundary(obj: ObjectState, p2):
    if obj.footprint.kind == "circle":
        c = obj.position
        u = np.asarray(p2, dtype=float) - c
        d = np.linalg.norm(u)
        if d < 1e-12:
            return c + np.array([obj.footprint.radius, 0.0]), np.array([1.0, 0.0]), -obj.footprint.radius
        n = u / d
        return c + obj.footprint.radius * n, n, d - obj.footprint.radius
    verts = obj.position + obj.footprint.vertices @ obj.rot2().T
    best_q, best_d2 = None, np.inf
    m = len(verts)
    p2 = np.asarray(p2, dtype=float)
    for i in range(m):
        a, b = verts[i], verts[(i + 1) % m]
        ab = b - a
        t = float(np.dot(p2 - a, ab) / np.dot(ab, ab))
        t = min(1.0, max(0.0, t))
        q = a + t * ab
        d2 = float(np.dot(p2 - q, p2 - q))
        if d2 < best_d2:
            best_q, best_d2 = q, d2
    dist = math.sqrt(best_d2)
    u = p2 - best_q
    inside = _point_in_convex_polygon(p2, verts)
    if dist < 1e-12:
        n = np.array([1.0, 0.0])
    else:
        n = u / dist
    if inside:
        return best_q, -n, -dist
    return best_q, n, dist


class ObjectFaceSurface:
    """Vertical faces of a pushed prism, queried at the sensor height.

    Plan solve in (y, z); the contact normal is horizontal.  Rebind ``obj``
    as the object moves; shear anchors live in object coordinates.
    """

    def __init__(self, obj: ObjectState):
        self.obj = obj

    def query(self, p):
        q2, n2, _ = _nearest_boundary(self.obj, p[1:3])
        q = np.array([p[0], q2[0], q2[1]])
        n = np.array([0.0, n2[0], n2[1]])
        return q, n

    def world_from_surface(self):
        psi = self.obj.heading_deg * _DEG
        return se3.make_pose(se3.rot_x(psi), [0.0, self.obj.position[0], self.obj.position[1]])


# --- contact sensing ----------------------------------------------------------


@dataclass
class ShearAccumulator:
    """Contact-onset anchor for the tangential/rotational shear signal.

    Stores, in surface coordinates, the onset contact point and a transported
    tangent direction; resets when contact breaks.
    """

    active: bool = False
    anchor: np.ndarray | None = None
    tangent: np.ndarray | None = None

    def reset(self):
        self.active = False
        self.anchor = None
        self.tangent = None


def true_contact(
    surface,
    sensor_pose,
    shear: ShearAccumulator,
    tip_radius: float = TIP_RADIUS_MM,
) -> ContactPose | None:
    """Ground-truth contact of the spherical sensor tip with a surface.

    Depth is the tip-sphere penetration; (alpha, beta) compare the sensor
    axes against the local feature frame at the current nearest point; the
    shear components (x, y, gamma) measure the displacement of the contact
    from its onset anchor, saturated at the trained envelope (slip).  Returns
    None and resets the accumulator when penetration is not positive.
    """
    X = np.asarray(sensor_pose, dtype=float)
    p = X[:3, 3]
    q, n = surface.query(p)
    depth = tip_radius - float(np.dot(p - q, n))
    if depth <= 0.0:
        shear.reset()
        return None

    S = surface.world_from_surface()
    Rs = S[:3, :3]
    q_s = Rs.T @ (q - S[:3, 3])
    n_s = Rs.T @ n
    x_sensor_s = Rs.T @ X[:3, 0]

    if not shear.active:
        shear.active = True
        shear.anchor = q_s
        tangent = x_sensor_s
    else:
        tangent = shear.tangent
    # Transport the tangent onto the current tangent plane.
    tangent = tangent - np.dot(tangent, n_s) * n_s
    nt = np.linalg.norm(tangent)
    if nt < 1e-9:  # degenerate transport; restart from the sensor axis
        tangent = x_sensor_s - np.dot(x_sensor_s, n_s) * n_s
        nt = np.linalg.norm(tangent)
    tangent = tangent / nt
    shear.tangent = tangent

    z_f = -n_s
    x_f = tangent
    y_f = np.cross(z_f, x_f)

    d = q_s - shear.anchor
    sx, sy = float(np.dot(d, x_f)), float(np.dot(d, y_f))
    mag = math.hypot(sx, sy)
    if mag > SHEAR_RADIUS_MM:
        sx *= SHEAR_RADIUS_MM / mag
        sy *= SHEAR_RADIUS_MM / mag

    R_wf = Rs @ np.column_stack([x_f, y_f, z_f])
    rel = se3.euler_xyz_from_rot(R_wf.T @ X[:3, :3])
    gamma = min(SPIN_RANGE_DEG, max(-SPIN_RANGE_DEG, rel[2]))
    return ContactPose(sx, sy, depth, rel[0], rel[1], gamma)


# --- arm ------------------------------------------------------------------------


@dataclass(frozen=True)
class ArmState:
    """Kinematic end effector: pose plus the last commanded velocity twist."""

    end_effector: np.ndarray
    commanded_twist: np.ndarray  # control units: mm/s, deg/s

    @classmethod
    def at(cls, pose) -> "ArmState":
        return cls(np.array(pose, dtype=float), np.zeros(6))


def integrate_arm(arm: ArmState, u, dt: float) -> ArmState:
    """Body-frame velocity integration over one control period."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    xi = ctl.twist_from_ctl(u) * dt
    pose = se3.renormalize_pose(arm.end_effector @ se3.exp_map(xi))
    return ArmState(pose, np.asarray(u, dtype=float))


# --- task configuration ---------------------------------------------------------


_TASKS = ("track", "follow_ramp", "follow_hemisphere", "push_single", "push_dual")

_TASK_DEFAULTS: dict[str, dict] = {
    "track": {
        "duration_s": 90.0,
        "controller": "tracking",
        "leader_amplitude": [75.0, 75.0, 75.0, 25.0, 25.0, 25.0],
        "leader_phase": [math.pi / 2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "leader_period_s": 30.0,
    },
    "follow_ramp": {
        "duration_s": 35.0,
        "controller": "surface_follow",
        "feedforward": [0.0, 10.0, 0.0, 0.0, 0.0, 0.0],
        "ramp_amplitude": 20.0,
        "ramp_wavelength": 300.0,
    },
    "follow_hemisphere": {
        "duration_s": 8.0,
        "controller": "surface_follow",
        "dome_radius": 150.0,
        "path_angle_deg": 0.0,
        "feedforward_speed": 10.0,
    },
    "push_single": {
        "duration_s": None,
        "controller": "push_single",
        "footprint": "square_large",
        "start_yz": [-250.0, 100.0],
        "target_yz": [0.0, 375.0],
        "sensor_height": 45.0,
        "kappa": 0.02,
        "yield_depth": 3.0,
        "tall": False,
    },
    "push_dual": {
        "duration_s": None,
        "controller": "push_dual_leader",
        "follower_controller": "stabilizer",
        "footprint": "square_large",
        "start_yz": [-250.0, 100.0],
        "target_yz": [0.0, 375.0],
        "sensor_height": 45.0,
        "kappa": 0.02,
        "yield_depth": 3.0,
        "tall": False,
    },
}


@dataclass
class TaskConfig:
    """Everything a closed-loop run needs; see ``for_task`` for defaults."""

    task: str
    control_rate_hz: float = 30.0
    duration_s: float | None = None
    max_steps: int = STEP_BUDGET
    sigma_phi: float = 0.5
    surrogate: SurrogateNoiseProfile = field(default_factory=default_noise_profile)
    controller: dict | str = ""
    follower_controller: dict | str | None = None
    params: dict = field(default_factory=dict)
    workspace_halfwidth: float = WORKSPACE_HALFWIDTH_MM

    @classmethod
    def for_task(cls, task: str, overrides: dict | None = None) -> "TaskConfig":
        if task not in _TASKS:
            raise ValueError(f"unknown task {task!r}; expected one of {_TASKS}")
        params = dict(_TASK_DEFAULTS[task])
        cfg = cls(task=task)
        cfg.duration_s = params.pop("duration_s")
        cfg.controller = params.pop("controller")
        cfg.follower_controller = params.pop("follower_controller", None)
        cfg.params = params
        for key, val in (overrides or {}).items():
            if key in params:
                params[key] = val
            elif hasattr(cfg, key):
                setattr(cfg, key, val)
            else:
                raise KeyError(f"unknown config key {key!r} for task {task!r}")
        if cfg.sigma_phi <= 0:
            raise ValueError("sigma_phi must be positive")
        if cfg.control_rate_hz <= 0:
            raise ValueError("control_rate_hz must be positive")
        return cfg

    def resolve_controller(self, which: str = "leader") -> dict:
        src = self.controller if which == "leader" else self.follower_controller
        if isinstance(src, str):
            return ctl.builtin_controller_params(src)
        return src

    def echo(self) -> dict:
        return {
            "task": self.task,
            "control_rate_hz": self.control_rate_hz,
            "duration_s": self.duration_s,
            "max_steps": self.max_steps,
            "sigma_phi": self.sigma_phi,
            "surrogate": {
                "sigma_mm_deg": [float(s) for s in self.surrogate.sigma],
                "aliasing_slip_threshold_mm": self.surrogate.aliasing_slip_threshold,
                "aliasing_inflation": self.surrogate.aliasing_inflation,
            },
            "controller": self.controller if isinstance(self.controller, str) else "inline",
            "follower_controller": self.follower_controller
            if isinstance(self.follower_controller, (str, type(None)))
            else "inline",
            "params": {k: v for k, v in self.params.items()},
        }


# --- trajectory log --------------------------------------------------------------


@dataclass
class TrajectoryLog:
    """Per-step record of a run plus a JSON-able metadata sidecar."""

    columns: list[str]
    rows: list[list[float]]
    meta: dict

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])

    def write(self, out_dir, stem: str) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        meta_path = os.path.join(out_dir, f"{stem}.meta.json")
        atomic_write_text(csv_path, self.to_csv())
        atomic_write_text(meta_path, json.dumps(self.meta, indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- sensing channel (per instrumented arm) --------------------------------------


class _Channel:
    """Contact sensing, surrogate observation and filtering for one arm."""

    def __init__(self, profile: SurrogateNoiseProfile, noise: DynamicsNoise, rng):
        self.profile = profile
        self.noise = noise
        self.rng = rng
        self.shear = ShearAccumulator()
        self.fstate = None

    def observe(self, surface, sensor_pose):
        contact = true_contact(surface, sensor_pose, self.shear)
        obs_tg = None
        obs_belief = None
        if contact is not None:
            obs_tg = surrogate_observe(contact, self.profile, self.rng)
            obs_belief = belief_from_tangent(obs_tg)
        if self.fstate is None:
            if obs_belief is None:
                return contact, obs_tg, None
            self.fstate = filter_init(obs_belief, sensor_pose)
        else:
            self.fstate = filter_step(self.fstate, obs_belief, sensor_pose, self.noise)
        return contact, obs_tg, self.fstate.filtered


_NAN6 = [float("nan")] * 6


def _arm_columns(prefix: str) -> list[str]:
    cols = []
    for group in ("pose", "contact", "obs", "fil", "cov", "u"):
        cols += [f"{prefix}_{group}_{i}" for i in range(1, 7)]
    return cols


def _arm_row(arm: ArmState, contact, obs_tg, filtered, u) -> list[float]:
    row = list(se3.euler_from_pose(arm.end_effector))
    row += list(contact.as_array()) if contact is not None else _NAN6
    row += list(obs_tg.mu) if obs_tg is not None else _NAN6
    if filtered is not None:
        row += list(se3.log_map(filtered.mean))
        row += list(np.diag(filtered.cov))
    else:
        row += _NAN6 + _NAN6
    row += list(u)
    return row


def _in_workspace(pose, halfwidth: float) -> bool:
    return bool(np.all(np.abs(pose[:3, 3]) <= halfwidth))


# --- task runners -----------------------------------------------------------------


def run_task(task: str, cfg: TaskConfig | dict | None = None, seed: int = 0) -> TrajectoryLog:
    """Run one closed-loop task and return its trajectory log.

    ``cfg`` may be a TaskConfig, a dict of overrides, or None for defaults.
    Identical (cfg, seed) pairs produce bit-identical logs.
    """
    if not isinstance(cfg, TaskConfig):
        cfg = TaskConfig.for_task(task, overrides=cfg)
    if cfg.task != task:
        raise ValueError(f"config is for task {cfg.task!r}, not {task!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    if task == "track":
        log = _run_track(cfg, rng)
    elif task in ("follow_ramp", "follow_hemisphere"):
        log = _run_surface_follow(cfg, rng)
    else:
        log = _run_push(cfg, rng, dual=(task == "push_dual"))
    log.meta["task"] = task
    log.meta["seed"] = seed
    log.meta["config"] = cfg.echo()
    return log


def _steps(cfg: TaskConfig, dt: float) -> int:
    if cfg.duration_s is None:
        return cfg.max_steps
    return min(int(round(cfg.duration_s / dt)), cfg.max_steps)


# Downward-pointing sensor with its y-axis along world +y.
_SENSOR_DOWN = np.array([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])


def _run_surface_follow(cfg: TaskConfig, rng) -> TrajectoryLog:
    dt = 1.0 / cfg.control_rate_hz
    n = _steps(cfg, dt)
    params = cfg.params
    table = cfg.resolve_controller()
    servo_cfg, pid_cfg = ctl.servo_setup(table)

    if cfg.task == "follow_ramp":
        surface = RampSurface(params["ramp_amplitude"], params["ramp_wavelength"])
        ff = np.asarray(params["feedforward"], dtype=float)
        y0 = surface.wavelength / 4.0  # crest
        start_q = np.array([0.0, y0, surface.height(y0)])
        normal = np.array([0.0, 0.0, 1.0])
    else:
        surface = HemisphereSurface([0.0, 0.0, -params["dome_radius"]], params["dome_radius"])
        ang = params["path_angle_deg"] * _DEG
        speed = params["feedforward_speed"]
        ff = np.array([speed * math.cos(ang), speed * math.sin(ang), 0.0, 0.0, 0.0, 0.0])
        start_q = np.array([0.0, 0.0, 0.0])  # apex
        normal = np.array([0.0, 0.0, 1.0])

    servo_cfg = ctl.ServoConfig(servo_cfg.reference_pose, ff)
    depth_ref = float(se3.euler_from_pose(servo_cfg.reference_pose)[2])
    pose0 = se3.make_pose(_SENSOR_DOWN, start_q + (TIP_RADIUS_MM - depth_ref) * normal)
    arm = ArmState.at(pose0)

    channel = _Channel(cfg.surrogate, DynamicsNoise.from_mm_deg(cfg.sigma_phi), rng)
    pid_state = ctl.ControllerState.initial()

    columns = ["t"] + _arm_columns("a0")
    rows = []
    termination = "completed"
    for k in range(n):
        t = k * dt
        contact, obs_tg, filtered = channel.observe(surface, arm.end_effector)
        if filtered is not None:
            u, pid_state = ctl.servo_control(servo_cfg, pid_cfg, pid_state, filtered.mean, dt)
        else:
            u = np.zeros(6)
        rows.append([t] + _arm_row(arm, contact, obs_tg, filtered, u))
        arm = integrate_arm(arm, u, dt)
        if not _in_workspace(arm.end_effector, cfg.workspace_halfwidth):
            termination = "aborted:workspace"
            break
    return TrajectoryLog(columns, rows, {"termination_reason": termination, "n_steps": len(rows)})


def _run_track(cfg: TaskConfig, rng) -> TrajectoryLog:
    dt = 1.0 / cfg.control_rate_hz
    n = _steps(cfg, dt)
    params = cfg.params
    table = cfg.resolve_controller()
    servo_cfg, pid_cfg = ctl.servo_setup(table)
    depth_ref = float(se3.euler_from_pose(servo_cfg.reference_pose)[2])

    amp = np.asarray(params["leader_amplitude"], dtype=float)
    phase = np.asarray(params["leader_phase"], dtype=float)
    period = float(params["leader_period_s"])

    leader_pose = np.eye(4)  # plate at the origin, outward normal +z
    plate = FlatSurface(leader_pose)
    follower = ArmState.at(
        se3.make_pose(_SENSOR_DOWN, [0.0, 0.0, TIP_RADIUS_MM - depth_ref])
    )
    leader = ArmState.at(leader_pose)

    channel = _Channel(cfg.surrogate, DynamicsNoise.from_mm_deg(cfg.sigma_phi), rng)
    pid_state = ctl.ControllerState.initial()

    columns = ["t"] + _arm_columns("a0") + _arm_columns("a1")
    rows = []
    termination = "completed"
    for k in range(n):
        t = k * dt
        plate.pose = leader.end_effector
        contact, obs_tg, filtered = channel.observe(plate, follower.end_effector)
        if filtered is not None:
            u, pid_state = ctl.servo_control(servo_cfg, pid_cfg, pid_state, filtered.mean, dt)
        else:
            u = np.zeros(6)
        v = (2.0 * math.pi * amp / period) * np.cos(2.0 * math.pi * t / period + phase)
        rows.append(
            [t]
            + _arm_row(leader, None, None, None, v)
            + _arm_row(follower, contact, obs_tg, filtered, u)
        )
        # Leader: world-frame twist about its own origin.
        lp = leader.end_effector
        rot = se3.exp_map(np.concatenate([np.zeros(3), v[3:] * _DEG * dt]))[:3, :3]
        new_pose = se3.renormalize_pose(
            se3.make_pose(rot @ lp[:3, :3], lp[:3, 3] + v[:3] * dt)
        )
        leader = ArmState(new_pose, v)
        follower = integrate_arm(follower, u, dt)
        if not (
            _in_workspace(follower.end_effector, cfg.workspace_halfwidth)
            and _in_workspace(leader.end_effector, cfg.workspace_halfwidth)
        ):
            termination = "aborted:workspace"
            break
    return TrajectoryLog(columns, rows, {"termination_reason": termination, "n_steps": len(rows)})


# Pushing world: +x up, plan plane (y, z).
_PUSHER_R = np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])  # z_s = +y_w
_FOLLOWER_R = np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]])  # z_s = -y_w


def _face_to_center(fp: Footprint) -> float:
    if fp.kind == "circle":
        return fp.radius
    # distance from centroid to the face whose outward normal is -y locally
    return float(-np.min(fp.vertices[:, 0]))


def _run_push(cfg: TaskConfig, rng, dual: bool) -> TrajectoryLog:
    dt = 1.0 / cfg.control_rate_hz
    n = _steps(cfg, dt)
    params = cfg.params
    tall = bool(params.get("tall", False))

    leader_table = cfg.resolve_controller("leader")
    if tall and isinstance(cfg.controller, str) and not cfg.controller.endswith("_tall"):
        leader_table = ctl.builtin_controller_params(
            "push_dual_leader_tall" if dual else "push_single"
        )
    push_cfg, servo_pid = ctl.push_setup(leader_table)

    start = np.asarray(params["start_yz"], dtype=float)
    target = np.asarray(params["target_yz"], dtype=float)
    height = float(params["sensor_height"])
    kappa = float(params["kappa"])
    yield_depth = float(params["yield_depth"])
    fp = FOOTPRINTS[params["footprint"]]

    init_depth = 3.0
    face_y = start[0] + (TIP_RADIUS_MM - init_depth)
    obj = ObjectState(
        position=np.array([face_y + _face_to_center(fp), start[1]]),
        heading_deg=0.0,
        footprint=fp,
        height_class="tall" if tall else "short",
    )

    pusher = ArmState.at(se3.make_pose(_PUSHER_R, [height, start[0], start[1]]))
    target_pose = se3.make_pose(np.eye(3), [height, target[0], target[1]])

    noise = DynamicsNoise.from_mm_deg(cfg.sigma_phi)
    chan0 = _Channel(cfg.surrogate, noise, rng)
    servo_state = ctl.ControllerState.initial()
    align_state = ctl.ControllerState.initial(1)

    follower = None
    chan1 = None
    fservo_cfg = fpid_cfg = fstate_pid = None
    if dual:
        ftable = cfg.resolve_controller("follower")
        if tall and isinstance(cfg.follower_controller, str) and not str(
            cfg.follower_controller
        ).endswith("_tall"):
            ftable = ctl.builtin_controller_params("stabilizer_tall")
        fservo_cfg, fpid_cfg = ctl.servo_setup(ftable)
        fdepth = float(se3.euler_from_pose(fservo_cfg.reference_pose)[2])
        far_y = obj.position[0] + _face_to_center(fp)
        follower = ArmState.at(
            se3.make_pose(_FOLLOWER_R, [height, far_y + (TIP_RADIUS_MM - fdepth), start[1]])
        )
        chan1 = _Channel(cfg.surrogate, noise, rng)
        fstate_pid = ctl.ControllerState.initial()

    columns = ["t"] + _arm_columns("a0")
    if dual:
        columns += _arm_columns("a1")
    columns += ["obj_y", "obj_z", "obj_heading_deg", "bearing_deg", "distance_mm", "done"]

    rows = []
    termination = "step_budget_exhausted"
    done = False
    bearing = float("nan")
    dist = float("nan")
    final_contact = None
    final_push_dir = None

    for k in range(n):
        t = k * dt
        face = ObjectFaceSurface(obj)
        contact, obs_tg, filtered = chan0.observe(face, pusher.end_effector)
        if filtered is not None:
            u0, servo_state, align_state, done = ctl.push_control(
                push_cfg,
                servo_pid,
                servo_state,
                align_state,
                filtered.mean,
                pusher.end_effector,
                target_pose,
                dt,
            )
            E = ctl.servo_error(filtered.mean, se3.inv_pose(push_cfg.servo.reference_pose))
            bearing, dist = ctl.target_geometry(E, pusher.end_effector, target_pose)
        else:
            u0 = np.zeros(6)

        row = [t] + _arm_row(pusher, contact, obs_tg, filtered, u0)

        if dual:
            fcontact, fobs, ffiltered = chan1.observe(face, follower.end_effector)
            if ffiltered is not None:
                u1, fstate_pid = ctl.servo_control(
                    fservo_cfg, fpid_cfg, fstate_pid, ffiltered.mean, dt
                )
            else:
                u1 = np.zeros(6)
            row += _arm_row(follower, fcontact, fobs, ffiltered, u1)

        row += [obj.position[0], obj.position[1], obj.heading_deg, bearing, dist, float(done)]
        rows.append(row)
        if done:
            termination = "done"
            break

        pusher = integrate_arm(pusher, u0, dt)
        if dual:
            follower = integrate_arm(follower, u1, dt)

        # Quasi-static yield: contacts pressed past the nominal compliance
        # depth jointly displace the object by the net of their reliefs (the
        # opposing-contact forces balance); the moment acts at the pusher's
        # contact.  A stabilizer-only relief translates without torque.
        reliefs = []
        pusher_contact = None
        for arm_state in ([pusher, follower] if dual else [pusher]):
            p = arm_state.end_effector[:3, 3]
            q2, n2, sdist = _nearest_boundary(obj, p[1:3])
            pen = TIP_RADIUS_MM - sdist
            adv = pen - yield_depth
            if adv > 0.0:
                reliefs.append(adv * -n2)
                if arm_state is pusher:
                    pusher_contact = q2
        if reliefs:
            delta = np.sum(reliefs, axis=0)
            mag = float(np.linalg.norm(delta))
            if mag > 1e-12:
                if pusher_contact is not None:
                    obj = step_pushed_object(obj, pusher_contact, delta / mag, mag, kappa)
                    final_contact, final_push_dir = pusher_contact, delta / mag
                else:
                    obj = replace(obj, position=obj.position + delta)

        if not _in_workspace(pusher.end_effector, cfg.workspace_halfwidth):
            termination = "aborted:workspace"
            break

    meta = {
        "termination_reason": termination,
        "n_steps": len(rows),
        "done": bool(done),
    }
    if final_contact is not None:
        miss = abs(_cross2(final_push_dir, target - final_contact))
        meta["final_miss_mm"] = float(miss)
    return TrajectoryLog(columns, rows, meta)
