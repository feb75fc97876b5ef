"""Synthetic flight generator: analytic trajectories, elastic-rope force,
IMU/thrust/feature-track streams with seeded noise.

Ground truth is produced in closed form (no numeric differentiation of the
trajectory), the rope force is a piecewise-linear spring with a slack
region, and the inertial/thrust measurements invert the motion model so
that, with noise disabled, accel - thrust equals the body-frame external
force exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import so3
from .errors import ConfigError
from .vision import CameraModel, project_pinhole
from .state import PoseClone

_FORWARD_CAMERA = np.array(
    [
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ]
)


@dataclass
class SimConfig:
    """Scenario description: trajectory, rope, rates, noise, seed."""

    trajectory: str = "lemniscate"  # hover | circle | lemniscate
    amplitude: float = 1.5          # m
    period: float = 12.0            # s
    duration: float = 60.0          # s
    imu_rate: float = 200.0         # Hz
    cam_rate: float = 20.0          # Hz
    center: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.5]))
    yaw_amplitude: float = 0.4      # rad
    yaw_period: float = 12.0        # s
    attitude_mode: str = "level"    # level | flatness

    rope_anchor: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.5]))
    rope_rest_length: float = 1.5   # m
    rope_stiffness: float = 2.0     # m/s^2 per m of stretch
    step_force: np.ndarray = field(default_factory=lambda: np.zeros(3))  # body frame
    step_time: float = 0.0          # s, step force applies for t >= step_time

    landmark_count: int = 150
    landmark_radius_min: float = 3.0
    landmark_radius_max: float = 6.0
    landmark_z_min: float = -1.5    # relative to center z
    landmark_z_max: float = 2.5
    vis_depth_min: float = 0.2
    vis_depth_max: float = 30.0

    # measurement noise (white, per sample unless noted)
    sigma_gyro: float = 0.002       # rad/s/sqrt(Hz), density
    sigma_gyro_bias: float = 5e-5   # rad/s^2/sqrt(Hz), walk density
    sigma_accel_bias: float = 5e-4  # m/s^3/sqrt(Hz), walk density
    sigma_accel: float = 0.1        # m/s^2, per sample
    sigma_pixel: float = 1.0        # px, per sample
    sigma_thrust_meas: float = 0.02  # m/s^2, per sample
    init_gyro_bias_std: float = 2e-3
    init_accel_bias_std: float = 1e-2

    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    # camera (matches the estimator defaults)
    fx: float = 400.0
    fy: float = 400.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480
    r_ic: np.ndarray = field(default_factory=lambda: _FORWARD_CAMERA.copy())
    p_ic: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.0, 0.0]))

    seed: int = 42

    def validate(self):
        if self.trajectory not in ("hover", "circle", "lemniscate"):
            raise ConfigError(f"sim.trajectory '{self.trajectory}' not recognized")
        if self.attitude_mode not in ("level", "flatness"):
            raise ConfigError(f"sim.attitude_mode '{self.attitude_mode}' not recognized")
        if self.imu_rate <= 0 or self.cam_rate <= 0:
            raise ConfigError("sim rates must be positive")
        ratio = self.imu_rate / self.cam_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("sim.imu_rate must be an integer multiple of sim.cam_rate")
        if self.duration <= 0:
            raise ConfigError("sim.duration must be positive")
        if self.period <= 0 or self.yaw_period <= 0:
            raise ConfigError("sim periods must be positive")
        if self.rope_stiffness < 0:
            raise ConfigError("sim.rope_stiffness must be >= 0")
        if self.landmark_radius_min <= 0 or self.landmark_radius_max < self.landmark_radius_min:
            raise ConfigError("sim landmark radii must satisfy 0 < min <= max")
        for name in ("sigma_gyro", "sigma_gyro_bias", "sigma_accel_bias", "sigma_accel",
                     "sigma_pixel", "sigma_thrust_meas"):
            if getattr(self, name) < 0:
                raise ConfigError(f"sim {name} must be >= 0")
        return self

    def camera(self):
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.r_ic, self.p_ic,
                           self.width, self.height)


@dataclass
class SimRecord:
    """One ground-truth sample."""

    t: float
    q: np.ndarray            # attitude, world -> body map
    p: np.ndarray            # m, world
    v: np.ndarray            # m/s, world
    a_w: np.ndarray          # m/s^2, world
    omega: np.ndarray        # rad/s, body
    force_body: np.ndarray   # m/s^2, body-frame external force
    thrust_body: np.ndarray  # m/s^2, body-frame mass-normalized thrust


@dataclass
class SimDataset:
    """Measurement streams plus ground truth, all seeded-deterministic."""

    imu_t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    thrust_t: np.ndarray
    thrust: np.ndarray
    frames: list  # (t, ids int array, uv (m, 2) array)
    truth_t: np.ndarray
    truth_q: np.ndarray
    truth_p: np.ndarray
    truth_v: np.ndarray
    truth_force: np.ndarray
    landmarks: np.ndarray  # (L, 3) world positions
    true_gyro_bias: np.ndarray
    true_accel_bias: np.ndarray


def rope_force(p, anchor, rest_length, stiffness):
    """World-frame spring force pulling toward the anchor; zero when slack."""
    if stiffness == 0.0:
        return np.zeros(3)
    delta = np.asarray(p, dtype=float) - np.asarray(anchor, dtype=float)
    dist = np.linalg.norm(delta)
    if dist < 1e-9:
        if rest_length < 1e-9:
            raise ValueError("rope direction degenerate: vehicle at the anchor, taut rope")
        return np.zeros(3)
    stretch = dist - rest_length
    if stretch <= 0.0:
        return np.zeros(3)
    return -stiffness * stretch * delta / dist


def _translation(cfg, t):
    """Closed-form position, velocity, acceleration at time t."""
    c = cfg.center
    A = cfg.amplitude
    if cfg.trajectory == "hover":
        return c.copy(), np.zeros(3), np.zeros(3)
    th = 2.0 * np.pi * t / cfg.period
    thd = 2.0 * np.pi / cfg.period
    if cfg.trajectory == "circle":
        p = c + A * np.array([np.cos(th) - 1.0, np.sin(th), 0.0])
        v = A * thd * np.array([-np.sin(th), np.cos(th), 0.0])
        a = A * thd**2 * np.array([-np.cos(th), -np.sin(th), 0.0])
        return p, v, a
    # lemniscate of Gerono with a gentle altitude ripple
    zf = 0.2
    p = c + A * np.array([np.sin(th), 0.5 * np.sin(2 * th), zf * np.sin(2 * th)])
    v = A * thd * np.array([np.cos(th), np.cos(2 * th), 2 * zf * np.cos(2 * th)])
    a = A * thd**2 * np.array([-np.sin(th), -2 * np.sin(2 * th), -4 * zf * np.sin(2 * th)])
    return p, v, a


def _yaw(cfg, t):
    w = 2.0 * np.pi / cfg.yaw_period
    psi = cfg.yaw_amplitude * np.sin(w * t)
    psid = cfg.yaw_amplitude * w * np.cos(w * t)
    return psi, psid


def _world_force(cfg, t, p):
    f = rope_force(p, cfg.rope_anchor, cfg.rope_rest_length, cfg.rope_stiffness)
    return f


def _attitude_level(cfg, t):
    psi, psid = _yaw(cfg, t)
    q = so3.quat_from_rotvec(np.array([0.0, 0.0, -psi]))
    omega = np.array([0.0, 0.0, psid])
    return q, omega


def _attitude_flatness_q(cfg, t):
    """Thrust-aligned attitude: body z follows the required thrust direction."""
    p, v, a = _translation(cfg, t)
    f_w = _world_force(cfg, t, p)
    thrust_w = a - cfg.gravity - f_w
    n = np.linalg.norm(thrust_w)
    if n < 1e-6:
        raise ValueError("flatness attitude undefined: free-fall trajectory point")
    zb = thrust_w / n
    psi, _ = _yaw(cfg, t)
    xc = np.array([np.cos(psi), np.sin(psi), 0.0])
    yb = np.cross(zb, xc)
    yb /= np.linalg.norm(yb)
    xb = np.cross(yb, zb)
    B = np.column_stack([xb, yb, zb])  # body axes in world coordinates
    return so3.rot_to_quat(B.T)


def _attitude(cfg, t):
    if cfg.attitude_mode == "level":
        return _attitude_level(cfg, t)
    q = _attitude_flatness_q(cfg, t)
    h = 1e-4
    q_m = _attitude_flatness_q(cfg, t - h) if t >= h else q
    q_p = _attitude_flatness_q(cfg, t + h)
    span = (t + h) - (t - h if t >= h else t)
    omega = so3.boxminus(q_p, q_m) / span
    return q, omega


def gen_trajectory(cfg):
    """Ground-truth records at IMU-rate spacing."""
    cfg.validate()
    n = int(round(cfg.duration * cfg.imu_rate)) + 1
    dt = 1.0 / cfg.imu_rate
    records = []
    for k in range(n):
        t = k * dt
        p, v, a = _translation(cfg, t)
        q, omega = _attitude(cfg, t)
        R = so3.quat_to_rot(q)
        force_body = R @ _world_force(cfg, t, p)
        if cfg.step_time > 0.0 and t >= cfg.step_time:
            force_body = force_body + cfg.step_force
        thrust_body = R @ (a - cfg.gravity) - force_body
        records.append(SimRecord(t, q, p, v, a, omega, force_body, thrust_body))
    return records


def gen_landmarks(cfg, records, rng=None):
    """Seeded uniform landmarks on a cylindrical shell around the trajectory."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    count = cfg.landmark_count
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    radius = rng.uniform(cfg.landmark_radius_min, cfg.landmark_radius_max, count)
    z = cfg.center[2] + rng.uniform(cfg.landmark_z_min, cfg.landmark_z_max, count)
    pts = np.column_stack(
        [cfg.center[0] + radius * np.cos(angle), cfg.center[1] + radius * np.sin(angle), z]
    )
    return pts


def synthesize(cfg):
    """Full dataset: noisy IMU/thrust streams, feature frames, ground truth."""
    cfg.validate()
    records = gen_trajectory(cfg)
    n = len(records)
    dt = 1.0 / cfg.imu_rate

    seeds = np.random.SeedSequence(cfg.seed).spawn(6)
    rng_landmarks = np.random.default_rng(seeds[0])
    rng_bias = np.random.default_rng(seeds[1])
    rng_gyro = np.random.default_rng(seeds[2])
    rng_accel = np.random.default_rng(seeds[3])
    rng_thrust = np.random.default_rng(seeds[4])
    rng_pixel = np.random.default_rng(seeds[5])

    landmarks = gen_landmarks(cfg, records, rng_landmarks)

    # bias random walks (Euler-Maruyama at IMU rate)
    bg = np.zeros((n, 3))
    ba = np.zeros((n, 3))
    bg[0] = rng_bias.normal(0.0, cfg.init_gyro_bias_std, 3)
    ba[0] = rng_bias.normal(0.0, cfg.init_accel_bias_std, 3)
    sq = np.sqrt(dt)
    for k in range(1, n):
        bg[k] = bg[k - 1] + cfg.sigma_gyro_bias * sq * rng_bias.standard_normal(3)
        ba[k] = ba[k - 1] + cfg.sigma_accel_bias * sq * rng_bias.standard_normal(3)

    imu_t = np.array([r.t for r in records])
    gyro_std = cfg.sigma_gyro / sq  # density -> per-sample white noise
    gyro = np.array([r.omega for r in records]) + bg
    if gyro_std > 0:
        gyro = gyro + rng_gyro.normal(0.0, gyro_std, (n, 3))
    accel = np.array([r.thrust_body + r.force_body for r in records]) + ba
    if cfg.sigma_accel > 0:
        accel = accel + rng_accel.normal(0.0, cfg.sigma_accel, (n, 3))
    thrust = np.array([r.thrust_body for r in records])
    if cfg.sigma_thrust_meas > 0:
        thrust = thrust + rng_thrust.normal(0.0, cfg.sigma_thrust_meas, (n, 3))

    cam = cfg.camera()
    stride = int(round(cfg.imu_rate / cfg.cam_rate))
    frames = []
    for k in range(0, n, stride):
        r = records[k]
        clone = PoseClone(r.q, r.p, r.t)
        ids, uvs = [], []
        for j, p_f in enumerate(landmarks):
            uv = project_pinhole(p_f, clone, cam)
            if uv is None:
                continue
            depth = (cam.r_ic @ (so3.quat_to_rot(r.q) @ (p_f - r.p) - cam.p_ic))[2]
            if not cfg.vis_depth_min <= depth <= cfg.vis_depth_max:
                continue
            u, v = uv
            if not (0.0 <= u < cfg.width and 0.0 <= v < cfg.height):
                continue
            if cfg.sigma_pixel > 0:
                u += rng_pixel.normal(0.0, cfg.sigma_pixel)
                v += rng_pixel.normal(0.0, cfg.sigma_pixel)
            ids.append(j)
            uvs.append((u, v))
        frames.append(
            (r.t, np.array(ids, dtype=int), np.array(uvs, dtype=float).reshape(len(ids), 2))
        )

    return SimDataset(
        imu_t=imu_t,
        gyro=gyro,
        accel=accel,
        thrust_t=imu_t.copy(),
        thrust=thrust,
        frames=frames,
        truth_t=imu_t.copy(),
        truth_q=np.array([r.q for r in records]),
        truth_p=np.array([r.p for r in records]),
        truth_v=np.array([r.v for r in records]),
        truth_force=np.array([r.force_body for r in records]),
        landmarks=landmarks,
        true_gyro_bias=bg,
        true_accel_bias=ba,
    )
