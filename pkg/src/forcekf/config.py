"""Configuration: estimator and simulator settings from one flat text file.

Format: `section.key = value` lines, `#` starts a comment, blank lines
ignored. Vector values are comma separated. Unknown keys are errors;
missing keys take the documented defaults. The same file configures both
the estimator and the simulator (they share the `noise` section so that
synthetic data and filter assumptions stay matched).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_FORWARD_CAMERA = np.array(
    [
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
    ]
)


@dataclass
class EstimatorConfig:
    """Filter settings: noise densities, window sizes, gates, camera model."""

    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    window_size: int = 11
    max_slam_features: int = 6
    enable_accel_update: bool = True
    enable_vision_update: bool = True
    world_frame_force: bool = False
    output_stride: int = 1
    start_time: float = 0.0

    # continuous densities / measurement noise
    sigma_gyro: float = 0.002
    sigma_gyro_bias: float = 5e-5
    sigma_accel_bias: float = 5e-4
    sigma_force: float = 0.10
    sigma_thrust: float = 0.01
    sigma_accel: float = 0.1
    sigma_pixel: float = 1.0

    # initial standard deviations per state block
    init_sigma_attitude: float = 1e-3
    init_sigma_position: float = 1e-3
    init_sigma_velocity: float = 5e-3
    init_sigma_gyro_bias: float = 2e-3
    init_sigma_accel_bias: float = 1e-2
    init_sigma_force: float = 0.2

    vision_gate_prob: float = 0.95
    min_baseline_ratio: float = 0.02
    depth_min: float = 0.1
    depth_max: float = 60.0

    # camera model
    fx: float = 400.0
    fy: float = 400.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480
    r_ic: np.ndarray = field(default_factory=lambda: _FORWARD_CAMERA.copy())
    p_ic: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.0, 0.0]))

    ate_alignment: str = "se3"

    def validate(self):
        if self.window_size < 3:
            raise ConfigError("filter.window_size must be >= 3")
        if self.max_slam_features < 0:
            raise ConfigError("filter.max_slam_features must be >= 0")
        g_norm = float(np.linalg.norm(self.gravity))
        if not 9.0 <= g_norm <= 10.5:
            raise ConfigError(f"filter.gravity norm {g_norm:.3f} outside [9.0, 10.5]")
        for name in (
            "sigma_gyro", "sigma_gyro_bias", "sigma_accel_bias", "sigma_force",
            "sigma_thrust", "sigma_accel", "sigma_pixel",
            "init_sigma_attitude", "init_sigma_position", "init_sigma_velocity",
            "init_sigma_gyro_bias", "init_sigma_accel_bias", "init_sigma_force",
        ):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0.0 < self.vision_gate_prob < 1.0:
            raise ConfigError("gates.vision_prob must lie in (0, 1)")
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ConfigError("camera focal lengths must be positive")
        if np.max(np.abs(self.r_ic @ self.r_ic.T - np.eye(3))) > 1e-6:
            raise ConfigError("camera.r_ic must be orthonormal")
        if self.output_stride < 1:
            raise ConfigError("filter.output_stride must be >= 1")
        if self.ate_alignment not in ("se3", "yaw"):
            raise ConfigError("eval.alignment must be 'se3' or 'yaw'")
        return self


# key -> (attribute, converter); converters below
def _as_float(s):
    return float(s)


def _as_int(s):
    v = float(s)
    if v != int(v):
        raise ValueError("expected an integer")
    return int(v)


def _as_bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _as_str(s):
    return s.strip()


def _as_vec3(s):
    parts = [float(p) for p in s.split(",")]
    if len(parts) != 3:
        raise ValueError("expected 3 comma-separated numbers")
    return np.array(parts)


def _as_mat3(s):
    parts = [float(p) for p in s.split(",")]
    if len(parts) != 9:
        raise ValueError("expected 9 comma-separated numbers (row major)")
    return np.array(parts).reshape(3, 3)


ESTIMATOR_KEYS = {
    "filter.gravity": ("gravity", _as_vec3),
    "filter.window_size": ("window_size", _as_int),
    "filter.max_slam_features": ("max_slam_features", _as_int),
    "filter.enable_accel_update": ("enable_accel_update", _as_bool),
    "filter.enable_vision_update": ("enable_vision_update", _as_bool),
    "filter.world_frame_force": ("world_frame_force", _as_bool),
    "filter.output_stride": ("output_stride", _as_int),
    "noise.sigma_gyro": ("sigma_gyro", _as_float),
    "noise.sigma_gyro_bias": ("sigma_gyro_bias", _as_float),
    "noise.sigma_accel_bias": ("sigma_accel_bias", _as_float),
    "noise.sigma_force": ("sigma_force", _as_float),
    "noise.sigma_thrust": ("sigma_thrust", _as_float),
    "noise.sigma_accel": ("sigma_accel", _as_float),
    "noise.sigma_pixel": ("sigma_pixel", _as_float),
    "init.sigma_attitude": ("init_sigma_attitude", _as_float),
    "init.sigma_position": ("init_sigma_position", _as_float),
    "init.sigma_velocity": ("init_sigma_velocity", _as_float),
    "init.sigma_gyro_bias": ("init_sigma_gyro_bias", _as_float),
    "init.sigma_accel_bias": ("init_sigma_accel_bias", _as_float),
    "init.sigma_force": ("init_sigma_force", _as_float),
    "gates.vision_prob": ("vision_gate_prob", _as_float),
    "vision.min_baseline_ratio": ("min_baseline_ratio", _as_float),
    "vision.depth_min": ("depth_min", _as_float),
    "vision.depth_max": ("depth_max", _as_float),
    "camera.fx": ("fx", _as_float),
    "camera.fy": ("fy", _as_float),
    "camera.cx": ("cx", _as_float),
    "camera.cy": ("cy", _as_float),
    "camera.width": ("width", _as_int),
    "camera.height": ("height", _as_int),
    "camera.r_ic": ("r_ic", _as_mat3),
    "camera.p_ic": ("p_ic", _as_vec3),
    "eval.alignment": ("ate_alignment", _as_str),
}

SIM_KEYS = {
    "sim.trajectory": ("trajectory", _as_str),
    "sim.amplitude": ("amplitude", _as_float),
    "sim.period": ("period", _as_float),
    "sim.duration": ("duration", _as_float),
    "sim.imu_rate": ("imu_rate", _as_float),
    "sim.cam_rate": ("cam_rate", _as_float),
    "sim.center": ("center", _as_vec3),
    "sim.yaw_amplitude": ("yaw_amplitude", _as_float),
    "sim.yaw_period": ("yaw_period", _as_float),
    "sim.attitude_mode": ("attitude_mode", _as_str),
    "sim.rope_anchor": ("rope_anchor", _as_vec3),
    "sim.rope_rest_length": ("rope_rest_length", _as_float),
    "sim.rope_stiffness": ("rope_stiffness", _as_float),
    "sim.step_force": ("step_force", _as_vec3),
    "sim.step_time": ("step_time", _as_float),
    "sim.landmark_count": ("landmark_count", _as_int),
    "sim.landmark_radius_min": ("landmark_radius_min", _as_float),
    "sim.landmark_radius_max": ("landmark_radius_max", _as_float),
    "sim.landmark_z_min": ("landmark_z_min", _as_float),
    "sim.landmark_z_max": ("landmark_z_max", _as_float),
    "sim.vis_depth_min": ("vis_depth_min", _as_float),
    "sim.vis_depth_max": ("vis_depth_max", _as_float),
    "sim.sigma_thrust_meas": ("sigma_thrust_meas", _as_float),
    "sim.init_gyro_bias_std": ("init_gyro_bias_std", _as_float),
    "sim.init_accel_bias_std": ("init_accel_bias_std", _as_float),
    "sim.seed": ("seed", _as_int),
}

# sim reads the shared noise section too
SIM_SHARED_KEYS = {
    "noise.sigma_gyro": ("sigma_gyro", _as_float),
    "noise.sigma_gyro_bias": ("sigma_gyro_bias", _as_float),
    "noise.sigma_accel_bias": ("sigma_accel_bias", _as_float),
    "noise.sigma_accel": ("sigma_accel", _as_float),
    "noise.sigma_pixel": ("sigma_pixel", _as_float),
    "camera.fx": ("fx", _as_float),
    "camera.fy": ("fy", _as_float),
    "camera.cx": ("cx", _as_float),
    "camera.cy": ("cy", _as_float),
    "camera.width": ("width", _as_int),
    "camera.height": ("height", _as_int),
    "camera.r_ic": ("r_ic", _as_mat3),
    "camera.p_ic": ("p_ic", _as_vec3),
    "filter.gravity": ("gravity", _as_vec3),
}

_ALL_KEYS = set(ESTIMATOR_KEYS) | set(SIM_KEYS)


def read_config_lines(path):
    """Parse a config file into {key: raw value}; structural errors only."""
    entries = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
            entries[key] = (value, lineno)
    return entries


def _apply(obj, entries, schema, path):
    for key, (attr, conv) in schema.items():
        if key in entries:
            value, lineno = entries[key]
            try:
                setattr(obj, attr, conv(value))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    return obj


def parse_config(path):
    """Load an EstimatorConfig; missing keys take defaults, unknown keys fail."""
    entries = read_config_lines(path)
    cfg = _apply(EstimatorConfig(), entries, ESTIMATOR_KEYS, path)
    return cfg.validate()


def parse_sim_config(path):
    """Load a SimConfig from the same file format."""
    from .simulate import SimConfig

    entries = read_config_lines(path)
    cfg = SimConfig()
    _apply(cfg, entries, SIM_SHARED_KEYS, path)
    _apply(cfg, entries, SIM_KEYS, path)
    return cfg.validate()
