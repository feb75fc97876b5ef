"""Instantaneous accelerometer update.

The accelerometer measures the specific force, which under the thrust-driven
motion model is

    a_m = T_m + f_ext + b_a + n_a          (body-frame force, default)
    a_m = T_m + R f_ext + b_a + n_a        (world-frame force, experiment flag)

so every accelerometer sample directly observes the accel bias plus the
external force. The update runs at full accelerometer rate and is not
chi-square gated: force transients are exactly the signal it must pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3
from .state import BA, FORCE, IMU_DIM, apply_ekf_update


@dataclass
class AccelNoise:
    """Accelerometer white noise, per axis."""

    sigma_accel: float  # m/s^2

    def __post_init__(self):
        if self.sigma_accel <= 0.0:
            raise ValueError("sigma_accel must be strictly positive")


def accel_residual(x, a_m, thrust, world_force=False):
    """Residual and 3x18 Jacobian of the accelerometer prediction."""
    a_m = np.asarray(a_m, dtype=float)
    thrust = np.asarray(thrust, dtype=float)
    H = np.zeros((3, IMU_DIM))
    H[:, BA] = np.eye(3)
    if world_force:
        R = so3.quat_to_rot(x.q)
        predicted = thrust + R @ x.force + x.ba
        H[:, 0:3] = so3.skew(R @ x.force)
        H[:, FORCE] = R
    else:
        predicted = thrust + x.force + x.ba
        H[:, FORCE] = np.eye(3)
    return a_m - predicted, H


def update_with_accel(state, a_m, thrust, noise, world_force=False):
    """Apply one accelerometer update at the current filter time."""
    r, H_imu = accel_residual(state.imu, a_m, thrust, world_force)
    H = np.zeros((3, state.dim))
    H[:, :IMU_DIM] = H_imu
    R = noise.sigma_accel**2 * np.eye(3)
    return apply_ekf_update(state, H, r, R, gate_prob=None)
