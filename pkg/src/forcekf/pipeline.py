"""Estimation event loop: strict timestamp ordering of propagation and updates.

For every IMU sample the filter propagates over the preceding interval with
that sample's gyro and the thrust aligned to it, then applies the
accelerometer update. A camera frame inside an IMU interval splits the
interval (inputs held constant) so the pose clone lands exactly on the
frame timestamp. When an IMU sample and a camera frame coincide within one
microsecond, the IMU is processed first.
"""

from __future__ import annotations

import logging

import numpy as np

from .accel import AccelNoise, update_with_accel
from .errors import OrderingError
from .propagation import MAX_STEP, ProcessNoise, PropagationInput, propagate
from .state import init_filter
from .vision import CameraModel, VisionUpdater

logger = logging.getLogger(__name__)

TIE_TOL = 1e-6


def align_thrust(imu_t, thrust_t, thrust):
    """Thrust values at IMU timestamps: nearest sample within 1 ms, else
    linear interpolation."""
    imu_t = np.asarray(imu_t, dtype=float)
    thrust_t = np.asarray(thrust_t, dtype=float)
    out = np.empty((len(imu_t), 3))
    idx = np.searchsorted(thrust_t, imu_t)
    for i, t in enumerate(imu_t):
        best, best_dt = None, 1e-3
        for j in (idx[i] - 1, idx[i]):
            if 0 <= j < len(thrust_t):
                dt = abs(thrust_t[j] - t)
                if dt <= best_dt:
                    best, best_dt = j, dt
        if best is not None:
            out[i] = thrust[best]
        else:
            for k in range(3):
                out[i, k] = np.interp(t, thrust_t, thrust[:, k])
    return out


class EstimateLog:
    """Accumulated output rows plus the event-ordering audit trail."""

    def __init__(self):
        self.times = []
        self.states = []
        self.cov_diags = []
        self.audit = []  # (event kind, timestamp)

    def record(self, fs):
        self.times.append(fs.time)
        self.states.append(fs.imu.copy())
        self.cov_diags.append(np.diag(fs.P)[:18].copy())


def _initial_pose_velocity(streams, t0):
    if streams.has_truth:
        i = int(np.argmin(np.abs(streams.truth_t - t0)))
        return (streams.truth_q[i].copy(), streams.truth_p[i].copy()), streams.truth_v[i].copy()
    return (np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3)), np.zeros(3)


def run_estimator(streams, cfg):
    """Run the filter over loaded streams; returns an EstimateLog."""
    imu_t = streams.imu_t
    t0 = float(imu_t[0])
    cfg.start_time = t0
    thrust = align_thrust(imu_t, streams.thrust_t, streams.thrust)

    pose0, vel0 = _initial_pose_velocity(streams, t0)
    fs = init_filter(cfg, pose0, vel0)

    noise = ProcessNoise(cfg.sigma_gyro, cfg.sigma_gyro_bias, cfg.sigma_accel_bias,
                         cfg.sigma_force, cfg.sigma_thrust)
    accel_noise = AccelNoise(cfg.sigma_accel)
    updater = VisionUpdater(CameraModel.from_config(cfg), cfg)
    debug = logger.isEnabledFor(logging.DEBUG)

    log = EstimateLog()
    frames = list(streams.frames)
    fi = 0

    def note(kind, t):
        if t < fs.time - 1e-9:
            raise OrderingError(f"{kind} event at t={t} behind filter clock {fs.time}")
        log.audit.append((kind, t))
        if debug:
            logger.debug("event %s t=%.6f clock=%.6f dim=%d", kind, t, fs.time, fs.dim)

    def propagate_to(t_target, k):
        """Advance the filter exactly to t_target using sample k's inputs."""
        while t_target - fs.time > 1e-12:
            dt = min(t_target - fs.time, MAX_STEP)
            u = PropagationInput(streams.gyro[k], thrust[k], dt)
            propagate(fs, u, noise, cfg.gravity, cfg.world_frame_force)
        fs.time = t_target
        note("propagate", t_target)

    def vision_frame(frame):
        t_c, ids, uv = frame
        note("camera", t_c)
        updater.update_with_frame(fs, [(ids[j], uv[j, 0], uv[j, 1]) for j in range(len(ids))], t_c)

    # drop frames that precede the first IMU sample
    while fi < len(frames) and frames[fi][0] < t0 - TIE_TOL:
        logger.warning("dropping camera frame at t=%.6f before first IMU sample", frames[fi][0])
        fi += 1

    note("imu", t0)
    if cfg.enable_accel_update:
        update_with_accel(fs, streams.accel[0], thrust[0], accel_noise, cfg.world_frame_force)
    if cfg.enable_vision_update:
        while fi < len(frames) and frames[fi][0] <= t0 + TIE_TOL:
            vision_frame(frames[fi])
            fi += 1
    log.record(fs)

    for k in range(1, len(imu_t)):
        t_k = float(imu_t[k])
        if t_k <= fs.time:
            raise OrderingError(f"IMU timestamps not increasing at t={t_k}")
        if cfg.enable_vision_update:
            while fi < len(frames) and frames[fi][0] < t_k - TIE_TOL:
                t_c = float(frames[fi][0])
                if t_c < fs.time - 1e-9:
                    logger.warning("dropping stale camera frame at t=%.6f", t_c)
                    fi += 1
                    continue
                propagate_to(t_c, k)
                vision_frame(frames[fi])
                fi += 1
        propagate_to(t_k, k)
        note("imu", t_k)
        if cfg.enable_accel_update:
            update_with_accel(fs, streams.accel[k], thrust[k], accel_noise,
                              cfg.world_frame_force)
        if cfg.enable_vision_update:
            while fi < len(frames) and abs(frames[fi][0] - t_k) <= TIE_TOL:
                vision_frame((t_k, frames[fi][1], frames[fi][2]))
                fi += 1
        if k % cfg.output_stride == 0:
            log.record(fs)

    logger.info(
        "run complete: %d output rows, vision stats %s", len(log.times),
        updater.stats,
    )
    return log
