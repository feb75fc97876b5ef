"""State propagation driven by gyroscope and mass-normalized thrust.

Mean dynamics integrated per step (inputs held constant over dt):

    qdot = 0.5 * Omega(w_m - bg) q
    pdot = v
    vdot = R(q)^T (T_m + f_ext) + g        (body-frame force, default)
    vdot = R(q)^T T_m + f_ext + g          (world-frame force, experiment flag)

with biases and external force mean-constant (random-walk noise only).
Attitude uses the closed-form constant-rate integral; position/velocity use
RK4 with the attitude interpolated inside the step.

The error-state transition Phi is obtained by RK4 integration of the
variational equation dPhi/dtau = A(tau) Phi along the same in-step attitude,
so Phi agrees with central finite differences of the mean map to integrator
accuracy. The discrete noise uses the first-order mapping Qd = G Qc G^T dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3
from .errors import OrderingError
from .state import ATT, BA, BG, FORCE, IMU_DIM, POS, VEL

MAX_STEP = 0.1


@dataclass
class ProcessNoise:
    """Continuous-time noise densities (per sqrt(Hz))."""

    sigma_gyro: float        # rad/s/sqrt(Hz), attitude white noise
    sigma_gyro_bias: float   # rad/s^2/sqrt(Hz), gyro bias random walk
    sigma_accel_bias: float  # m/s^3/sqrt(Hz), accel bias random walk
    sigma_force: float       # m/s^3/sqrt(Hz), external force random walk
    sigma_thrust: float      # m/s^2/sqrt(Hz), thrust error as velocity white noise

    def __post_init__(self):
        for name in ("sigma_gyro", "sigma_gyro_bias", "sigma_accel_bias",
                     "sigma_force", "sigma_thrust"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class PropagationInput:
    """One propagation step: gyro sample, thrust sample, step length."""

    omega: np.ndarray   # rad/s, body frame
    thrust: np.ndarray  # m/s^2, mass-normalized, body frame
    dt: float           # s

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.thrust = np.asarray(self.thrust, dtype=float)
        if not 0.0 < self.dt <= MAX_STEP:
            raise ValueError(f"dt must lie in (0, {MAX_STEP}], got {self.dt}")


def _step_rotations(x, u):
    """Body rate and world->body rotations at the RK4 stage times."""
    w = u.omega - x.bg
    q_half = so3.boxplus(x.q, w * (0.5 * u.dt))
    q_end = so3.boxplus(x.q, w * u.dt)
    return w, q_end, (so3.quat_to_rot(x.q), so3.quat_to_rot(q_half), so3.quat_to_rot(q_end))


def _mean_step(x, u, g, world_force, q_end, rotations):
    dt = u.dt
    if world_force:
        accs = [R.T @ u.thrust + x.force + g for R in rotations]
    else:
        body_acc = u.thrust + x.force
        accs = [R.T @ body_acc + g for R in rotations]
    a0, ah, a1 = accs
    # RK4 on (p, v) with vdot depending on the in-step attitude only
    out = x.copy()
    out.q = q_end
    out.v = x.v + dt / 6.0 * (a0 + 4.0 * ah + a1)
    out.p = x.p + x.v * dt + dt * dt / 6.0 * (a0 + ah + ah)
    return out


def _phi_step(x, u, world_force, w, rotations):
    """RK4 integration of dPhi/dtau = A(tau) Phi along the in-step attitude."""
    dt = u.dt
    A = np.zeros((IMU_DIM, IMU_DIM))
    A[ATT, ATT] = -so3.skew(w)
    A[ATT, BG] = -np.eye(3)
    A[POS, VEL] = np.eye(3)
    lever = so3.skew(u.thrust if world_force else u.thrust + x.force)
    if world_force:
        A[VEL, FORCE] = np.eye(3)

    stages = []
    for R in rotations:
        Ai = A.copy()
        Ai[VEL, ATT] = -R.T @ lever
        if not world_force:
            Ai[VEL, FORCE] = R.T
        stages.append(Ai)
    A0, Ah, A1 = stages

    eye = np.eye(IMU_DIM)
    k1 = A0
    k2 = Ah @ (eye + 0.5 * dt * k1)
    k3 = Ah @ (eye + 0.5 * dt * k2)
    k4 = A1 @ (eye + dt * k3)
    return eye + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def propagate_mean(x, u, g, world_force=False):
    """Integrate the mean dynamics over one step; returns a new ImuState."""
    g = np.asarray(g, dtype=float)
    _, q_end, rotations = _step_rotations(x, u)
    return _mean_step(x, u, g, world_force, q_end, rotations)


def compute_phi_qd(x, u, noise, world_force=False):
    """Discrete error-state transition Phi and process noise Qd over one step."""
    w, _, rotations = _step_rotations(x, u)
    phi = _phi_step(x, u, world_force, w, rotations)
    qd = np.zeros(IMU_DIM)
    qd[ATT] = noise.sigma_gyro**2
    qd[VEL] = noise.sigma_thrust**2
    qd[BG] = noise.sigma_gyro_bias**2
    qd[BA] = noise.sigma_accel_bias**2
    qd[FORCE] = noise.sigma_force**2
    return phi, np.diag(qd * u.dt)


def propagate(state, u, noise, g, world_force=False):
    """Advance the full filter state: mean, covariance, clock.

    Clone and landmark blocks see identity dynamics; only their cross
    covariance with the vehicle block changes.
    """
    if u.dt <= 0.0:
        raise OrderingError("propagation step must advance time")
    x = state.imu
    w, q_end, rotations = _step_rotations(x, u)
    phi = _phi_step(x, u, world_force, w, rotations)
    state.imu = _mean_step(x, u, np.asarray(g, dtype=float), world_force, q_end, rotations)

    dt = u.dt
    P = state.P
    n = IMU_DIM
    P11 = P[:n, :n]
    new11 = phi @ P11 @ phi.T
    diag = new11.ravel()[:: n + 1]
    diag[ATT] += noise.sigma_gyro**2 * dt
    diag[VEL] += noise.sigma_thrust**2 * dt
    diag[BG] += noise.sigma_gyro_bias**2 * dt
    diag[BA] += noise.sigma_accel_bias**2 * dt
    diag[FORCE] += noise.sigma_force**2 * dt
    P[:n, :n] = 0.5 * (new11 + new11.T)
    if P.shape[0] > n:
        P1r = phi @ P[:n, n:]
        P[:n, n:] = P1r
        P[n:, :n] = P1r.T
    state.time += u.dt
    return state
