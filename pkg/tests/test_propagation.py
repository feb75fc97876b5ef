"""Propagation tests: mean dynamics, finite-difference transition validation."""

import numpy as np
import pytest

from forcekf import so3
from forcekf.config import EstimatorConfig
from forcekf.propagation import ProcessNoise, PropagationInput, compute_phi_qd, propagate, propagate_mean
from forcekf.state import FORCE, IMU_DIM, ImuState, clone_pose, init_filter

G = np.array([0.0, 0.0, -9.81])


def default_noise():
    return ProcessNoise(
        sigma_gyro=0.002,
        sigma_gyro_bias=5e-5,
        sigma_accel_bias=5e-4,
        sigma_force=0.15,
        sigma_thrust=0.01,
    )


def random_imu_state(rng):
    """Random but physically plausible vehicle state."""
    x = ImuState()
    x.q = so3.quat_normalize(rng.standard_normal(4))
    x.p = rng.uniform(-5, 5, 3)
    x.v = rng.uniform(-2, 2, 3)
    x.bg = rng.uniform(-0.02, 0.02, 3)
    x.ba = rng.uniform(-0.1, 0.1, 3)
    x.force = rng.uniform(-1.5, 1.5, 3)
    return x


def random_input(rng, dt):
    return PropagationInput(
        omega=rng.uniform(-1.0, 1.0, 3),
        thrust=np.array([0.0, 0.0, 9.81]) + rng.uniform(-1.5, 1.5, 3),
        dt=dt,
    )


def state_boxplus(x, dx):
    out = x.copy()
    out.q = so3.boxplus(x.q, dx[0:3])
    out.p = x.p + dx[3:6]
    out.v = x.v + dx[6:9]
    out.bg = x.bg + dx[9:12]
    out.ba = x.ba + dx[12:15]
    out.force = x.force + dx[15:18]
    return out


def state_boxminus(x1, x0):
    return np.concatenate(
        [
            so3.boxminus(x1.q, x0.q),
            x1.p - x0.p,
            x1.v - x0.v,
            x1.bg - x0.bg,
            x1.ba - x0.ba,
            x1.force - x0.force,
        ]
    )


def test_hover_is_a_fixed_point():
    x = ImuState()
    u = PropagationInput(omega=np.zeros(3), thrust=np.array([0.0, 0.0, 9.81]), dt=0.01)
    out = propagate_mean(x, u, G)
    assert np.array_equal(out.p, x.p)
    assert np.array_equal(out.v, x.v)
    assert so3.quat_distance(out.q, x.q) == 0.0


def test_free_fall_arithmetic():
    x = ImuState()
    u = PropagationInput(omega=np.zeros(3), thrust=np.zeros(3), dt=0.01)
    out = propagate_mean(x, u, G)
    assert np.allclose(out.v, [0.0, 0.0, -0.0981], atol=1e-15)
    assert np.allclose(out.p, [0.0, 0.0, -4.905e-4], atol=1e-15)


def test_body_force_couples_into_velocity():
    x = ImuState(force=[1.0, 0.0, 0.0])
    u = PropagationInput(omega=np.zeros(3), thrust=np.array([0.0, 0.0, 9.81]), dt=0.01)
    out = propagate_mean(x, u, G)
    assert np.allclose(out.v, [0.01, 0.0, 0.0], atol=1e-15)


def test_biases_and_force_mean_constant():
    rng = np.random.default_rng(0)
    x = random_imu_state(rng)
    u = random_input(rng, 0.005)
    out = propagate_mean(x, u, G)
    assert np.array_equal(out.bg, x.bg)
    assert np.array_equal(out.ba, x.ba)
    assert np.array_equal(out.force, x.force)


def _euler_reference(x, u, substeps):
    w = u.omega - x.bg
    q, p, v = x.q.copy(), x.p.copy(), x.v.copy()
    h = u.dt / substeps
    for _ in range(substeps):
        R = so3.quat_to_rot(q)
        a = R.T @ (u.thrust + x.force) + G
        p = p + v * h
        v = v + a * h
        q = so3.boxplus(q, w * h)
    return p, v


def test_mean_matches_fine_euler_reference():
    # oracle: 1000-substep Euler integration of the continuous model.
    # Near-hover flight states keep the oracle's own O(a*h*dt) truncation
    # below the tolerance; the fast-rotation case below uses a finer grid.
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = ImuState()
        x.q = so3.boxplus(x.q, rng.uniform(-0.05, 0.05, 3))
        x.v = rng.uniform(-1, 1, 3)
        x.p = rng.uniform(-2, 2, 3)
        x.force = rng.uniform(-0.3, 0.3, 3)
        u = PropagationInput(
            omega=rng.uniform(-0.1, 0.1, 3),
            thrust=np.array([0.0, 0.0, 9.81]) + rng.uniform(-0.3, 0.3, 3),
            dt=0.01,
        )
        p, v = _euler_reference(x, u, 1000)
        out = propagate_mean(x, u, G)
        assert np.linalg.norm(out.p - p) < 1e-7
        assert np.linalg.norm(out.v - v) < 1e-7


def test_mean_matches_euler_reference_fast_rotation():
    # aggressive rates against a much finer reference
    rng = np.random.default_rng(11)
    for _ in range(3):
        x = random_imu_state(rng)
        u = random_input(rng, 0.01)
        p, v = _euler_reference(x, u, 20000)
        out = propagate_mean(x, u, G)
        assert np.linalg.norm(out.p - p) < 1e-7
        assert np.linalg.norm(out.v - v) < 1e-7


def test_phi_identity_at_tiny_dt():
    rng = np.random.default_rng(2)
    x = random_imu_state(rng)
    u = PropagationInput(omega=rng.uniform(-1, 1, 3), thrust=rng.uniform(-1, 1, 3), dt=1e-9)
    phi, _ = compute_phi_qd(x, u, default_noise())
    assert np.max(np.abs(phi - np.eye(IMU_DIM))) < 1e-8


@pytest.mark.parametrize("world_force", [False, True])
def test_phi_matches_central_finite_differences(world_force):
    # the authoritative convention check: 100 random states, eps 1e-6, dt 5 ms
    rng = np.random.default_rng(3)
    dt = 0.005
    eps = 1e-6
    worst = 0.0
    for _ in range(100):
        x = random_imu_state(rng)
        u = random_input(rng, dt)
        phi, _ = compute_phi_qd(x, u, default_noise(), world_force)
        fd = np.zeros((IMU_DIM, IMU_DIM))
        for i in range(IMU_DIM):
            e = np.zeros(IMU_DIM)
            e[i] = eps
            plus = propagate_mean(state_boxplus(x, e), u, G, world_force)
            minus = propagate_mean(state_boxplus(x, -e), u, G, world_force)
            fd[:, i] = state_boxminus(plus, minus) / (2 * eps)
        worst = max(worst, np.max(np.abs(fd - phi)))
    assert worst <= 1e-4, f"max |FD - Phi| = {worst:.2e}"


def test_phi_force_to_velocity_block_structure():
    x = ImuState()
    u = PropagationInput(omega=np.zeros(3), thrust=np.array([0.0, 0.0, 9.81]), dt=0.005)
    phi, _ = compute_phi_qd(x, u, default_noise())
    R = so3.quat_to_rot(x.q)
    assert np.allclose(phi[6:9, 15:18], R.T * u.dt, atol=1e-6)
    assert np.allclose(phi[9:12, 9:12], np.eye(3))
    assert np.allclose(phi[15:18, 15:18], np.eye(3))


def test_qd_structure():
    rng = np.random.default_rng(4)
    noise = default_noise()
    x = random_imu_state(rng)
    u = random_input(rng, 0.005)
    _, qd = compute_phi_qd(x, u, noise)
    assert np.max(np.abs(qd - qd.T)) == 0.0
    assert np.linalg.eigvalsh(qd).min() >= 0.0
    assert np.allclose(qd[FORCE, FORCE], noise.sigma_force**2 * u.dt * np.eye(3))


def test_propagate_keeps_clone_blocks():
    rng = np.random.default_rng(5)
    cfg = EstimatorConfig()
    fs = init_filter(cfg, (np.array([1.0, 0, 0, 0]), np.zeros(3)), np.zeros(3))
    A = rng.standard_normal((18, 18))
    fs.P = A @ A.T + 18 * np.eye(18)
    clone_pose(fs, 0.0)
    clone_block = fs.P[18:24, 18:24].copy()
    u = random_input(rng, 0.005)
    propagate(fs, u, default_noise(), G)
    assert np.array_equal(fs.P[18:24, 18:24], clone_block)
    assert fs.time == 0.005
    evals = np.linalg.eigvalsh(fs.P)
    assert evals.min() >= -1e-9 * np.trace(fs.P)


def test_force_variance_random_walk_growth():
    # closed-form oracle: var grows by sigma_force^2 * t per axis
    noise = default_noise()
    cfg = EstimatorConfig()
    fs = init_filter(cfg, (np.array([1.0, 0, 0, 0]), np.zeros(3)), np.zeros(3))
    u = PropagationInput(omega=np.zeros(3), thrust=np.array([0.0, 0.0, 9.81]), dt=0.005)
    v0 = fs.P[15, 15]
    for _ in range(200):
        propagate(fs, u, noise, G)
    growth = fs.P[15, 15] - v0
    assert abs(growth - noise.sigma_force**2 * 1.0) < 1e-6


def test_hover_fixed_point_many_step_sizes():
    for dt in [0.001, 0.01, 0.05, 0.1]:
        x = ImuState()
        u = PropagationInput(omega=np.zeros(3), thrust=np.array([0.0, 0.0, 9.81]), dt=dt)
        out = propagate_mean(x, u, G)
        assert np.max(np.abs(out.p)) <= 1e-12
        assert np.max(np.abs(out.v)) <= 1e-12


def test_input_validation():
    with pytest.raises(ValueError):
        PropagationInput(omega=np.zeros(3), thrust=np.zeros(3), dt=0.0)
    with pytest.raises(ValueError):
        PropagationInput(omega=np.zeros(3), thrust=np.zeros(3), dt=0.2)
    with pytest.raises(ValueError):
        ProcessNoise(0.0, 1e-5, 1e-4, 0.1, 0.01)
