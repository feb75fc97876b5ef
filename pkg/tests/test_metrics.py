"""Metric tests: RMSE conventions, alignment invariance, NEES calibration."""

import numpy as np
import pytest
from scipy.stats import chi2

from forcekf import so3
from forcekf.errors import EvaluationError
from forcekf.metrics import ate, force_rmse, nees, rigid_align


def test_force_rmse_identity():
    t = np.linspace(0, 10, 101)
    f = np.column_stack([np.sin(t), np.cos(t), 0.1 * t])
    rmse, n = force_rmse(t, f, t, f)
    assert rmse == 0.0
    assert n == 101


def test_force_rmse_constant_axis_error():
    t = np.linspace(0, 10, 101)
    f = np.zeros((101, 3))
    est = f + np.array([0.1, 0.0, 0.0])
    rmse, _ = force_rmse(t, est, t, f)
    assert abs(rmse - 0.1) < 1e-12


def test_force_rmse_time_shift_invariance():
    t = np.linspace(0, 10, 201)
    f = np.column_stack([np.sin(t), np.zeros(201), np.zeros(201)])
    r1, _ = force_rmse(t, f * 1.1, t, f)
    r2, _ = force_rmse(t + 5.0, f * 1.1, t + 5.0, f)
    assert abs(r1 - r2) < 1e-12


def test_force_rmse_insufficient_overlap():
    t = np.linspace(0, 10, 101)
    f = np.zeros((101, 3))
    with pytest.raises(EvaluationError):
        force_rmse(t, f, t + 9.0, f)


def test_ate_identity():
    t = np.linspace(0, 10, 101)
    p = np.column_stack([np.sin(t), np.cos(t), t])
    err, n = ate(t, p, t, p)
    assert err < 1e-12
    assert n == 101


def test_ate_rigid_invariance():
    # estimate = truth moved by a rigid transform aligns back to zero error
    t = np.linspace(0, 10, 101)
    p = np.column_stack([np.sin(t), np.cos(2 * t), 0.5 * t])
    R = so3.quat_to_rot(so3.quat_from_rotvec([0.0, 0.0, np.pi / 2]))
    moved = p @ R.T + np.array([5.0, -3.0, 2.0])
    err, _ = ate(t, moved, t, p)
    assert err < 1e-10


def test_ate_yaw_only_mode():
    t = np.linspace(0, 10, 101)
    p = np.column_stack([np.sin(t), np.cos(2 * t), 0.5 * t])
    Rz = so3.quat_to_rot(so3.quat_from_rotvec([0.0, 0.0, -1.2]))
    moved = p @ Rz.T + np.array([1.0, 2.0, -0.5])
    err, _ = ate(t, moved, t, p, yaw_only=True)
    assert err < 1e-10


def test_ate_requires_matches():
    t = np.linspace(0, 10, 11)
    p = np.zeros((11, 3))
    with pytest.raises(EvaluationError):
        ate(t, p, t + 100.0, p)


def test_rigid_align_recovers_transform():
    rng = np.random.default_rng(0)
    src = rng.standard_normal((50, 3))
    R_true = so3.quat_to_rot(so3.quat_normalize(rng.standard_normal(4)))
    t_true = rng.standard_normal(3)
    dst = src @ R_true.T + t_true
    R, t = rigid_align(src, dst)
    assert np.max(np.abs(R - R_true)) < 1e-10
    assert np.max(np.abs(t - t_true)) < 1e-10


def test_nees_zero_error():
    series, mean = nees(np.zeros((10, 3)), np.tile(np.eye(3), (10, 1, 1)))
    assert mean == 0.0


def test_nees_scalar_kalman_filter_calibration():
    # exact scalar KF on a random walk: mean NEES over 1e4 steps in [0.9, 1.1]
    rng = np.random.default_rng(11)
    q, r = 0.01, 0.25
    n = 10_000
    x_true = np.cumsum(np.sqrt(q) * rng.standard_normal(n))
    z = x_true + np.sqrt(r) * rng.standard_normal(n)
    x, P = 0.0, 1.0
    errs = np.empty((n, 1))
    covs = np.empty((n, 1))
    for k in range(n):
        P = P + q
        K = P / (P + r)
        x = x + K * (z[k] - x)
        P = (1 - K) * P
        errs[k, 0] = x - x_true[k]
        covs[k, 0] = P
    _, mean = nees(errs, covs)
    assert 0.9 <= mean <= 1.1


def test_nees_monte_carlo_three_dof_band():
    # 25 independent consistent 3-dof estimators: average NEES within the
    # chi-square band [2.1, 4.1] (75 dof quantiles / 25)
    lo = chi2.ppf(0.025, 75) / 25
    hi = chi2.ppf(0.975, 75) / 25
    assert 2.1 <= lo + 0.1 and hi <= 4.1  # the documented band brackets the exact one
    rng = np.random.default_rng(5)
    q, r = 0.02 * np.eye(3), 0.1 * np.eye(3)
    means = []
    for run in range(25):
        n = 400
        x_true = np.zeros(3)
        x, P = np.zeros(3), np.eye(3)
        errs, covs = [], []
        for k in range(n):
            x_true = x_true + rng.multivariate_normal(np.zeros(3), q)
            z = x_true + rng.multivariate_normal(np.zeros(3), r)
            P = P + q
            K = P @ np.linalg.inv(P + r)
            x = x + K @ (z - x)
            P = (np.eye(3) - K) @ P
            errs.append(x - x_true)
            covs.append(P.copy())
        _, m = nees(np.array(errs), np.array(covs))
        means.append(m)
    avg = float(np.mean(means))
    assert 2.1 <= avg <= 4.1
