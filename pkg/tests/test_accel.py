"""Accelerometer update tests: residual arithmetic, gain behaviour, observability."""

import numpy as np

from forcekf.accel import AccelNoise, accel_residual, update_with_accel
from forcekf.config import EstimatorConfig
from forcekf.state import BA, FORCE, ImuState, init_filter


def make_filter(**kw):
    cfg = EstimatorConfig()
    for k, v in kw.items():
        setattr(cfg, k, v)
    return init_filter(cfg, (np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3)), np.zeros(3))


def test_residual_exact_prediction():
    x = ImuState(ba=[0.1, 0.0, 0.0], force=[0.0, 0.0, 0.5])
    r, H = accel_residual(x, a_m=[0.1, 0.0, 10.3], thrust=[0.0, 0.0, 9.8])
    assert np.allclose(r, np.zeros(3), atol=1e-15)


def test_residual_arithmetic():
    x = ImuState(ba=[0.1, 0.0, 0.0], force=[0.0, 0.0, 0.5])
    r, _ = accel_residual(x, a_m=[0.2, 0.0, 10.3], thrust=[0.0, 0.0, 9.8])
    assert np.allclose(r, [0.1, 0.0, 0.0], atol=1e-15)


def test_jacobian_has_two_identity_blocks():
    x = ImuState(ba=[0.02, -0.01, 0.0], force=[0.3, 0.0, -0.1])
    _, H = accel_residual(x, a_m=np.zeros(3), thrust=np.zeros(3))
    assert np.array_equal(H[:, BA], np.eye(3))
    assert np.array_equal(H[:, FORCE], np.eye(3))
    mask = np.ones(18, dtype=bool)
    mask[12:18] = False
    assert np.all(H[:, mask] == 0.0)


def test_zero_residual_keeps_mean_shrinks_force_variance():
    fs = make_filter()
    var_before = fs.P[15, 15]
    force_before = fs.imu.force.copy()
    accepted = update_with_accel(fs, a_m=np.zeros(3), thrust=np.zeros(3), noise=AccelNoise(0.1))
    assert accepted
    assert np.allclose(fs.imu.force, force_before, atol=1e-15)
    assert fs.P[15, 15] < var_before


def test_locked_bias_routes_residual_to_force():
    # scalar Kalman oracle: K = P/(P + sigma^2) with P >> sigma^2 gives ~1
    fs = make_filter(init_sigma_accel_bias=1e-6, init_sigma_force=10.0)
    update_with_accel(fs, a_m=[1.0, 0.0, 0.0], thrust=np.zeros(3), noise=AccelNoise(0.1))
    P0, s2 = 100.0, 0.01
    expected = P0 / (P0 + s2)
    assert abs(fs.imu.force[0] - expected) < 1e-3
    assert abs(fs.imu.ba[0]) < 1e-6


def test_equal_priors_split_correction_equally():
    # two-state linear Kalman oracle: equal prior variance, zero cross-cov
    fs = make_filter(init_sigma_accel_bias=0.5, init_sigma_force=0.5)
    update_with_accel(fs, a_m=[1.0, 0.0, 0.0], thrust=np.zeros(3), noise=AccelNoise(0.1))
    # oracle: posterior means for [ba, f] with H = [1, 1]
    P = np.diag([0.25, 0.25])
    Hm = np.array([[1.0, 1.0]])
    K = P @ Hm.T @ np.linalg.inv(Hm @ P @ Hm.T + 0.01)
    expected = (K @ np.array([1.0])).ravel()
    assert abs(expected[0] - expected[1]) < 1e-12
    assert abs(fs.imu.ba[0] - expected[0]) < 1e-12
    assert abs(fs.imu.force[0] - expected[1]) < 1e-12


def test_update_is_contraction():
    fs = make_filter()
    update_with_accel(fs, a_m=[0.5, 0.0, 0.0], thrust=np.zeros(3), noise=AccelNoise(0.1))
    first = fs.imu.force[0] + fs.imu.ba[0]
    before_second = first
    update_with_accel(fs, a_m=[0.5, 0.0, 0.0], thrust=np.zeros(3), noise=AccelNoise(0.1))
    second_correction = (fs.imu.force[0] + fs.imu.ba[0]) - before_second
    assert 0.0 <= second_correction < first


def test_repeated_updates_match_batch_least_squares():
    # information-form oracle on a static problem: after n identical-noise
    # observations of s = ba + f, the posterior of s matches batch LS
    fs = make_filter(init_sigma_accel_bias=0.3, init_sigma_force=0.6)
    sigma = 0.2
    rng = np.random.default_rng(7)
    z_list = rng.normal(0.8, sigma, size=200)
    for z in z_list:
        update_with_accel(fs, a_m=[z, 0.0, 0.0], thrust=np.zeros(3), noise=AccelNoise(sigma))
    # batch: prior on s = ba + f with var 0.09 + 0.36, measurements of s
    prior_var = 0.3**2 + 0.6**2
    post_info = 1.0 / prior_var + len(z_list) / sigma**2
    post_mean = (z_list.sum() / sigma**2) / post_info
    est_sum = fs.imu.ba[0] + fs.imu.force[0]
    var_sum = fs.P[12, 12] + fs.P[15, 15] + 2 * fs.P[12, 15]
    assert abs(est_sum - post_mean) < 1e-9
    assert abs(var_sum - 1.0 / post_info) < 1e-9


def test_observability_split_static_updates():
    # sum direction collapses to the measurement floor, difference direction
    # stays prior-dominated (no propagation in between)
    fs = make_filter(init_sigma_accel_bias=0.5, init_sigma_force=0.5)
    sigma = 0.2
    prior_diff_var = 0.25 + 0.25  # var(ba - f) per axis
    for _ in range(1000):
        update_with_accel(fs, a_m=np.zeros(3), thrust=np.zeros(3), noise=AccelNoise(sigma))
    var_sum = fs.P[12, 12] + fs.P[15, 15] + 2 * fs.P[12, 15]
    var_diff = fs.P[12, 12] + fs.P[15, 15] - 2 * fs.P[12, 15]
    assert var_diff >= 0.9 * prior_diff_var
    floor = sigma**2 / 1000
    assert var_sum <= 2.0 * floor
