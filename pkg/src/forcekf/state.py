"""Filter state: vehicle state, pose clones, landmarks, joint covariance.

Error-state layout (dimension 18 for the vehicle block):

    [0:3]   attitude (rotation-vector error, boxplus convention)
    [3:6]   position
    [6:9]   velocity
    [9:12]  gyroscope bias
    [12:15] accelerometer bias
    [15:18] external force (body frame)

followed by 6 error dims per pose clone (attitude, position) and 3 per
landmark. The covariance P is kept symmetric by construction: every
mutating operation ends with a symmetrization pass.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import chi2

from . import so3
from .errors import ConfigError, NumericalError, OrderingError

ATT = slice(0, 3)
POS = slice(3, 6)
VEL = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)
FORCE = slice(15, 18)

IMU_DIM = 18
CLONE_DIM = 6
LM_DIM = 3

_chi2_cache: dict[tuple[float, int], float] = {}


def chi2_threshold(prob, dof):
    key = (float(prob), int(dof))
    if key not in _chi2_cache:
        _chi2_cache[key] = float(chi2.ppf(prob, dof))
    return _chi2_cache[key]


class ImuState:
    """Current vehicle state: attitude, position, velocity, biases, external force."""

    def __init__(self, q=None, p=None, v=None, bg=None, ba=None, force=None):
        self.q = np.array([1.0, 0.0, 0.0, 0.0]) if q is None else np.asarray(q, dtype=float).copy()
        self.p = np.zeros(3) if p is None else np.asarray(p, dtype=float).copy()
        self.v = np.zeros(3) if v is None else np.asarray(v, dtype=float).copy()
        self.bg = np.zeros(3) if bg is None else np.asarray(bg, dtype=float).copy()
        self.ba = np.zeros(3) if ba is None else np.asarray(ba, dtype=float).copy()
        self.force = np.zeros(3) if force is None else np.asarray(force, dtype=float).copy()

    def copy(self):
        return ImuState(self.q, self.p, self.v, self.bg, self.ba, self.force)


class PoseClone:
    """Attitude + position frozen at a camera timestamp."""

    def __init__(self, q, p, timestamp):
        self.q = np.asarray(q, dtype=float).copy()
        self.p = np.asarray(p, dtype=float).copy()
        self.timestamp = float(timestamp)


class Landmark:
    """A feature position kept inside the filter state."""

    def __init__(self, feature_id, p):
        self.id = int(feature_id)
        self.p = np.asarray(p, dtype=float).copy()


class FilterState:
    """Joint estimate: ImuState, ordered pose clones, landmarks, covariance P."""

    def __init__(self, imu, P, time):
        self.imu = imu
        self.clones: list[PoseClone] = []
        self.landmarks: list[Landmark] = []
        self.P = np.asarray(P, dtype=float)
        self.time = float(time)

    @property
    def dim(self):
        return IMU_DIM + CLONE_DIM * len(self.clones) + LM_DIM * len(self.landmarks)

    def clone_index(self, i):
        """Start of clone i's error block."""
        return IMU_DIM + CLONE_DIM * i

    def landmark_index(self, j):
        """Start of landmark j's error block."""
        return IMU_DIM + CLONE_DIM * len(self.clones) + LM_DIM * j

    def clone_at(self, timestamp, tol=1e-9):
        for i, c in enumerate(self.clones):
            if abs(c.timestamp - timestamp) <= tol:
                return i, c
        return None, None

    def symmetrize(self):
        self.P = 0.5 * (self.P + self.P.T)

    def apply_correction(self, dx):
        """Inject an error-state correction: boxplus on attitudes, additive elsewhere."""
        if dx.shape[0] != self.dim:
            raise ValueError("correction dimension mismatch")
        imu = self.imu
        imu.q = so3.boxplus(imu.q, dx[ATT])
        imu.p = imu.p + dx[POS]
        imu.v = imu.v + dx[VEL]
        imu.bg = imu.bg + dx[BG]
        imu.ba = imu.ba + dx[BA]
        imu.force = imu.force + dx[FORCE]
        for i, c in enumerate(self.clones):
            k = self.clone_index(i)
            c.q = so3.boxplus(c.q, dx[k : k + 3])
            c.p = c.p + dx[k + 3 : k + 6]
        for j, lm in enumerate(self.landmarks):
            k = self.landmark_index(j)
            lm.p = lm.p + dx[k : k + 3]


def init_filter(cfg, initial_pose, initial_velocity):
    """Build a FilterState from config priors and an initial pose/velocity.

    Biases and external force start at zero; the covariance is block diagonal
    from the configured initial standard deviations.
    """
    stds = np.array(
        [
            cfg.init_sigma_attitude,
            cfg.init_sigma_position,
            cfg.init_sigma_velocity,
            cfg.init_sigma_gyro_bias,
            cfg.init_sigma_accel_bias,
            cfg.init_sigma_force,
        ]
    )
    if np.any(stds <= 0.0):
        raise ConfigError("all initial standard deviations must be positive")
    q0, p0 = initial_pose
    imu = ImuState(q=so3.quat_normalize(q0), p=p0, v=initial_velocity)
    P = np.diag(np.repeat(stds**2, 3))
    return FilterState(imu, P, cfg.start_time)


def clone_pose(state, t, tol=1e-9):
    """Append a pose clone at the current time and grow P by duplication.

    The new clone rows/columns are exact copies of the vehicle pose block, so
    the clone starts perfectly correlated with the pose it duplicates.
    """
    if abs(state.time - t) > tol:
        raise OrderingError(f"clone requested at t={t} but filter clock is {state.time}")
    if state.clones and t <= state.clones[-1].timestamp:
        raise ValueError("clone timestamps must be strictly increasing")
    d = state.dim
    ins = IMU_DIM + CLONE_DIM * len(state.clones)  # insert before landmark blocks
    P = state.P
    Pn = np.zeros((d + CLONE_DIM, d + CLONE_DIM))
    # copy existing blocks around the insertion point
    Pn[:ins, :ins] = P[:ins, :ins]
    Pn[:ins, ins + CLONE_DIM :] = P[:ins, ins:]
    Pn[ins + CLONE_DIM :, :ins] = P[ins:, :ins]
    Pn[ins + CLONE_DIM :, ins + CLONE_DIM :] = P[ins:, ins:]
    # new rows/cols duplicate the pose block (rows 0:6 of the error state)
    Pn[ins : ins + CLONE_DIM, :ins] = P[0:CLONE_DIM, :ins]
    Pn[ins : ins + CLONE_DIM, ins + CLONE_DIM :] = P[0:CLONE_DIM, ins:]
    Pn[:ins, ins : ins + CLONE_DIM] = P[:ins, 0:CLONE_DIM]
    Pn[ins + CLONE_DIM :, ins : ins + CLONE_DIM] = P[ins:, 0:CLONE_DIM]
    Pn[ins : ins + CLONE_DIM, ins : ins + CLONE_DIM] = P[0:CLONE_DIM, 0:CLONE_DIM]
    state.clones.append(PoseClone(state.imu.q, state.imu.p, t))
    state.P = Pn
    state.symmetrize()
    return state


def marginalize_oldest_clone(state, window_size):
    """Drop the oldest clone's rows/columns; only legal on window overflow."""
    if len(state.clones) <= window_size:
        raise ValueError(
            f"marginalization requires {window_size + 1} clones, have {len(state.clones)}"
        )
    k = state.clone_index(0)
    keep = np.r_[0:k, k + CLONE_DIM : state.dim]
    state.P = state.P[np.ix_(keep, keep)]
    state.clones.pop(0)
    return state


def marginalize_landmark(state, j):
    """Remove landmark j from the state and covariance."""
    k = state.landmark_index(j)
    keep = np.r_[0:k, k + LM_DIM : state.dim]
    state.P = state.P[np.ix_(keep, keep)]
    state.landmarks.pop(j)
    return state


def augment_landmark(state, feature_id, p_f, P_ff, P_fx):
    """Append a landmark block with the given covariance and cross terms."""
    d = state.dim
    Pn = np.zeros((d + LM_DIM, d + LM_DIM))
    Pn[:d, :d] = state.P
    Pn[d:, :d] = P_fx
    Pn[:d, d:] = P_fx.T
    Pn[d:, d:] = P_ff
    state.landmarks.append(Landmark(feature_id, p_f))
    state.P = Pn
    state.symmetrize()
    return state


def apply_ekf_update(state, H, r, R, gate_prob=None):
    """Gated EKF update with Joseph-form covariance arithmetic.

    Returns True when the update was applied, False when the chi-square gate
    rejected it (state untouched). Raises NumericalError when the innovation
    covariance cannot be factorized.

    The Joseph form (I-KH) P (I-KH)^T + K R K^T is computed in its expanded
    rank-k arrangement P - K M - M^T K^T + K S K^T with M = H P, which is
    algebraically identical for the exact Kalman gain but costs O(k d^2)
    instead of O(d^3).
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    d = state.dim
    if H.shape[1] != d:
        raise ValueError(f"H has {H.shape[1]} columns, state dimension is {d}")
    P = state.P
    M = H @ P  # k x d, equals (P H^T)^T by symmetry of P
    S = M @ H.T + R
    S = 0.5 * (S + S.T)
    try:
        rhs = np.linalg.solve(S, np.column_stack([M, r]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is singular") from exc
    if gate_prob is not None:
        gamma = float(r @ rhs[:, -1])
        if gamma > chi2_threshold(gate_prob, r.shape[0]):
            return False
    K = rhs[:, :-1].T  # d x k
    dx = K @ r
    KM = K @ M
    state.P = P - KM - KM.T + K @ S @ K.T
    state.apply_correction(dx)
    state.symmetrize()
    return True
