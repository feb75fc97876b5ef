"""Sliding-window visual update.

Feature tracks (pixel observations tied to pose-clone timestamps) are
triangulated from the clone window, linearized, and folded into the filter
after projecting out the landmark: the stacked measurement is multiplied by
an orthonormal basis of the left nullspace of the landmark Jacobian, which
removes the landmark without keeping it in the state. Features that survive
gating can optionally be promoted to in-state landmarks (delayed
initialization) up to the configured budget.

The camera is an undistorted pinhole; tracks are assumed pre-undistorted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from . import so3
from .state import (
    CLONE_DIM,
    IMU_DIM,
    LM_DIM,
    apply_ekf_update,
    augment_landmark,
    chi2_threshold,
    clone_pose,
    marginalize_landmark,
    marginalize_oldest_clone,
)

logger = logging.getLogger(__name__)

BEHIND_CAMERA_Z = 1e-6
GN_MAX_ITERS = 10
GN_STEP_TOL = 1e-8


@dataclass
class CameraModel:
    """Pinhole intrinsics plus body-to-camera extrinsics."""

    fx: float
    fy: float
    cx: float
    cy: float
    r_ic: np.ndarray  # rotation body -> camera
    p_ic: np.ndarray  # camera position in the body frame, m
    width: int = 640
    height: int = 480

    def __post_init__(self):
        self.r_ic = np.asarray(self.r_ic, dtype=float)
        self.p_ic = np.asarray(self.p_ic, dtype=float)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if np.max(np.abs(self.r_ic @ self.r_ic.T - np.eye(3))) > 1e-6:
            raise ValueError("r_ic must be orthonormal")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.fx, cfg.fy, cfg.cx, cfg.cy, cfg.r_ic, cfg.p_ic, cfg.width, cfg.height)


@dataclass
class FeatureTrack:
    """Pixel observations of one feature, keyed by clone timestamp."""

    id: int
    times: list = field(default_factory=list)
    uv: list = field(default_factory=list)

    def add(self, t, u, v):
        if self.times and t <= self.times[-1]:
            raise ValueError("track timestamps must be strictly increasing")
        self.times.append(float(t))
        self.uv.append((float(u), float(v)))

    def __len__(self):
        return len(self.times)

    def drop_before(self, t_min):
        """Discard observations older than t_min (marginalized clones)."""
        keep = [i for i, t in enumerate(self.times) if t >= t_min - 1e-12]
        self.times = [self.times[i] for i in keep]
        self.uv = [self.uv[i] for i in keep]


def point_in_camera(p_w, q, p, cam):
    """World point -> camera frame coordinates for a body pose (q, p)."""
    p_body = so3.quat_to_rot(q) @ (np.asarray(p_w, dtype=float) - p)
    return cam.r_ic @ (p_body - cam.p_ic)


def project_pinhole(p_f, clone, cam):
    """Project a world point through a clone pose; None when behind the camera."""
    pc = point_in_camera(p_f, clone.q, clone.p, cam)
    if pc[2] <= BEHIND_CAMERA_Z:
        return None
    return (cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy)


def camera_center(clone, cam):
    """Optical center of the camera in the world frame."""
    return clone.p + so3.quat_to_rot(clone.q).T @ cam.p_ic


def _matched_clone_poses(track, clones, tol=1e-9):
    """Clone poses matching the track's timestamps, in track order."""
    by_time = [(c.timestamp, c) for c in clones]
    out = []
    for t in track.times:
        hit = None
        for ct, c in by_time:
            if abs(ct - t) <= tol:
                hit = c
                break
        if hit is None:
            return None
        out.append(hit)
    return out


def triangulate(track, clones, cam, depth_min=0.1, depth_max=60.0, min_baseline_ratio=0.02):
    """Linear initialization plus Gauss-Newton refinement; None on failure.

    Failure cases: unmatched or too few observations, degenerate baseline,
    depth out of range in any view, or diverging refinement.
    """
    if len(track) < 2:
        return None
    poses = _matched_clone_poses(track, clones)
    if poses is None:
        return None
    m = len(poses)
    R_cw = np.empty((m, 3, 3))
    centers = np.empty((m, 3))
    obs_px = np.asarray(track.uv, dtype=float)
    for i, c in enumerate(poses):
        R_cw[i] = cam.r_ic @ so3.quat_to_rot(c.q)
        centers[i] = camera_center(c, cam)

    # normalized bearings in each camera frame
    mvec = np.empty((m, 3))
    mvec[:, 0] = (obs_px[:, 0] - cam.cx) / cam.fx
    mvec[:, 1] = (obs_px[:, 1] - cam.cy) / cam.fy
    mvec[:, 2] = 1.0

    # linear system: [m]x R_cw (p - c) = 0 for each view
    A = np.empty((3 * m, 3))
    b = np.empty(3 * m)
    for i in range(m):
        Mx = so3.skew(mvec[i]) @ R_cw[i]
        A[3 * i : 3 * i + 3] = Mx
        b[3 * i : 3 * i + 3] = Mx @ centers[i]
    p, *_ = np.linalg.lstsq(A, b, rcond=None)

    def residual_and_cost(pt):
        res = np.empty(2 * m)
        depths = np.empty(m)
        for i in range(m):
            pc = R_cw[i] @ (pt - centers[i])
            depths[i] = pc[2]
            if pc[2] <= BEHIND_CAMERA_Z:
                return None, None, None
            res[2 * i] = obs_px[i, 0] - (cam.fx * pc[0] / pc[2] + cam.cx)
            res[2 * i + 1] = obs_px[i, 1] - (cam.fy * pc[1] / pc[2] + cam.cy)
        return res, float(res @ res), depths

    res, cost, depths = residual_and_cost(p)
    if res is None:
        return None
    best_p, best_cost = p.copy(), cost
    increases = 0
    for _ in range(GN_MAX_ITERS):
        J = np.empty((2 * m, 3))
        for i in range(m):
            pc = R_cw[i] @ (p - centers[i])
            X, Y, Z = pc
            dpi = np.array([[cam.fx / Z, 0.0, -cam.fx * X / Z**2],
                            [0.0, cam.fy / Z, -cam.fy * Y / Z**2]])
            J[2 * i : 2 * i + 2] = -dpi @ R_cw[i]
        JtJ = J.T @ J
        try:
            step = np.linalg.solve(JtJ + 1e-12 * np.eye(3), -J.T @ res)
        except np.linalg.LinAlgError:
            return None
        p = p + step
        res, cost, depths = residual_and_cost(p)
        if res is None:
            return None
        if cost < best_cost:
            best_p, best_cost = p.copy(), cost
        elif cost > best_cost * (1.0 + 1e-9) + 1e-12:
            # only material increases count as divergence; post-convergence
            # oscillation at machine precision is benign
            increases += 1
            if increases >= 2:
                return None
        if np.linalg.norm(step) < GN_STEP_TOL:
            break

    res, cost, depths = residual_and_cost(best_p)
    if res is None:
        return None
    if np.any(depths < depth_min) or np.any(depths > depth_max):
        return None
    baseline = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            baseline = max(baseline, np.linalg.norm(centers[i] - centers[j]))
    if baseline / np.mean(depths) < min_baseline_ratio:
        return None
    return best_p


def feature_linearize(state, p_f, track, cam, tol=1e-9):
    """Stacked residual and Jacobians for one feature against its clones.

    Returns (H_x, H_f, r) with 2 rows per observation, or None when any
    observation projects behind the camera or misses its clone.
    """
    d = state.dim
    m = len(track)
    H_x = np.zeros((2 * m, d))
    H_f = np.zeros((2 * m, 3))
    r = np.zeros(2 * m)
    for k, (t, (u, v)) in enumerate(zip(track.times, track.uv)):
        idx, clone = state.clone_at(t, tol)
        if clone is None:
            return None
        R = so3.quat_to_rot(clone.q)
        p_body = R @ (p_f - clone.p)
        pc = cam.r_ic @ (p_body - cam.p_ic)
        X, Y, Z = pc
        if Z <= BEHIND_CAMERA_Z:
            return None
        dpi = np.array([[cam.fx / Z, 0.0, -cam.fx * X / Z**2],
                        [0.0, cam.fy / Z, -cam.fy * Y / Z**2]])
        rows = slice(2 * k, 2 * k + 2)
        r[rows] = [u - (cam.fx * X / Z + cam.cx), v - (cam.fy * Y / Z + cam.cy)]
        col = state.clone_index(idx)
        H_x[rows, col : col + 3] = dpi @ cam.r_ic @ so3.skew(p_body)
        H_x[rows, col + 3 : col + 6] = -dpi @ cam.r_ic @ R
        H_f[rows] = dpi @ cam.r_ic @ R
    return H_x, H_f, r


def nullspace_project(H_x, H_f, r):
    """Remove the landmark by projecting onto the left nullspace of H_f.

    Returns (H', r') with exactly 2m - 3 rows, or None when H_f is rank
    deficient.
    """
    rows = H_f.shape[0]
    if rows <= 3:
        raise ValueError("nullspace projection needs more than 3 rows")
    Q, R_qr = qr(H_f, mode="full")
    if np.min(np.abs(np.diag(R_qr[:3, :3]))) < 1e-10:
        return None
    N = Q[:, 3:]
    return N.T @ H_x, N.T @ r


class VisionUpdater:
    """Owns the live track buffer and applies per-frame visual updates."""

    def __init__(self, cam, cfg):
        self.cam = cam
        self.cfg = cfg
        self.tracks: dict[int, FeatureTrack] = {}
        self.stats = {"updated": 0, "triangulation_failed": 0, "gated": 0, "promoted": 0}

    def _triangulation_kwargs(self):
        return dict(
            depth_min=self.cfg.depth_min,
            depth_max=self.cfg.depth_max,
            min_baseline_ratio=self.cfg.min_baseline_ratio,
        )

    def _feature_rows(self, state, track):
        """Triangulate + linearize + nullspace-project + gate one track.

        Returns (H, r) or None; counts failures for diagnostics.
        """
        p_f = triangulate(track, state.clones, self.cam, **self._triangulation_kwargs())
        if p_f is None:
            self.stats["triangulation_failed"] += 1
            return None
        lin = feature_linearize(state, p_f, track, self.cam)
        if lin is None:
            self.stats["triangulation_failed"] += 1
            return None
        H_x, H_f, r = lin
        if H_x.shape[0] <= 3:
            return None
        projected = nullspace_project(H_x, H_f, r)
        if projected is None:
            return None
        H, r_o = projected
        sigma2 = self.cfg.sigma_pixel**2
        S = H @ state.P @ H.T + sigma2 * np.eye(H.shape[0])
        try:
            gamma = float(r_o @ np.linalg.solve(S, r_o))
        except np.linalg.LinAlgError:
            return None
        if gamma > chi2_threshold(self.cfg.vision_gate_prob, H.shape[0]):
            self.stats["gated"] += 1
            return None
        return H, r_o

    def _slam_rows(self, state, frame_by_id):
        """Reobservation rows for in-state landmarks seen in this frame."""
        rows_H, rows_r = [], []
        clone_idx = len(state.clones) - 1
        clone = state.clones[clone_idx]
        sigma2 = self.cfg.sigma_pixel**2
        for j, lm in enumerate(state.landmarks):
            if lm.id not in frame_by_id:
                continue
            u, v = frame_by_id[lm.id]
            R = so3.quat_to_rot(clone.q)
            p_body = R @ (lm.p - clone.p)
            pc = self.cam.r_ic @ (p_body - self.cam.p_ic)
            X, Y, Z = pc
            if Z <= BEHIND_CAMERA_Z:
                continue
            dpi = np.array([[self.cam.fx / Z, 0.0, -self.cam.fx * X / Z**2],
                            [0.0, self.cam.fy / Z, -self.cam.fy * Y / Z**2]])
            H = np.zeros((2, state.dim))
            col = state.clone_index(clone_idx)
            H[:, col : col + 3] = dpi @ self.cam.r_ic @ so3.skew(p_body)
            H[:, col + 3 : col + 6] = -dpi @ self.cam.r_ic @ R
            lcol = state.landmark_index(j)
            H[:, lcol : lcol + 3] = dpi @ self.cam.r_ic @ R
            r = np.array([u - (self.cam.fx * X / Z + self.cam.cx),
                          v - (self.cam.fy * Y / Z + self.cam.cy)])
            S = H @ state.P @ H.T + sigma2 * np.eye(2)
            gamma = float(r @ np.linalg.solve(S, r))
            if gamma > chi2_threshold(self.cfg.vision_gate_prob, 2):
                self.stats["gated"] += 1
                continue
            rows_H.append(H)
            rows_r.append(r)
        return rows_H, rows_r

    def _promote(self, state, track):
        """Delayed initialization of a track as an in-state landmark."""
        p_f = triangulate(track, state.clones, self.cam, **self._triangulation_kwargs())
        if p_f is None:
            return False
        lin = feature_linearize(state, p_f, track, self.cam)
        if lin is None:
            return False
        H_x, H_f, r = lin
        sigma2 = self.cfg.sigma_pixel**2
        Q, R_qr = qr(H_f, mode="full")
        R1 = R_qr[:3, :3]
        if np.min(np.abs(np.diag(R1))) < 1e-10:
            return False
        H1 = Q[:, :3].T @ H_x
        r1 = Q[:, :3].T @ r
        H2 = Q[:, 3:].T @ H_x
        r2 = Q[:, 3:].T @ r

        # the landmark-free part is an ordinary gated update
        dx_prior = None
        if H2.shape[0] > 0:
            P = state.P
            S = H2 @ P @ H2.T + sigma2 * np.eye(H2.shape[0])
            gamma = float(r2 @ np.linalg.solve(S, r2))
            if gamma > chi2_threshold(self.cfg.vision_gate_prob, H2.shape[0]):
                self.stats["gated"] += 1
                return False
            K = P @ H2.T @ np.linalg.inv(S)
            dx_prior = K @ r2
            apply_ekf_update(state, H2, r2, sigma2 * np.eye(H2.shape[0]), gate_prob=None)

        # initialize the landmark from the remaining rows
        P = state.P
        R1_inv = np.linalg.inv(R1)
        r1_adj = r1 - (H1 @ dx_prior if dx_prior is not None else 0.0)
        p_init = p_f + R1_inv @ r1_adj
        P_ff = R1_inv @ (H1 @ P @ H1.T + sigma2 * np.eye(3)) @ R1_inv.T
        P_fx = -R1_inv @ H1 @ P
        augment_landmark(state, track.id, p_init, P_ff, P_fx)
        self.stats["promoted"] += 1
        return True

    def update_with_frame(self, state, frame, t):
        """Clone at t, ingest the frame's observations, update, marginalize.

        frame: iterable of (feature_id, u, v).
        """
        N = self.cfg.window_size
        clone_pose(state, t)

        frame_by_id = {}
        for fid, u, v in frame:
            frame_by_id[int(fid)] = (float(u), float(v))

        # landmarks not reobserved leave the state before any indexing below
        lost = [j for j, lm in enumerate(state.landmarks) if lm.id not in frame_by_id]
        for j in reversed(lost):
            marginalize_landmark(state, j)

        slam_ids = {lm.id for lm in state.landmarks}
        seen_track_ids = set()
        for fid, (u, v) in frame_by_id.items():
            if fid in slam_ids:
                continue
            if fid not in self.tracks:
                self.tracks[fid] = FeatureTrack(fid)
            self.tracks[fid].add(t, u, v)
            seen_track_ids.add(fid)

        overflow = len(state.clones) > N
        oldest_t = state.clones[0].timestamp

        candidates = []
        to_delete = []
        for fid, track in self.tracks.items():
            terminated = fid not in seen_track_ids
            full = len(track) >= N
            at_oldest = overflow and track.times and abs(track.times[0] - oldest_t) <= 1e-9
            if terminated and len(track) < 2:
                to_delete.append(fid)
            elif terminated or full or at_oldest:
                candidates.append(fid)

        slam_budget = self.cfg.max_slam_features - len(state.landmarks)
        promote_ids = []
        if slam_budget > 0:
            living_full = sorted(
                (fid for fid in candidates if fid in seen_track_ids and len(self.tracks[fid]) >= N),
                key=lambda fid: -len(self.tracks[fid]),
            )
            promote_ids = living_full[:slam_budget]

        rows_H, rows_r = self._slam_rows(state, frame_by_id)
        for fid in candidates:
            if fid in promote_ids:
                continue
            out = self._feature_rows(state, self.tracks[fid])
            to_delete.append(fid)
            if out is None:
                continue
            rows_H.append(out[0])
            rows_r.append(out[1])

        if rows_H:
            H = np.vstack(rows_H)
            r = np.concatenate(rows_r)
            if H.shape[0] > state.dim:
                # QR-compress the stack; orthonormal mixing keeps R isotropic
                Qc, Rc = qr(H, mode="economic")
                H = Rc
                r = Qc.T @ r
            sigma2 = self.cfg.sigma_pixel**2
            apply_ekf_update(state, H, r, sigma2 * np.eye(H.shape[0]), gate_prob=None)
            self.stats["updated"] += 1

        for fid in promote_ids:
            self._promote(state, self.tracks[fid])
            to_delete.append(fid)

        for fid in set(to_delete):
            self.tracks.pop(fid, None)

        if overflow:
            marginalize_oldest_clone(state, N)
            for track in self.tracks.values():
                track.drop_before(state.clones[0].timestamp)
            for fid in [f for f, tr in self.tracks.items() if len(tr) == 0]:
                del self.tracks[fid]
        return state
