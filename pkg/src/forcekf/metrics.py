"""Evaluation metrics: external-force RMSE, ATE, NEES consistency.

Conventions (documented because they change numbers materially):

* force_rmse uses the vector-norm form sqrt(mean ||e||^2), so a constant
  single-axis error of magnitude c reports exactly c. Per-axis-averaged
  conventions differ by up to sqrt(3).
* ate aligns the estimate to ground truth with a closed-form rigid
  transform (rotation + translation, no scale) before taking the position
  RMSE; a yaw-only alignment mode is available for sensitivity checks.
* nees accepts either full covariance blocks (n, k, k) or diagonals (n, k);
  attitude errors are measured in rotation-vector space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3
from .errors import EvaluationError


@dataclass
class MetricsReport:
    force_rmse: float | None = None
    ate: float | None = None
    nees_mean: float | None = None
    force_samples: int = 0
    ate_samples: int = 0
    nees_samples: int = 0

    def rows(self):
        out = []
        if self.force_rmse is not None:
            out.append(("force_rmse", self.force_rmse))
            out.append(("force_samples", float(self.force_samples)))
        if self.ate is not None:
            out.append(("ate", self.ate))
            out.append(("ate_samples", float(self.ate_samples)))
        if self.nees_mean is not None:
            out.append(("nees_force_mean", self.nees_mean))
            out.append(("nees_samples", float(self.nees_samples)))
        return out


def _interp_rows(t_query, t_ref, values):
    out = np.empty((len(t_query), values.shape[1]))
    for j in range(values.shape[1]):
        out[:, j] = np.interp(t_query, t_ref, values[:, j])
    return out


def force_rmse(est_t, est_force, gt_t, gt_force):
    """Vector-norm RMSE of the external force against interpolated truth."""
    est_t = np.asarray(est_t, dtype=float)
    gt_t = np.asarray(gt_t, dtype=float)
    mask = (est_t >= gt_t[0]) & (est_t <= gt_t[-1])
    span = est_t[-1] - est_t[0]
    if span <= 0 or est_t[mask].size == 0:
        raise EvaluationError("no overlapping time support for force RMSE")
    overlap = est_t[mask][-1] - est_t[mask][0]
    if overlap < 0.5 * span:
        raise EvaluationError(
            f"force RMSE overlap {overlap:.2f}s is below half the estimate span {span:.2f}s"
        )
    gt_interp = _interp_rows(est_t[mask], gt_t, np.asarray(gt_force, dtype=float))
    err = np.asarray(est_force, dtype=float)[mask] - gt_interp
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1)))), int(mask.sum())


def _match_pairs(est_t, gt_t, tol):
    idx = np.searchsorted(gt_t, est_t)
    pairs = []
    for i, t in enumerate(est_t):
        best, best_dt = None, tol
        for j in (idx[i] - 1, idx[i]):
            if 0 <= j < len(gt_t):
                dt = abs(gt_t[j] - t)
                if dt <= best_dt:
                    best, best_dt = j, dt
        if best is not None:
            pairs.append((i, best))
    return pairs


def rigid_align(src, dst, yaw_only=False):
    """Closed-form rotation + translation minimizing ||R src + t - dst||^2."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cs = src - mu_s
    cd = dst - mu_d
    if yaw_only:
        # planar Procrustes about the z axis
        num = np.sum(cs[:, 0] * cd[:, 1] - cs[:, 1] * cd[:, 0])
        den = np.sum(cs[:, 0] * cd[:, 0] + cs[:, 1] * cd[:, 1])
        theta = np.arctan2(num, den)
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    else:
        H = cs.T @ cd
        U, _, Vt = np.linalg.svd(H)
        S = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
        R = Vt.T @ S @ U.T
    t = mu_d - R @ mu_s
    return R, t


def ate(est_t, est_p, gt_t, gt_p, match_tol=0.010, yaw_only=False):
    """Absolute trajectory error after rigid alignment."""
    est_t = np.asarray(est_t, dtype=float)
    gt_t = np.asarray(gt_t, dtype=float)
    est_p = np.asarray(est_p, dtype=float)
    gt_p = np.asarray(gt_p, dtype=float)
    pairs = _match_pairs(est_t, gt_t, match_tol)
    if len(pairs) < 10:
        raise EvaluationError(f"only {len(pairs)} matched pose pairs, need at least 10")
    ei = np.array([p[0] for p in pairs])
    gi = np.array([p[1] for p in pairs])
    R, t = rigid_align(est_p[ei], gt_p[gi], yaw_only)
    aligned = est_p[ei] @ R.T + t
    err = aligned - gt_p[gi]
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1)))), len(pairs)


def nees(errors, covariances):
    """Per-sample e^T P^-1 e and its mean.

    covariances may be (n, k, k) full blocks or (n, k) diagonals.
    """
    errors = np.asarray(errors, dtype=float)
    covariances = np.asarray(covariances, dtype=float)
    n = errors.shape[0]
    series = np.empty(n)
    if covariances.ndim == 2:
        if np.any(covariances <= 0):
            raise EvaluationError("NEES diagonal covariance has non-positive entries")
        series = np.sum(errors**2 / covariances, axis=1)
    else:
        for i in range(n):
            try:
                series[i] = errors[i] @ np.linalg.solve(covariances[i], errors[i])
            except np.linalg.LinAlgError as exc:
                raise EvaluationError(f"singular covariance block at sample {i}") from exc
    return series, float(series.mean())


def force_nees_series(est, gt_t, gt_force):
    """Force-block NEES of an EstimateSeries against interpolated truth."""
    mask = (est.t >= gt_t[0]) & (est.t <= gt_t[-1])
    if mask.sum() == 0:
        raise EvaluationError("no overlapping support for NEES")
    gt_interp = _interp_rows(est.t[mask], gt_t, np.asarray(gt_force, dtype=float))
    err = est.force[mask] - gt_interp
    diag = est.cov_diag[mask][:, 15:18]
    series, mean = nees(err, diag)
    return est.t[mask], series, mean


def attitude_errors(est_q, gt_q):
    """Rotation-vector errors between matched attitude samples."""
    return np.array([so3.boxminus(qe, qg) for qe, qg in zip(est_q, gt_q)])


def write_metrics(path, report):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("metric,value\n")
        for name, value in report.rows():
            f.write(f"{name},%.17g\n" % value)


def write_nees(path, times, series):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("t,nees_force\n")
        for t, v in zip(times, series):
            f.write("%.17g,%.17g\n" % (t, v))
