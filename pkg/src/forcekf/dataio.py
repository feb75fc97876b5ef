"""Dataset and result files: bit-exact CSV schemas.

All files are comma-separated with a mandatory header row and timestamps in
seconds. Numbers are written with 17 significant digits so that write ->
load round trips are exact for float64.

    imu.csv          t, wx, wy, wz, ax, ay, az
    thrust.csv       t, Tx, Ty, Tz
    features.csv     t, feature_id, u, v            (one row per observation)
    groundtruth.csv  t, qw, qx, qy, qz, px, py, pz, vx, vy, vz, Fx, Fy, Fz
    estimate.csv     t, quaternion, position, velocity, gyro bias, accel
                     bias, force, then the 18 error-state covariance
                     diagonal entries (38 columns total)
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

FMT = "%.17g"

IMU_HEADER = ["t", "wx", "wy", "wz", "ax", "ay", "az"]
THRUST_HEADER = ["t", "Tx", "Ty", "Tz"]
FEATURES_HEADER = ["t", "feature_id", "u", "v"]
GROUNDTRUTH_HEADER = ["t", "qw", "qx", "qy", "qz", "px", "py", "pz",
                      "vx", "vy", "vz", "Fx", "Fy", "Fz"]
ESTIMATE_HEADER = (
    ["t", "qw", "qx", "qy", "qz", "px", "py", "pz", "vx", "vy", "vz",
     "bwx", "bwy", "bwz", "bax", "bay", "baz", "Fx", "Fy", "Fz"]
    + [f"cov_{name}_{ax}" for name in ("att", "pos", "vel", "bg", "ba", "F") for ax in "xyz"]
)


@dataclass
class DatasetStreams:
    """Loaded measurement streams; ground truth is optional."""

    imu_t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    thrust_t: np.ndarray
    thrust: np.ndarray
    frames: list  # (t, ids, uv) in time order
    truth_t: np.ndarray | None = None
    truth_q: np.ndarray | None = None
    truth_p: np.ndarray | None = None
    truth_v: np.ndarray | None = None
    truth_force: np.ndarray | None = None

    @property
    def has_truth(self):
        return self.truth_t is not None


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(FMT % x for x in row) + "\n")


def _read_csv(path, header, int_cols=()):
    """Read and validate a CSV; returns an (n, len(header)) float array."""
    if not os.path.isfile(path):
        raise DataFormatError(f"{path}: file not found")
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
        names = [h.strip() for h in first.strip().split(",")]
        if names != header:
            raise DataFormatError(
                f"{path}:1: header mismatch, expected '{','.join(header)}'"
            )
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(header)} columns, found {len(parts)}"
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def _check_monotonic(t, path, strict=True):
    dt = np.diff(t)
    bad = np.nonzero(dt <= 0 if strict else dt < 0)[0]
    if bad.size:
        # +3: one for the header, one for 1-indexing, one for diff offset
        raise DataFormatError(f"{path}:{bad[0] + 3}: non-monotonic timestamp")


def write_dataset(directory, ds):
    """Write a SimDataset (or DatasetStreams with truth) to CSV files."""
    os.makedirs(directory, exist_ok=True)
    _write_csv(os.path.join(directory, "imu.csv"), IMU_HEADER,
               np.column_stack([ds.imu_t, ds.gyro, ds.accel]))
    _write_csv(os.path.join(directory, "thrust.csv"), THRUST_HEADER,
               np.column_stack([ds.thrust_t, ds.thrust]))
    feature_rows = []
    for t, ids, uv in ds.frames:
        for i in range(len(ids)):
            feature_rows.append((t, float(ids[i]), uv[i, 0], uv[i, 1]))
    _write_csv(os.path.join(directory, "features.csv"), FEATURES_HEADER, feature_rows)
    if getattr(ds, "truth_t", None) is not None:
        _write_csv(
            os.path.join(directory, "groundtruth.csv"),
            GROUNDTRUTH_HEADER,
            np.column_stack([ds.truth_t, ds.truth_q, ds.truth_p, ds.truth_v, ds.truth_force]),
        )


def load_dataset(directory):
    """Load and validate the dataset CSVs from a directory."""
    imu = _read_csv(os.path.join(directory, "imu.csv"), IMU_HEADER)
    _check_monotonic(imu[:, 0], os.path.join(directory, "imu.csv"))
    thrust = _read_csv(os.path.join(directory, "thrust.csv"), THRUST_HEADER)
    _check_monotonic(thrust[:, 0], os.path.join(directory, "thrust.csv"))

    imu_dt = np.median(np.diff(imu[:, 0]))
    thrust_dt = np.median(np.diff(thrust[:, 0]))
    if abs(imu_dt - thrust_dt) > 0.05 * imu_dt:
        raise DataFormatError(
            f"{directory}: thrust rate differs from IMU rate by more than 5% "
            f"({1 / thrust_dt:.2f} vs {1 / imu_dt:.2f} Hz)"
        )

    feat_path = os.path.join(directory, "features.csv")
    feats = _read_csv(feat_path, FEATURES_HEADER)
    _check_monotonic(feats[:, 0], feat_path, strict=False)
    frames = []
    if feats.size:
        times = feats[:, 0]
        boundaries = np.nonzero(np.diff(times) > 0)[0] + 1
        starts = np.concatenate([[0], boundaries])
        ends = np.concatenate([boundaries, [len(times)]])
        for s, e in zip(starts, ends):
            frames.append((times[s], feats[s:e, 1].astype(int), feats[s:e, 2:4].copy()))

    streams = DatasetStreams(
        imu_t=imu[:, 0], gyro=imu[:, 1:4], accel=imu[:, 4:7],
        thrust_t=thrust[:, 0], thrust=thrust[:, 1:4], frames=frames,
    )

    gt_path = os.path.join(directory, "groundtruth.csv")
    if os.path.isfile(gt_path):
        gt = _read_csv(gt_path, GROUNDTRUTH_HEADER)
        _check_monotonic(gt[:, 0], gt_path)
        streams.truth_t = gt[:, 0]
        streams.truth_q = gt[:, 1:5]
        streams.truth_p = gt[:, 5:8]
        streams.truth_v = gt[:, 8:11]
        streams.truth_force = gt[:, 11:14]
    return streams


def write_states(path, times, states, cov_diags):
    """Write the estimate time series (38 columns per row)."""
    rows = []
    for t, x, diag in zip(times, states, cov_diags):
        rows.append(np.concatenate([[t], x.q, x.p, x.v, x.bg, x.ba, x.force, diag]))
    _write_csv(path, ESTIMATE_HEADER, rows)


@dataclass
class EstimateSeries:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    v: np.ndarray
    bg: np.ndarray
    ba: np.ndarray
    force: np.ndarray
    cov_diag: np.ndarray  # (n, 18)


def read_estimates(path):
    data = _read_csv(path, ESTIMATE_HEADER)
    _check_monotonic(data[:, 0], path)
    return EstimateSeries(
        t=data[:, 0], q=data[:, 1:5], p=data[:, 5:8], v=data[:, 8:11],
        bg=data[:, 11:14], ba=data[:, 14:17], force=data[:, 17:20],
        cov_diag=data[:, 20:38],
    )
