"""Figure rendering from estimator CSV outputs.

Reads estimate.csv (38 columns: time, quaternion, position, velocity,
biases, force, 18 covariance diagonal entries), the optional
groundtruth.csv, and the optional nees.csv, and writes:

    force_xyz.<fmt>       per-axis external force, estimate vs truth,
                          with a +-3 sigma band from the covariance diagonal
    trajectory_xy.<fmt>   top-down path overlay
    nees.<fmt>            force-block consistency series (when nees.csv exists)

Output is deterministic for identical inputs: fixed figure sizes, a fixed
SVG hash salt, and no embedded timestamps.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "forcekf-report"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SUPPORTED_FORMATS = ("svg", "png")

ESTIMATE_COLUMNS = 38
FORCE_SLICE = slice(17, 20)
FORCE_COV_SLICE = slice(35, 38)
GT_COLUMNS = 14
GT_POS_SLICE = slice(5, 8)
GT_FORCE_SLICE = slice(11, 14)


class ReportError(RuntimeError):
    """Raised when required inputs are missing or malformed."""


@dataclass
class ReportSpec:
    results_dir: str
    dataset_dir: str | None
    output_dir: str
    image_format: str = "svg"

    def validate(self):
        if self.image_format not in SUPPORTED_FORMATS:
            raise ReportError(
                f"unsupported image format '{self.image_format}' "
                f"(choose from {', '.join(SUPPORTED_FORMATS)})"
            )
        if not os.path.isdir(self.results_dir):
            raise ReportError(f"results directory not found: {self.results_dir}")
        return self


def _load_csv(path, expected_cols):
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if len(header) != expected_cols:
            raise ReportError(
                f"{path}: expected {expected_cols} columns, found {len(header)}"
            )
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    if data.shape[1] != expected_cols:
        raise ReportError(f"{path}: ragged rows")
    return data


def _savefig(fig, path):
    fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)


def render_report(spec):
    """Render all applicable figures; returns the list of written files."""
    spec.validate()
    estimate_path = os.path.join(spec.results_dir, "estimate.csv")
    if not os.path.isfile(estimate_path):
        raise ReportError(f"estimate file not found: {estimate_path}")
    est = _load_csv(estimate_path, ESTIMATE_COLUMNS)

    gt = None
    if spec.dataset_dir:
        gt_path = os.path.join(spec.dataset_dir, "groundtruth.csv")
        if os.path.isfile(gt_path):
            gt = _load_csv(gt_path, GT_COLUMNS)

    os.makedirs(spec.output_dir, exist_ok=True)
    written = []

    t = est[:, 0]
    force = est[:, FORCE_SLICE]
    sigma = np.sqrt(np.maximum(est[:, FORCE_COV_SLICE], 0.0))

    fig, axes = plt.subplots(3, 1, figsize=(8.0, 7.5), sharex=True)
    for i, (ax, label) in enumerate(zip(axes, "xyz")):
        ax.fill_between(t, force[:, i] - 3 * sigma[:, i], force[:, i] + 3 * sigma[:, i],
                        alpha=0.25, linewidth=0, color="tab:blue", label=r"$\pm 3\sigma$")
        ax.plot(t, force[:, i], color="tab:blue", label="estimate")
        if gt is not None:
            ax.plot(gt[:, 0], gt[:, GT_FORCE_SLICE][:, i], color="tab:orange",
                    linewidth=1.0, label="truth")
        ax.set_ylabel(f"force {label} [m/s$^2$]")
        if i == 0:
            ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("time [s]")
    fig.suptitle("External force estimate")
    path = os.path.join(spec.output_dir, f"force_xyz.{spec.image_format}")
    _savefig(fig, path)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    ax.plot(est[:, 5], est[:, 6], color="tab:blue", label="estimate")
    if gt is not None:
        ax.plot(gt[:, GT_POS_SLICE][:, 0], gt[:, GT_POS_SLICE][:, 1],
                color="tab:orange", linewidth=1.0, label="truth")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("Trajectory (top view)")
    path = os.path.join(spec.output_dir, f"trajectory_xy.{spec.image_format}")
    _savefig(fig, path)
    written.append(path)

    nees_path = os.path.join(spec.results_dir, "nees.csv")
    if os.path.isfile(nees_path):
        nees = _load_csv(nees_path, 2)
        fig, ax = plt.subplots(figsize=(8.0, 3.2))
        ax.plot(nees[:, 0], nees[:, 1], color="tab:blue", linewidth=0.8, label="NEES")
        ax.axhline(3.0, color="tab:gray", linestyle="--", linewidth=1.0, label="dof = 3")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("force NEES")
        ax.set_ylim(bottom=0.0)
        ax.legend(loc="upper right", fontsize=8)
        ax.set_title("Force-block consistency")
        path = os.path.join(spec.output_dir, f"nees.{spec.image_format}")
        _savefig(fig, path)
        written.append(path)

    return written
