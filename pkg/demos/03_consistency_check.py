"""Filter consistency on the rope scenario: force-block NEES.

For a consistent estimator the normalized squared error e^T P^-1 e of the
3-dimensional force block averages 3. This demo runs a few seeds and prints
the per-run means; the full 25-run gate lives in the acceptance suite and
the `forcekf mc` subcommand.
"""

import numpy as np

from forcekf.config import EstimatorConfig
from forcekf.dataio import DatasetStreams
from forcekf.metrics import _interp_rows, nees
from forcekf.pipeline import run_estimator
from forcekf.simulate import SimConfig, synthesize

means = []
for seed in (1, 2, 3):
    dataset = synthesize(SimConfig(duration=30.0, seed=seed))
    streams = DatasetStreams(
        dataset.imu_t, dataset.gyro, dataset.accel, dataset.thrust_t, dataset.thrust,
        dataset.frames, dataset.truth_t, dataset.truth_q, dataset.truth_p,
        dataset.truth_v, dataset.truth_force,
    )
    log = run_estimator(streams, EstimatorConfig())
    est_t = np.array(log.times)
    est_force = np.array([s.force for s in log.states])
    cov = np.array(log.cov_diags)[:, 15:18]
    truth = _interp_rows(est_t, dataset.truth_t, dataset.truth_force)
    _, mean = nees(est_force - truth, cov)
    means.append(mean)
    print(f"seed {seed}: mean force NEES = {mean:.3f}  (dof = 3)")

print(f"\naverage over runs: {np.mean(means):.3f}")
print("a consistent filter lands near 3; far below means the covariance is "
      "too conservative, far above means the filter is overconfident")
