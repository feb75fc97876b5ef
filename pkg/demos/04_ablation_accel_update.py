"""Why the instantaneous accelerometer update matters.

The same rope dataset is processed twice: once with the full filter and
once with the accelerometer update disabled (propagation + vision only).
Without the accel update the force is observable only through its slow
effect on the propagated motion, so the estimate lags and the RMSE
grows several-fold.
"""

import numpy as np

from forcekf.config import EstimatorConfig
from forcekf.dataio import DatasetStreams
from forcekf.metrics import force_rmse
from forcekf.pipeline import run_estimator
from forcekf.simulate import SimConfig, synthesize

dataset = synthesize(SimConfig(duration=20.0, seed=13))
streams = DatasetStreams(
    dataset.imu_t, dataset.gyro, dataset.accel, dataset.thrust_t, dataset.thrust,
    dataset.frames, dataset.truth_t, dataset.truth_q, dataset.truth_p,
    dataset.truth_v, dataset.truth_force,
)

results = {}
for label, enabled in (("full filter", True), ("no accel update", False)):
    cfg = EstimatorConfig()
    cfg.enable_accel_update = enabled
    log = run_estimator(streams, cfg)
    est_t = np.array(log.times)
    est_force = np.array([s.force for s in log.states])
    rmse, _ = force_rmse(est_t, est_force, dataset.truth_t, dataset.truth_force)
    results[label] = rmse
    print(f"{label:18s} force RMSE = {rmse:.4f} m/s^2")

print(f"\ndegradation factor: {results['no accel update'] / results['full filter']:.1f}x")
