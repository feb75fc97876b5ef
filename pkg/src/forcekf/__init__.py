"""Thrust-driven visual-inertial external force estimator.

An error-state sliding-window Kalman filter whose state carries attitude,
position, velocity, IMU biases and a body-frame external force. The mean is
propagated with gyroscope and mass-normalized thrust measurements; the
accelerometer and camera feature tracks correct the state at their own rates.
Ships with a synthetic flight simulator (elastic-rope disturbance) and an
evaluation harness (force RMSE, ATE, NEES).
"""

__version__ = "0.1.0"
