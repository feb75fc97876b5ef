"""Unit-quaternion / SO(3) kernel with a fixed error-state retraction.

Quaternions are stored as length-4 float arrays [w, x, y, z] (Hamilton
products). A quaternion q represents the attitude of the vehicle body frame
relative to the world frame, and quat_to_rot(q) returns the matrix R that
maps world-frame vectors into the body frame.

The retraction convention every Jacobian in the filter is linearized
against is

    R(boxplus(q, dtheta)) = Exp(-dtheta) @ R(q)

exactly, where Exp is the SO(3) exponential of the skew matrix. To first
order this is (I - skew(dtheta)) @ R(q). Under this convention integrating
a constant body rate w over dt is boxplus(q, w * dt).
"""

from __future__ import annotations

import math

import numpy as np

QUAT_NORM_TOL = 1e-6


def skew(v):
    """Cross-product matrix: skew(v) @ w == np.cross(v, w)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def quat_normalize(q):
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    return np.array([w / n, x / n, y / n, z / n])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_multiply(a, b):
    """Hamilton product a (x) b."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_rotvec(phi):
    """Unit quaternion of the rotation vector phi (axis * angle)."""
    px, py, pz = float(phi[0]), float(phi[1]), float(phi[2])
    angle = math.sqrt(px * px + py * py + pz * pz)
    if angle < 1e-8:
        # second-order series keeps full precision near zero
        w = 1.0 - angle * angle / 8.0
        s = 0.5 - angle * angle / 48.0
        return quat_normalize((w, s * px, s * py, s * pz))
    half = 0.5 * angle
    s = math.sin(half) / angle
    return np.array([math.cos(half), s * px, s * py, s * pz])


def rotvec_from_quat(q):
    """Rotation vector of q, with angle in [0, pi]."""
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    if s < 1e-10:
        # small-angle series: vec ~= 2 * v / w
        k = 2.0 / w
        return np.array([k * x, k * y, k * z])
    k = 2.0 * math.atan2(s, w) / s
    return np.array([k * x, k * y, k * z])


def quat_to_rot(q):
    """Rotation matrix mapping world-frame vectors into the body frame.

    Rejects inputs whose norm deviates from 1 by more than 1e-6.
    """
    w, x, y, z = q
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if abs(n - 1.0) > QUAT_NORM_TOL:
        raise ValueError(f"quaternion is not normalized: |q| = {n:.9f}")
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def rot_to_quat(R):
    """Quaternion with quat_to_rot(q) == R, w >= 0 (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    q = quat_normalize(q)
    return -q if q[0] < 0.0 else q


def omega_matrix(w):
    """4x4 matrix with qdot = 0.5 * omega_matrix(w) @ q for body rate w.

    Consistent with the boxplus convention: its closed-form integral over dt
    equals boxplus(q, w * dt).
    """
    wx, wy, wz = w
    return np.array(
        [
            [0.0, wx, wy, wz],
            [-wx, 0.0, wz, -wy],
            [-wy, -wz, 0.0, wx],
            [-wz, wy, -wx, 0.0],
        ]
    )


def boxplus(q, dtheta):
    """Retract the error rotation vector dtheta onto q.

    Satisfies R(boxplus(q, dtheta)) = Exp(-dtheta) @ R(q) exactly.
    """
    dx, dy, dz = float(dtheta[0]), float(dtheta[1]), float(dtheta[2])
    if math.sqrt(dx * dx + dy * dy + dz * dz) >= math.pi:
        raise ValueError("boxplus requires |dtheta| < pi")
    return quat_normalize(quat_multiply(quat_from_rotvec((-dx, -dy, -dz)), q))


def boxminus(q1, q2):
    """Inverse of boxplus: boxplus(q2, boxminus(q1, q2)) == q1 (up to sign).

    Raises ValueError when the relative rotation angle reaches pi (the error
    vector is not unique there).
    """
    dq = quat_multiply(q1, quat_conjugate(q2))
    w, x, y, z = dq
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    angle = 2.0 * math.atan2(s, w)
    if angle >= math.pi - 1e-6:
        raise ValueError("degenerate rotation: relative angle at or beyond pi")
    return -rotvec_from_quat((w, x, y, z))


def integrate_gyro(q, w, dt):
    """Closed-form integration of qdot = 0.5 * Omega(w) @ q over dt, constant w."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return boxplus(q, (w[0] * dt, w[1] * dt, w[2] * dt))


def quat_distance(q1, q2):
    """Euclidean distance between quaternions, sign-invariant."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    return min(np.linalg.norm(q1 - q2), np.linalg.norm(q1 + q2))
