"""Quaternion and SO(3) kinematics.

Quaternions are numpy arrays ``[eta, eps_x, eps_y, eps_z]`` (scalar first,
Hamilton product). ``rot_from_quat(q)`` maps body coordinates to inertial
coordinates.
"""

from __future__ import annotations

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix, ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def normalize(q: np.ndarray) -> np.ndarray:
    """Return ``q`` scaled to unit norm."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_conj(q: np.ndarray) -> np.ndarray:
    """Conjugate (inverse for unit quaternions)."""
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_mul_raw(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product without renormalization (accepts pure quaternions)."""
    a0, av = a[0], np.asarray(a[1:])
    b0, bv = b[0], np.asarray(b[1:])
    out = np.empty(4)
    out[0] = a0 * b0 - av @ bv
    out[1:] = a0 * bv + b0 * av + np.cross(av, bv)
    return out


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of two unit quaternions, renormalized."""
    return normalize(quat_mul_raw(a, b))


def rot_from_quat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix ``I + 2 eta [eps]x + 2 [eps]x^2``."""
    eta = q[0]
    E = skew(q[1:])
    return np.eye(3) + 2.0 * eta * E + 2.0 * E @ E


def rot_from_quat_elements(q: np.ndarray) -> np.ndarray:
    """Same rotation written entry by entry in the quaternion components."""
    n, e1, e2, e3 = q
    return np.array(
        [
            [1 - 2 * (e2**2 + e3**2), 2 * (e1 * e2 - n * e3), 2 * (e1 * e3 + n * e2)],
            [2 * (e1 * e2 + n * e3), 1 - 2 * (e1**2 + e3**2), 2 * (e2 * e3 - n * e1)],
            [2 * (e1 * e3 - n * e2), 2 * (e2 * e3 + n * e1), 1 - 2 * (e1**2 + e2**2)],
        ]
    )


def quat_deriv(q: np.ndarray, omega_b: np.ndarray) -> np.ndarray:
    """Quaternion rate ``0.5 * q (x) [0, omega_b]``."""
    return 0.5 * quat_mul_raw(q, np.concatenate(([0.0], omega_b)))


def eps_deriv_reduced(eps: np.ndarray, omega_b: np.ndarray) -> np.ndarray:
    """Vector-part rate with the scalar part eliminated by the unit norm.

    ``eps_dot = 0.5 * (eta * omega + eps x omega)`` with
    ``eta = sqrt(1 - |eps|^2)`` (positive branch).
    """
    eta = np.sqrt(max(0.0, 1.0 - eps @ eps))
    return 0.5 * (eta * omega_b + np.cross(eps, omega_b))


def quat_error(q_ref: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Relative attitude ``q_ref^-1 (x) q``."""
    return quat_mul(quat_conj(q_ref), q)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Unit quaternion for a rotation of ``angle`` about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate(([np.cos(angle / 2)], np.sin(angle / 2) * axis))


def euler_from_quat(q: np.ndarray) -> np.ndarray:
    """Roll, pitch, yaw (ZYX) in radians. Display only."""
    R = rot_from_quat(q)
    roll = np.arctan2(R[2, 1], R[2, 2])
    pitch = -np.arcsin(np.clip(R[2, 0], -1.0, 1.0))
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def sign_pos(x: float) -> float:
    """Sign function with ``sign(0) = +1``."""
    return 1.0 if x >= 0.0 else -1.0
