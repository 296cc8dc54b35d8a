"""Euler-angle kinematics for the floating base.

Convention: theta = (roll, pitch, yaw) with the rotation composed as
R = Rz(yaw) @ Ry(pitch) @ Rx(roll) (world from base). The singular attitude
sits at pitch = +-pi/2: the robot would have to pitch fully vertical to hit
gimbal lock, far outside normal operation. Angular velocity omega is
expressed in the base frame throughout.
"""

import math

import numpy as np

from .errors import SingularAttitude

_SX = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
_SY = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
_SZ = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

DEFAULT_SINGULARITY_GUARD = 0.05  # [rad] guard band around pitch = +-pi/2


def skew(v):
    """Cross-product matrix: skew(a) @ b == cross(a, b)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def rotation_world_base(theta):
    """Rotation matrix mapping base-frame vectors into the world frame."""
    cr, sr = math.cos(theta[0]), math.sin(theta[0])
    cp, sp = math.cos(theta[1]), math.sin(theta[1])
    cy, sy = math.cos(theta[2]), math.sin(theta[2])
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def rotation_derivatives(theta):
    """R and its partial derivatives w.r.t. (roll, pitch, yaw).

    Returns (R, dR) with dR of shape (3, 3, 3), dR[k] = dR/dtheta_k.
    """
    cr, sr = math.cos(theta[0]), math.sin(theta[0])
    cp, sp = math.cos(theta[1]), math.sin(theta[1])
    cy, sy = math.cos(theta[2]), math.sin(theta[2])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    R = rz @ ry @ rx
    dR = np.empty((3, 3, 3))
    dR[0] = rz @ ry @ (_SX @ rx)
    dR[1] = rz @ (_SY @ ry) @ rx
    dR[2] = _SZ @ R
    return R, dR


def check_attitude(theta, guard=DEFAULT_SINGULARITY_GUARD):
    """Raise SingularAttitude when pitch is within `guard` of +-pi/2."""
    if abs(abs(wrap_angle(theta[1])) - 0.5 * math.pi) < guard:
        raise SingularAttitude(
            f"pitch {theta[1]:.4f} rad is within {guard} rad of gimbal lock"
        )


def euler_rate_matrix(theta, guard=DEFAULT_SINGULARITY_GUARD):
    """Map body angular velocity to Euler-angle rates: theta_dot = T @ omega."""
    check_attitude(theta, guard)
    cr, sr = math.cos(theta[0]), math.sin(theta[0])
    cp = math.cos(theta[1])
    tp = math.tan(theta[1])
    return np.array([
        [1.0, sr * tp, cr * tp],
        [0.0, cr, -sr],
        [0.0, sr / cp, cr / cp],
    ])


def euler_rate_matrix_derivatives(theta, guard=DEFAULT_SINGULARITY_GUARD):
    """T and its partial derivatives w.r.t. (roll, pitch); T is yaw-independent.

    Returns (T, dT) with dT of shape (2, 3, 3), dT[0] = dT/droll,
    dT[1] = dT/dpitch.
    """
    check_attitude(theta, guard)
    cr, sr = math.cos(theta[0]), math.sin(theta[0])
    cp = math.cos(theta[1])
    tp = math.tan(theta[1])
    T = np.array([
        [1.0, sr * tp, cr * tp],
        [0.0, cr, -sr],
        [0.0, sr / cp, cr / cp],
    ])
    dT = np.zeros((2, 3, 3))
    dT[0] = np.array([
        [0.0, cr * tp, -sr * tp],
        [0.0, -sr, -cr],
        [0.0, cr / cp, -sr / cp],
    ])
    sec2 = 1.0 / (cp * cp)
    dT[1] = np.array([
        [0.0, sr * sec2, cr * sec2],
        [0.0, 0.0, 0.0],
        [0.0, sr * tp / cp, cr * tp / cp],
    ])
    return T, dT
