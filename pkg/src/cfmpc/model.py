"""Kino-dynamic quadruped model.

The base is a single free-floating rigid body; the four legs contribute full
kinematics but no inertia. State (24): base orientation theta = (roll, pitch,
yaw), CoM world position p, base-frame angular rate omega, base-frame CoM
velocity v, and 12 joint positions q (per leg: hip abduction, hip flexion,
knee). Input (24): four base-frame contact forces followed by 12 joint
velocities. Contact forces and joint velocities are the only inputs; joint
positions integrate the commanded joint velocities directly.

Leg order is LF, RF, LH, RH. omega is the body-frame angular velocity.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import rotations
from .errors import ConfigError
from .rotations import (
    euler_rate_matrix_derivatives,
    rotation_derivatives,
    skew,
)

NX = 24
NU = 24
NUM_LEGS = 4
NUM_SPHERES = 8

# state slices
THETA = slice(0, 3)
POS = slice(3, 6)
OMEGA = slice(6, 9)
LINVEL = slice(9, 12)
JOINTS = slice(12, 24)

# input slices
VJOINT = slice(12, 24)

GRAVITY = 9.81


def force_slice(leg):
    return slice(3 * leg, 3 * leg + 3)


def joint_slice(leg):
    """Slice of the per-leg joints inside the 12-dim joint vector."""
    return slice(3 * leg, 3 * leg + 3)


def state_joint_slice(leg):
    return slice(12 + 3 * leg, 12 + 3 * leg + 3)


def input_vjoint_slice(leg):
    return slice(12 + 3 * leg, 12 + 3 * leg + 3)


@dataclass
class RobotState:
    """Structured view of the 24-dim state vector."""

    theta: np.ndarray
    p: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    q: np.ndarray

    def to_vector(self):
        return np.concatenate([self.theta, self.p, self.omega, self.v, self.q])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (NX,):
            raise ValueError(f"state must have shape ({NX},), got {x.shape}")
        return cls(x[THETA].copy(), x[POS].copy(), x[OMEGA].copy(),
                   x[LINVEL].copy(), x[JOINTS].copy())


@dataclass
class RobotInput:
    """Structured view of the 24-dim input vector."""

    lambda_ee: np.ndarray  # (4, 3) base-frame contact forces [N]
    v_joint: np.ndarray  # (12,) joint velocities [rad/s]

    def to_vector(self):
        return np.concatenate([self.lambda_ee.reshape(12), self.v_joint])

    @classmethod
    def from_vector(cls, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (NU,):
            raise ValueError(f"input must have shape ({NU},), got {u.shape}")
        return cls(u[0:12].reshape(4, 3).copy(), u[VJOINT].copy())


@dataclass
class ModelParams:
    """Physical and geometric parameters of the model.

    Defaults describe a generic 30 kg research quadruped; every field can be
    overridden from a JSON config (see `model_params_from_dict`).
    """

    mass: float = 30.0
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([0.88, 1.85, 1.97]))
    hip_offsets: np.ndarray = field(default_factory=lambda: np.array([
        [0.36, 0.20, 0.0],    # LF
        [0.36, -0.20, 0.0],   # RF
        [-0.36, 0.20, 0.0],   # LH
        [-0.36, -0.20, 0.0],  # RH
    ]))
    thigh_length: float = 0.25
    shank_length: float = 0.33
    q_default: np.ndarray = field(default_factory=lambda: np.array([
        0.0, 0.52, -1.04,
        0.0, 0.52, -1.04,
        0.0, -0.52, 1.04,
        0.0, -0.52, 1.04,
    ]))
    # (offset xyz, radius) pairs: 6 uniform torso spheres on a 2x3 grid plus a
    # front-handle sphere and a rear sensor-cage sphere.
    sphere_offsets: np.ndarray = field(default_factory=lambda: np.array([
        [0.24, 0.10, 0.0],
        [0.24, -0.10, 0.0],
        [0.0, 0.10, 0.0],
        [0.0, -0.10, 0.0],
        [-0.24, 0.10, 0.0],
        [-0.24, -0.10, 0.0],
        [0.42, 0.0, 0.05],
        [-0.42, 0.0, 0.08],
    ]))
    sphere_radii: np.ndarray = field(default_factory=lambda: np.array(
        [0.22, 0.22, 0.22, 0.22, 0.22, 0.22, 0.12, 0.15]))
    joint_limits: np.ndarray = field(default_factory=lambda: np.tile(
        np.array([[-0.6, 0.6], [-1.9, 1.9], [-2.4, 2.4]]), (4, 1)))
    gravity: float = GRAVITY
    singularity_guard: float = rotations.DEFAULT_SINGULARITY_GUARD

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.hip_offsets = np.asarray(self.hip_offsets, dtype=float)
        self.q_default = np.asarray(self.q_default, dtype=float)
        self.sphere_offsets = np.asarray(self.sphere_offsets, dtype=float)
        self.sphere_radii = np.asarray(self.sphere_radii, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        if self.mass <= 0.0:
            raise ConfigError("mass must be positive")
        if not np.allclose(self.inertia, self.inertia.T):
            raise ConfigError("inertia must be symmetric")
        if np.linalg.eigvalsh(self.inertia).min() <= 0.0:
            raise ConfigError("inertia must be positive definite")
        if self.sphere_offsets.shape != (NUM_SPHERES, 3):
            raise ConfigError("sphere decomposition must have 8 entries")
        if np.any(self.sphere_radii <= 0.0):
            raise ConfigError("sphere radii must be positive")
        self.inertia_inv = np.linalg.inv(self.inertia)
        # flat python-float copies for the scalar dynamics fast path
        self._inertia_flat = tuple(self.inertia.ravel())
        self._inertia_inv_flat = tuple(self.inertia_inv.ravel())
        self._hips_flat = tuple(tuple(h) for h in self.hip_offsets)

    @property
    def nominal_height(self):
        """Standing CoM height implied by the default joint configuration."""
        r = leg_forward_kinematics(self, 0, self.q_default[0:3])[0]
        return -float(r[2] - self.hip_offsets[0, 2])

    def torso_top_height(self):
        """Height of the highest collision-sphere surface when standing."""
        tops = self.sphere_offsets[:, 2] + self.sphere_radii
        return self.nominal_height + float(tops.max())

    def half_width(self):
        """Lateral half extent of the sphere footprint."""
        return float(np.max(np.abs(self.sphere_offsets[:, 1]) + self.sphere_radii))


def leg_forward_kinematics(params, leg, q_leg, with_hessian=False):
    """Foot position of one leg in the base frame, relative to the CoM.

    Returns (r, J) or (r, J, H) where J = dr/dq_leg (3x3) and
    H[a, i, j] = d2 r_a / dq_i dq_j (3x3x3).
    """
    lt, ls = params.thigh_length, params.shank_length
    q1, q2, q3 = q_leg
    s1, c1 = math.sin(q1), math.cos(q1)
    s2, c2 = math.sin(q2), math.cos(q2)
    q23 = q2 + q3
    s23, c23 = math.sin(q23), math.cos(q23)

    wx = -lt * s2 - ls * s23
    wz = -lt * c2 - ls * c23

    r = params.hip_offsets[leg] + np.array([wx, -s1 * wz, c1 * wz])

    J = np.array([
        [0.0, wz, -ls * c23],
        [-c1 * wz, s1 * wx, -s1 * ls * s23],
        [-s1 * wz, -c1 * wx, c1 * ls * s23],
    ])
    if not with_hessian:
        return r, J

    H = np.zeros((3, 3, 3))
    # d2r/dq1^2
    H[:, 0, 0] = [0.0, s1 * wz, -c1 * wz]
    # d2r/dq1 dq2
    H[:, 0, 1] = H[:, 1, 0] = [0.0, c1 * wx, s1 * wx]
    # d2r/dq1 dq3
    H[:, 0, 2] = H[:, 2, 0] = [0.0, -c1 * ls * s23, -s1 * ls * s23]
    # d2r/dq2^2
    H[:, 1, 1] = [-wx, s1 * wz, -c1 * wz]
    # d2r/dq2 dq3 and d2r/dq3^2 coincide (q3 enters only through q2+q3)
    d23 = np.array([ls * s23, -s1 * ls * c23, c1 * ls * c23])
    H[:, 1, 2] = H[:, 2, 1] = d23
    H[:, 2, 2] = d23
    return r, J, H


def foot_positions_body(params, q):
    """Base-frame foot positions relative to the CoM for all legs: (4, 3)."""
    out = np.empty((4, 3))
    for leg in range(NUM_LEGS):
        out[leg] = leg_forward_kinematics(params, leg, q[joint_slice(leg)])[0]
    return out


def dynamics(x, u, params):
    """State derivative of the kino-dynamic model.

    Hand-rolled scalar math: this is the rollout integrator's inner loop and
    runs tens of thousands of times per MPC cycle.
    """
    roll, pitch = x[0], x[1]
    if abs(abs(rotations.wrap_angle(pitch)) - 0.5 * math.pi) \
            < params.singularity_guard:
        rotations.check_attitude(x[THETA], params.singularity_guard)
    yaw = x[2]
    wx, wy, wz = x[6], x[7], x[8]
    vx, vy, vz = x[9], x[10], x[11]

    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)

    # R = Rz(yaw) Ry(pitch) Rx(roll), row major
    r00 = cy * cp
    r01 = cy * sp * sr - sy * cr
    r02 = cy * sp * cr + sy * sr
    r10 = sy * cp
    r11 = sy * sp * sr + cy * cr
    r12 = sy * sp * cr - cy * sr
    r20 = -sp
    r21 = cp * sr
    r22 = cp * cr

    tp = sp / cp
    lt, ls = params.thigh_length, params.shank_length
    i00, i01, i02, i10, i11, i12, i20, i21, i22 = params._inertia_flat
    Iw0 = i00 * wx + i01 * wy + i02 * wz
    Iw1 = i10 * wx + i11 * wy + i12 * wz
    Iw2 = i20 * wx + i21 * wy + i22 * wz
    # torque = -w x Iw + sum r_i x lam_i
    tq0 = -(wy * Iw2 - wz * Iw1)
    tq1 = -(wz * Iw0 - wx * Iw2)
    tq2 = -(wx * Iw1 - wy * Iw0)
    f0 = f1 = f2 = 0.0
    for leg in range(4):
        b = 12 + 3 * leg
        q1 = x[b]
        q2 = x[b + 1]
        s1, c1 = math.sin(q1), math.cos(q1)
        s2, c2 = math.sin(q2), math.cos(q2)
        q23 = q2 + x[b + 2]
        s23, c23 = math.sin(q23), math.cos(q23)
        wx_l = -lt * s2 - ls * s23
        wz_l = -lt * c2 - ls * c23
        hip = params._hips_flat[leg]
        rx = hip[0] + wx_l
        ry = hip[1] - s1 * wz_l
        rz = hip[2] + c1 * wz_l
        lx, ly, lz = u[3 * leg], u[3 * leg + 1], u[3 * leg + 2]
        tq0 += ry * lz - rz * ly
        tq1 += rz * lx - rx * lz
        tq2 += rx * ly - ry * lx
        f0 += lx
        f1 += ly
        f2 += lz

    dx = np.empty(NX)
    # theta_dot = T(theta) omega
    dx[0] = wx + (sr * wy + cr * wz) * tp
    dx[1] = cr * wy - sr * wz
    dx[2] = (sr * wy + cr * wz) / cp
    # p_dot = R v
    dx[3] = r00 * vx + r01 * vy + r02 * vz
    dx[4] = r10 * vx + r11 * vy + r12 * vz
    dx[5] = r20 * vx + r21 * vy + r22 * vz
    # omega_dot = I^-1 torque
    j00, j01, j02, j10, j11, j12, j20, j21, j22 = params._inertia_inv_flat
    dx[6] = j00 * tq0 + j01 * tq1 + j02 * tq2
    dx[7] = j10 * tq0 + j11 * tq1 + j12 * tq2
    dx[8] = j20 * tq0 + j21 * tq1 + j22 * tq2
    # v_dot = R^T g_world + sum(lam) / m
    g = params.gravity
    m = params.mass
    dx[9] = -r20 * g + f0 / m
    dx[10] = -r21 * g + f1 / m
    dx[11] = -r22 * g + f2 / m
    dx[JOINTS] = u[VJOINT]
    return dx


def dynamics_jacobians(x, u, params, mode="analytic"):
    """Jacobians (A, B) of the dynamics w.r.t. state and input.

    `mode="fd"` is a central finite-difference fallback kept for debugging;
    tests use their own finite differences as the oracle.
    """
    if mode == "fd":
        return _dynamics_jacobians_fd(x, u, params)

    theta = x[THETA]
    omega = x[OMEGA]
    v = x[LINVEL]
    q = x[JOINTS]
    lam = u[0:12].reshape(4, 3)
    I, I_inv = params.inertia, params.inertia_inv

    T, dT = euler_rate_matrix_derivatives(theta, params.singularity_guard)
    R, dR = rotation_derivatives(theta)
    g_world = np.array([0.0, 0.0, -params.gravity])

    A = np.zeros((NX, NX))
    B = np.zeros((NX, NU))

    # theta_dot = T(theta) omega
    A[THETA, 0] = dT[0] @ omega
    A[THETA, 1] = dT[1] @ omega
    A[0:3, 6:9] = T

    # p_dot = R v
    for k in range(3):
        A[POS, k] = dR[k] @ v
    A[3:6, 9:12] = R

    # omega_dot
    A[6:9, 6:9] = I_inv @ (skew(I @ omega) - skew(omega) @ I)
    for leg in range(NUM_LEGS):
        r, J = leg_forward_kinematics(params, leg, q[joint_slice(leg)])
        A[6:9, state_joint_slice(leg)] = I_inv @ (-skew(lam[leg]) @ J)
        B[6:9, force_slice(leg)] = I_inv @ skew(r)
        B[9:12, force_slice(leg)] = np.eye(3) / params.mass

    # v_dot
    for k in range(3):
        A[LINVEL, k] = dR[k].T @ g_world

    # q_dot = v_joint
    B[12:24, 12:24] = np.eye(12)
    return A, B


def _dynamics_jacobians_fd(x, u, params, h=1e-6):
    A = np.empty((NX, NX))
    B = np.empty((NX, NU))
    for i in range(NX):
        e = np.zeros(NX)
        e[i] = h
        A[:, i] = (dynamics(x + e, u, params) - dynamics(x - e, u, params)) / (2 * h)
    for i in range(NU):
        e = np.zeros(NU)
        e[i] = h
        B[:, i] = (dynamics(x, u + e, params) - dynamics(x, u - e, params)) / (2 * h)
    return A, B


@dataclass
class FootKinematics:
    """World-frame foot position/velocity and their derivatives."""

    pos: np.ndarray       # (3,) world frame
    vel: np.ndarray       # (3,) world frame
    dpos_dx: np.ndarray   # (3, 24)
    dvel_dx: np.ndarray   # (3, 24)
    dvel_du: np.ndarray   # (3, 24)


def foot_kinematics(x, u, leg, params):
    """World-frame foot position, velocity, and Jacobians for one leg."""
    theta = x[THETA]
    p = x[POS]
    omega = x[OMEGA]
    v = x[LINVEL]
    q_leg = x[state_joint_slice(leg)]
    vj = u[input_vjoint_slice(leg)]

    R, dR = rotation_derivatives(theta)
    r, J, H = leg_forward_kinematics(params, leg, q_leg, with_hessian=True)

    wxr = np.array([omega[1] * r[2] - omega[2] * r[1],
                    omega[2] * r[0] - omega[0] * r[2],
                    omega[0] * r[1] - omega[1] * r[0]])
    vel_body = v + wxr + J @ vj
    pos = p + R @ r
    vel = R @ vel_body

    dpos_dx = np.zeros((3, NX))
    dvel_dx = np.zeros((3, NX))
    dvel_du = np.zeros((3, NU))

    for k in range(3):
        dpos_dx[:, k] = dR[k] @ r
        dvel_dx[:, k] = dR[k] @ vel_body
    dpos_dx[:, POS] = np.eye(3)
    dpos_dx[:, state_joint_slice(leg)] = R @ J

    dvel_dx[:, OMEGA] = -R @ skew(r)
    dvel_dx[:, LINVEL] = R
    # d/dq of (omega x r + J vj): cross term through J, plus the bending of J
    dJv = np.einsum("aij,i->aj", H, vj)
    dvel_dx[:, state_joint_slice(leg)] = R @ (skew(omega) @ J + dJv)

    dvel_du[:, input_vjoint_slice(leg)] = R @ J
    return FootKinematics(pos, vel, dpos_dx, dvel_dx, dvel_du)


def project_input(x, u, contacts, swing_targets, params):
    """Project joint velocities onto the contact-constraint manifold.

    The mode equalities are affine in the input, so the projection is exact:
    stance legs get the unique joint velocity that pins the foot
    (v + w x r + J vj = 0 in the base frame); swing legs get zero force and
    the minimal-norm joint-velocity correction tracking the vertical profile
    v_ee . z = c(t). Scalar math: runs inside the rollout integrator.
    """
    u = u.copy()
    roll, pitch, yaw = x[0], x[1], x[2]
    wx, wy, wz = x[6], x[7], x[8]
    vx, vy, vz = x[9], x[10], x[11]
    lt, ls = params.thigh_length, params.shank_length
    # third row of R(theta): transforms base vectors to the world z component
    sr, cr = math.sin(roll), math.cos(roll)
    sp, cp = math.sin(pitch), math.cos(pitch)
    zr0, zr1, zr2 = -sp, cp * sr, cp * cr

    for leg in range(4):
        b = 12 + 3 * leg
        q1 = x[b]
        q2 = x[b + 1]
        s1, c1 = math.sin(q1), math.cos(q1)
        s2, c2 = math.sin(q2), math.cos(q2)
        q23 = q2 + x[b + 2]
        s23, c23 = math.sin(q23), math.cos(q23)
        wxl = -lt * s2 - ls * s23
        wzl = -lt * c2 - ls * c23
        hip = params._hips_flat[leg]
        rx = hip[0] + wxl
        ry = hip[1] - s1 * wzl
        rz = hip[2] + c1 * wzl
        # drift = v + w x r (base frame)
        d0 = vx + wy * rz - wz * ry
        d1 = vy + wz * rx - wx * rz
        d2 = vz + wx * ry - wy * rx
        # J columns (base frame)
        j00, j01, j02 = 0.0, wzl, -ls * c23
        j10, j11, j12 = -c1 * wzl, s1 * wxl, -s1 * ls * s23
        j20, j21, j22 = -s1 * wzl, -c1 * wxl, c1 * ls * s23
        if contacts[leg]:
            # vj = -J^{-1} d  (closed-form 3x3 inverse)
            det = (j00 * (j11 * j22 - j12 * j21)
                   - j01 * (j10 * j22 - j12 * j20)
                   + j02 * (j10 * j21 - j11 * j20))
            if abs(det) < 1e-9:
                continue  # singular leg: leave the commanded velocity
            a00 = j11 * j22 - j12 * j21
            a01 = j02 * j21 - j01 * j22
            a02 = j01 * j12 - j02 * j11
            a10 = j12 * j20 - j10 * j22
            a11 = j00 * j22 - j02 * j20
            a12 = j02 * j10 - j00 * j12
            a20 = j10 * j21 - j11 * j20
            a21 = j01 * j20 - j00 * j21
            a22 = j00 * j11 - j01 * j10
            u[b] = -(a00 * d0 + a01 * d1 + a02 * d2) / det
            u[b + 1] = -(a10 * d0 + a11 * d1 + a12 * d2) / det
            u[b + 2] = -(a20 * d0 + a21 * d1 + a22 * d2) / det
        else:
            u[3 * leg] = 0.0
            u[3 * leg + 1] = 0.0
            u[3 * leg + 2] = 0.0
            # world-z velocity row: a = z_row(R) @ J, drift_z = z_row(R) @ d
            a0 = zr0 * j00 + zr1 * j10 + zr2 * j20
            a1 = zr0 * j01 + zr1 * j11 + zr2 * j21
            a2 = zr0 * j02 + zr1 * j12 + zr2 * j22
            dz = zr0 * d0 + zr1 * d1 + zr2 * d2
            vj0, vj1, vj2 = u[b], u[b + 1], u[b + 2]
            resid = dz + a0 * vj0 + a1 * vj1 + a2 * vj2 - swing_targets[leg]
            nrm2 = a0 * a0 + a1 * a1 + a2 * a2
            if nrm2 > 1e-12:
                scale = resid / nrm2
                u[b] = vj0 - a0 * scale
                u[b + 1] = vj1 - a1 * scale
                u[b + 2] = vj2 - a2 * scale
    return u


def sphere_centers(x, params):
    """World-frame collision-sphere centers and their Jacobians.

    Returns (centers, dc_dtheta) with centers (8, 3) and
    dc_dtheta[s, :, k] = d center_s / d theta_k. The Jacobian w.r.t. p is the
    identity for every sphere; joint positions do not move the torso spheres.
    """
    theta = x[THETA]
    p = x[POS]
    R, dR = rotation_derivatives(theta)
    offs = params.sphere_offsets
    centers = p[None, :] + offs @ R.T
    dc_dtheta = np.empty((NUM_SPHERES, 3, 3))
    for k in range(3):
        dc_dtheta[:, :, k] = offs @ dR[k].T
    return centers, dc_dtheta


def check_joint_limits(q, params):
    """Indices of joints outside their configured limits (empty = all good)."""
    lo = params.joint_limits[:, 0]
    hi = params.joint_limits[:, 1]
    return np.where((q < lo) | (q > hi))[0]


def standing_state(params, x=0.0, y=0.0, yaw=0.0):
    """Default stance: level base at nominal height, default joints, at rest."""
    s = np.zeros(NX)
    s[2] = yaw
    s[POS] = [x, y, params.nominal_height]
    s[JOINTS] = params.q_default
    return s


def stance_input(params, contacts):
    """Statically stabilizing input: gravity split over the stance legs along
    the surface normal, zero joint velocities."""
    u = np.zeros(NU)
    n_stance = int(np.sum(contacts))
    if n_stance > 0:
        fz = params.mass * params.gravity / n_stance
        for leg in range(NUM_LEGS):
            if contacts[leg]:
                u[3 * leg + 2] = fz
    return u


def model_params_from_dict(d):
    """Build ModelParams from a plain dict (JSON config).

    Recognized keys (all optional): mass, inertia_diag or inertia,
    hip_offsets, thigh_length, shank_length, q_default, spheres (list of
    {offset, radius}), joint_limits, gravity.
    """
    kwargs = {}
    if "mass" in d:
        kwargs["mass"] = float(d["mass"])
    if "inertia_diag" in d:
        kwargs["inertia"] = np.diag(np.asarray(d["inertia_diag"], dtype=float))
    elif "inertia" in d:
        kwargs["inertia"] = np.asarray(d["inertia"], dtype=float)
    if "hip_offsets" in d:
        kwargs["hip_offsets"] = np.asarray(d["hip_offsets"], dtype=float)
    for key in ("thigh_length", "shank_length", "gravity"):
        if key in d:
            kwargs[key] = float(d[key])
    if "q_default" in d:
        kwargs["q_default"] = np.asarray(d["q_default"], dtype=float)
    if "spheres" in d:
        try:
            offs = np.array([s["offset"] for s in d["spheres"]], dtype=float)
            radii = np.array([s["radius"] for s in d["spheres"]], dtype=float)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad sphere entry: {exc}") from exc
        kwargs["sphere_offsets"] = offs
        kwargs["sphere_radii"] = radii
    if "joint_limits" in d:
        kwargs["joint_limits"] = np.asarray(d["joint_limits"], dtype=float)
    try:
        return ModelParams(**kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"invalid model config: {exc}") from exc


def load_model_params(path):
    with open(path) as f:
        return model_params_from_dict(json.load(f))
