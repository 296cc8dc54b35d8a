"""Optimal-control-problem assembly for one MPC solve.

Brings together the quadratic tracking cost with its clipped position error,
the collision penalty, relaxed friction-cone barriers for stance legs, the
contact-mode equality constraints, and the reference built from the user's
velocity command. `OcpProblem` is the bundle the solver consumes; it is a
pure evaluator over immutable inputs and one frozen collision snapshot.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import collision as col
from . import model as mdl
from .errors import CommandOutOfRange, ConfigError
from .gait import swing_reference
from .rotations import wrap_angle

DEFAULT_CLIP_RADIUS = 0.15
DEFAULT_HORIZON = 1.0
DEFAULT_CMD_LIMITS = (1.0, 1.0, 1.0)  # |vx|, |vy| [m/s], |yaw rate| [rad/s]

MU_FRICTION = 0.7


def default_state_weights():
    # pole budget ~20 rad/s with the default input weights: fast enough for a
    # 20 Hz loop, mild enough for the explicit rollout integrator; position
    # pull is capped by the error clip, obstacle response comes from the
    # penalty scaling rather than stiff tracking
    return np.concatenate([
        [40.0, 40.0, 100.0],     # roll, pitch, yaw
        [150.0, 150.0, 220.0],   # CoM position
        [4.0, 4.0, 8.0],         # angular rate
        [20.0, 20.0, 20.0],      # linear velocity
        np.full(12, 4.0),        # joints
    ])


def default_input_weights():
    return np.concatenate([np.full(12, 2e-2), np.full(12, 0.1)])


@dataclass(frozen=True)
class FrictionParams:
    """Relaxed log-barrier on the friction cone of stance-leg forces.

    The relaxation margin is generous (2 N): the touchdown node of a fresh
    stance phase legitimately carries near-zero force, and a sharp extension
    there makes the quadratic cost model worthless to the line search.
    """

    mu_c: float = MU_FRICTION
    delta: float = 0.1    # [N] cone-tip smoothing
    relax: float = 2.0    # [N] switch to the quadratic extension below this
    # small weight: the barrier only has to win near the cone boundary, and
    # its -1/h gradient otherwise biases the normal forces upward
    weight: float = 0.2


@dataclass
class CostParams:
    Q: np.ndarray = field(default_factory=lambda: np.diag(default_state_weights()))
    R: np.ndarray = field(default_factory=lambda: np.diag(default_input_weights()))
    clip_radius: float = DEFAULT_CLIP_RADIUS
    penalty: col.PenaltyParams = field(default_factory=col.PenaltyParams)
    friction: FrictionParams = field(default_factory=FrictionParams)
    horizon: float = DEFAULT_HORIZON
    # terminal cost 0.5 |x - x_d|^2 on (terminal_weight * Q): anchors the
    # receding tail, which otherwise gets exploited as cost-free
    terminal_weight: float = 2.0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T)).min() < -1e-12:
            raise ConfigError("Q must be positive semi-definite")
        if np.linalg.eigvalsh(0.5 * (self.R + self.R.T)).min() <= 0.0:
            raise ConfigError("R must be positive definite")
        if self.clip_radius <= 0.0:
            raise ConfigError("clip radius must be positive")
        if self.terminal_weight < 0.0:
            raise ConfigError("terminal weight must be non-negative")


@dataclass
class ReferenceTrajectory:
    """Desired states over one horizon: command integrated from the start
    pose, nominal standing height, default joints, zero residual rates."""

    t0: float
    start_xy: np.ndarray
    start_yaw: float
    cmd: np.ndarray             # (vx, vy, yaw_rate), heading frame
    height: float
    q_default: np.ndarray
    horizon: float = DEFAULT_HORIZON
    clip_radius: float = DEFAULT_CLIP_RADIUS

    def desired_planar(self, t):
        """Planar pose (x, y, yaw) at time t (exact constant-twist arc)."""
        tau = t - self.t0
        vx, vy, wz = self.cmd
        yaw0 = self.start_yaw
        yaw = yaw0 + wz * tau
        if abs(wz) < 1e-9:
            c, s = math.cos(yaw0), math.sin(yaw0)
            dx = (c * vx - s * vy) * tau
            dy = (s * vx + c * vy) * tau
        else:
            dx = (vx * (math.sin(yaw) - math.sin(yaw0))
                  + vy * (math.cos(yaw) - math.cos(yaw0))) / wz
            dy = (-vx * (math.cos(yaw) - math.cos(yaw0))
                  + vy * (math.sin(yaw) - math.sin(yaw0))) / wz
        return np.array([self.start_xy[0] + dx, self.start_xy[1] + dy, yaw])

    def desired_state(self, t):
        x_d = np.zeros(mdl.NX)
        planar = self.desired_planar(t)
        x_d[2] = planar[2]
        x_d[mdl.POS] = [planar[0], planar[1], self.height]
        x_d[8] = self.cmd[2]                       # body yaw rate
        x_d[9:11] = self.cmd[0:2]                  # body-frame velocity
        x_d[mdl.JOINTS] = self.q_default
        return x_d

    def effective_target(self, t, p_eval):
        """Desired state with the position target pulled onto the clip sphere.

        When the evaluated position is farther than clip_radius from the raw
        target, the target moves onto the sphere of that radius around the
        evaluated position, which caps the tracking pull at a constant
        magnitude instead of yanking the robot back onto the commanded path.
        """
        x_d = self.desired_state(t)
        e_p = np.asarray(p_eval, dtype=float) - x_d[mdl.POS]
        n = float(np.linalg.norm(e_p))
        if n > self.clip_radius:
            x_d[mdl.POS] = p_eval - e_p * (self.clip_radius / n)
        return x_d


def reference_from_command(x_s, cmd, horizon, params,
                           limits=DEFAULT_CMD_LIMITS,
                           clip_radius=DEFAULT_CLIP_RADIUS, t0=0.0):
    """Reference over [t0, t0 + horizon] from the latest planar twist."""
    cmd = np.asarray(cmd, dtype=float)
    if abs(cmd[0]) > limits[0] + 1e-12 or abs(cmd[1]) > limits[1] + 1e-12 \
            or abs(cmd[2]) > limits[2] + 1e-12:
        raise CommandOutOfRange(f"twist {cmd.tolist()} exceeds limits {limits}")
    return ReferenceTrajectory(
        t0=t0,
        start_xy=x_s[mdl.POS][0:2].copy(),
        start_yaw=float(x_s[2]),
        cmd=cmd,
        height=params.nominal_height,
        q_default=params.q_default.copy(),
        horizon=horizon,
        clip_radius=clip_radius,
    )


def tracking_error(x, x_d):
    """State error with the yaw component wrapped to (-pi, pi]."""
    e = x - x_d
    e[2] = wrap_angle(e[2])
    e[0] = wrap_angle(e[0])
    return e


def friction_cone_penalty(lam, friction=FrictionParams()):
    """Relaxed log-barrier on h = mu_c lam_z - sqrt(lam_x^2 + lam_y^2 + delta^2).

    Above the relaxation margin the barrier is -ln(h); below it a quadratic
    extension keeps it defined (and steep) for infeasible forces, spliced
    continuously differentiably. Returns (value, gradient, GN Hessian) w.r.t.
    the 3 force components; the Hessian keeps the PSD outer-product term.
    """
    s = math.sqrt(lam[0] ** 2 + lam[1] ** 2 + friction.delta ** 2)
    h = friction.mu_c * lam[2] - s
    dh = np.array([-lam[0] / s, -lam[1] / s, friction.mu_c])

    drel = friction.relax
    if h > drel:
        value = -math.log(h)
        b1 = -1.0 / h
        b2 = 1.0 / (h * h)
    else:
        z = (h - 2.0 * drel) / drel
        value = 0.5 * (z * z - 1.0) - math.log(drel)
        b1 = z / drel
        b2 = 1.0 / (drel * drel)

    w = friction.weight
    grad = w * b1 * dh
    hess = w * b2 * np.outer(dh, dh)
    return w * value, grad, hess


def cone_margin(lam, mu_c=MU_FRICTION):
    """mu_c lam_z - |lam_xy|; positive strictly inside the friction cone."""
    return mu_c * lam[2] - math.hypot(lam[0], lam[1])


def stage_cost(x, u, t, ref, costs, snap, params, schedule,
               include_barrier=False):
    """Augmented running cost: value, gradients, and GN Hessian blocks.

    Tracking uses the clip-retargeted reference; the collision penalty adds
    its Gauss-Newton state Hessian. Returns (value, q, r, Qxx, Ruu) where q/r
    are the gradients w.r.t. state/input. The friction barrier is added only
    with include_barrier=True (the solver wants it; the bare stage cost per
    the module contract stays non-negative without it).
    """
    x_d = ref.effective_target(t, x[mdl.POS])
    e = tracking_error(x, x_d)
    contacts = schedule.contacts_at(t)
    u0 = mdl.stance_input(params, contacts)
    du = u - u0

    Qxx = costs.Q.copy()
    Ruu = costs.R.copy()
    value = 0.5 * float(e @ costs.Q @ e) + 0.5 * float(du @ costs.R @ du)
    q = costs.Q @ e
    r = costs.R @ du

    if snap is not None and costs.penalty.mu > 0.0:
        pv, pg, ph = col.penalty_value_grad_hess(snap, x, t, costs.penalty, params)
        value += pv
        q = q + pg
        Qxx = Qxx + ph

    if include_barrier:
        for leg in range(mdl.NUM_LEGS):
            if contacts[leg]:
                sl = mdl.force_slice(leg)
                bv, bg, bh = friction_cone_penalty(u[sl], costs.friction)
                value += bv
                r[sl] += bg
                Ruu[sl, sl] += bh
    return value, q, r, Qxx, Ruu


def equality_constraints(x, u, t, schedule, params, gait=None, feet=None):
    """Mode constraints: residuals e and Jacobians (C, D) w.r.t. (x, u).

    Stance leg: 3 rows, world foot velocity = 0 (forces stay free).
    Swing leg: 3 rows pinning the contact force to zero, then 1 row tracking
    the vertical swing profile, v_ee . z = c(t). Flat ground: normal = z.
    Returns (e, C, D, rows) with rows = per-row (leg, kind) labels.
    """
    gait = gait if gait is not None else schedule.gait
    contacts = schedule.contacts_at(t)
    if feet is None:
        feet = [mdl.foot_kinematics(x, u, leg, params)
                for leg in range(mdl.NUM_LEGS)]

    e_rows, c_rows, d_rows, labels = [], [], [], []
    for leg in range(mdl.NUM_LEGS):
        fk = feet[leg]
        if contacts[leg]:
            e_rows.append(fk.vel)
            c_rows.append(fk.dvel_dx)
            d_rows.append(fk.dvel_du)
            labels.extend((leg, "stance_velocity") for _ in range(3))
        else:
            sl = mdl.force_slice(leg)
            e_rows.append(u[sl])
            cz = np.zeros((3, mdl.NX))
            dz = np.zeros((3, mdl.NU))
            dz[:, sl] = np.eye(3)
            c_rows.append(cz)
            d_rows.append(dz)
            labels.extend((leg, "swing_force") for _ in range(3))

            phase, _ = schedule.swing_phase(leg, t)
            c_t = swing_reference(phase, gait)
            e_rows.append(np.array([fk.vel[2] - c_t]))
            c_rows.append(fk.dvel_dx[2:3])
            d_rows.append(fk.dvel_du[2:3])
            labels.append((leg, "swing_height"))

    e = np.concatenate(e_rows)
    C = np.vstack(c_rows)
    D = np.vstack(d_rows)
    return e, C, D, labels


@dataclass
class LqNode:
    """Linear-quadratic data of one trajectory node."""

    t: float
    x: np.ndarray
    u: np.ndarray
    A: np.ndarray
    B: np.ndarray
    cost: float
    q: np.ndarray
    r: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    e: np.ndarray
    C: np.ndarray
    D: np.ndarray


class OcpProblem:
    """Everything one SLQ solve needs, frozen for the iteration.

    Collision-penalty evaluation time is accumulated in `penalty_eval_s` so
    the benchmark can report how much of the solve the perceptive terms cost.
    """

    #: rollouts apply the exact input projection, so equality residuals of
    #: rolled-out trajectories vanish identically and the merit skips them
    constraints_exact_in_rollout = True

    def __init__(self, params, costs, schedule, reference, snapshot):
        self.params = params
        self.costs = costs
        self.schedule = schedule
        self.reference = reference
        self.snapshot = snapshot
        self.penalty_eval_s = 0.0

    # -- dynamics ---------------------------------------------------------
    def dynamics(self, t, x, u):
        return mdl.dynamics(x, self.input_mask(t, u), self.params)

    def switch_times(self, t0, t1):
        return self.schedule.switches_in(t0, t1)

    @property
    def feedback_limit(self):
        """Saturation of the policy's feedback correction: +-80 N per force
        component, +-4 rad/s per joint velocity. Keeps the loop gain finite
        when the state drifts far from the plan's nominal."""
        return np.concatenate([np.full(12, 80.0), np.full(12, 4.0)])

    def interpolation_holds(self, times):
        """Segments whose end node starts a new contact mode (feedforward
        interpolation across them is invalid)."""
        contacts = [self.schedule.contacts_at(t) for t in times]
        return np.array([contacts[i] != contacts[i + 1]
                         for i in range(len(times) - 1)])

    def equilibrium_input(self, t):
        return mdl.stance_input(self.params,
                                self.schedule.contacts_at(t))

    def input_mask(self, t, u):
        """Zero the contact forces of swing legs (mode-consistent input)."""
        return self._mask_for(self.schedule.contacts_at(t), u)

    @staticmethod
    def _mask_for(contacts, u):
        if all(contacts):
            return u
        u = u.copy()
        for leg in range(mdl.NUM_LEGS):
            if not contacts[leg]:
                u[mdl.force_slice(leg)] = 0.0
        return u

    def _swing_windows(self, t, contacts):
        """Per-leg (start, duration) of the active swing phase, stance -> None."""
        windows = [None] * mdl.NUM_LEGS
        for leg in range(mdl.NUM_LEGS):
            if not contacts[leg]:
                phase, dur = self.schedule.swing_phase(leg, t)
                windows[leg] = (t - phase * dur, dur)
        return windows

    def _swing_targets(self, t, contacts, windows):
        gait = self.schedule.gait
        targets = [0.0] * mdl.NUM_LEGS
        for leg in range(mdl.NUM_LEGS):
            if not contacts[leg]:
                t0, dur = windows[leg]
                targets[leg] = swing_reference((t - t0) / dur, gait)
        return targets

    def apply_input(self, t, x, u):
        """Mode-consistent applied input: swing forces zeroed and joint
        velocities projected exactly onto the contact equality manifold."""
        contacts = self.schedule.contacts_at(t)
        windows = self._swing_windows(t, contacts)
        targets = self._swing_targets(t, contacts, windows)
        return mdl.project_input(x, u, contacts, targets, self.params)

    def segment_dynamics(self, t_mid):
        """Projected dynamics with the contact mode frozen to the segment
        containing t_mid; integration segments never straddle a switch, but
        their endpoint evaluations would otherwise sample the next mode."""
        contacts = self.schedule.contacts_at(t_mid)
        windows = self._swing_windows(t_mid, contacts)
        params = self.params
        targets = self._swing_targets

        def f(t, x, u):
            tg = targets(t, contacts, windows)
            return mdl.dynamics(x, mdl.project_input(x, u, contacts, tg, params),
                                params)

        return f

    # -- costs ------------------------------------------------------------
    def cost(self, t, x, u):
        """Full augmented running cost (tracking + penalty + barriers)."""
        value, _, _, _, _ = stage_cost(
            x, u, t, self.reference, self.costs, None, self.params,
            self.schedule, include_barrier=True)
        return value + self.penalty(t, x)

    def penalty(self, t, x):
        if self.snapshot is None or self.costs.penalty.mu == 0.0:
            return 0.0
        tic = time.perf_counter()
        v = col.penalty_value(self.snapshot, x, t, self.costs.penalty, self.params)
        self.penalty_eval_s += time.perf_counter() - tic
        return v

    # -- node linearization -------------------------------------------------
    def linearize_node(self, t, x, u):
        u = self.apply_input(t, x, u)
        feet = [mdl.foot_kinematics(x, u, leg, self.params)
                for leg in range(mdl.NUM_LEGS)]
        A, B = mdl.dynamics_jacobians(x, u, self.params)

        x_d = self.reference.effective_target(t, x[mdl.POS])
        e_x = tracking_error(x, x_d)
        contacts = self.schedule.contacts_at(t)
        u0 = mdl.stance_input(self.params, contacts)
        du = u - u0

        Qxx = self.costs.Q.copy()
        Ruu = self.costs.R.copy()
        value = 0.5 * float(e_x @ self.costs.Q @ e_x) \
            + 0.5 * float(du @ self.costs.R @ du)
        q = self.costs.Q @ e_x
        r = self.costs.R @ du

        if self.snapshot is not None and self.costs.penalty.mu > 0.0:
            tic = time.perf_counter()
            pv, pg, ph = col.penalty_value_grad_hess(
                self.snapshot, x, t, self.costs.penalty, self.params)
            self.penalty_eval_s += time.perf_counter() - tic
            value += pv
            q = q + pg
            Qxx = Qxx + ph

        for leg in range(mdl.NUM_LEGS):
            if contacts[leg]:
                sl = mdl.force_slice(leg)
                bv, bg, bh = friction_cone_penalty(u[sl], self.costs.friction)
                value += bv
                r[sl] += bg
                Ruu[sl.start:sl.stop, sl.start:sl.stop] += bh

        e, C, D, _ = equality_constraints(x, u, t, self.schedule, self.params,
                                          feet=feet)
        return LqNode(t=t, x=x, u=u, A=A, B=B, cost=value, q=q, r=r,
                      Q=Qxx, R=Ruu, e=e, C=C, D=D)

    def constraint_residual(self, t, x, u):
        """Equality residual of the raw (mode-masked, un-projected) input."""
        e, _, _, _ = equality_constraints(x, self.input_mask(t, u), t,
                                          self.schedule, self.params)
        return e

    def terminal_quadratics(self, t, x):
        """Terminal cost value, gradient, and Hessian at the horizon end."""
        Qf = self.costs.terminal_weight * self.costs.Q
        x_d = self.reference.effective_target(t, x[mdl.POS])
        e = tracking_error(x, x_d)
        return 0.5 * float(e @ Qf @ e), Qf @ e, Qf
