"""Continuous-time SLQ solver and the real-time-iteration MPC wrapper.

One SLQ iteration: roll out the current affine policy with an adaptive-step
integrator, build linear-quadratic data at the trajectory nodes, eliminate
the mode equality constraints by projecting the input onto their nullspace,
integrate the Riccati equation backward through the projected LQ problem,
and line-search the feedforward update against a merit that combines the
augmented cost with a quadratic penalty on constraint residuals.

The MPC wrapper performs exactly one such iteration per control cycle,
warm-started by shifting the previous solution; an offline mode iterates to
convergence for tests.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    IntegrationDiverged,
    RankDeficientConstraint,
    RiccatiDiverged,
    SingularAttitude,
)
from .integrators import integrate

NX = 24  # quadruped dims; generic problems carry their own nx/nu


@dataclass
class SolverSettings:
    nodes: int = 50
    rollout_rtol: float = 1e-6
    rollout_atol: float = 1e-6
    riccati_rtol: float = 1e-6
    riccati_atol: float = 1e-8
    line_search_steps: tuple = (1.0, 0.5, 0.25, 0.125)
    max_iterations: int = 1           # per MPC cycle (real-time iteration)
    cold_start_iterations: int = 8
    convergence_cost_tol: float = 1e-9
    merit_constraint_weight: float = 1e3
    max_state_norm: float = 1e4
    cost_integration: str = "trapezoid"   # "trapezoid" | "ode"
    constraint_rank_tol: float = 1e-8

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("need at least 2 trajectory nodes")
        if self.rollout_rtol <= 0.0 or self.riccati_rtol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class FeedbackPolicy:
    """Time-indexed affine policy u = u_ff(t) + K(t) (x - x_nom(t)).

    u_ff and x_nom interpolate linearly between nodes; K holds the value of
    the node at or before t (zero-order hold). On segments that end at a mode
    switch (hold_segments), u_ff also holds: blending a stance feedforward
    with a swing-liftoff feedforward would drag planted feet.
    """

    times: np.ndarray   # (N,)
    u_ff: np.ndarray    # (N, nu)
    K: np.ndarray       # (N, nu, nx)
    x_nom: np.ndarray   # (N, nx)
    valid_start: float = 0.0
    valid_end: float = 0.0
    degraded: bool = False
    hold_segments: np.ndarray = None  # (N-1,) bool, optional
    fb_limit: np.ndarray = None       # (nu,) feedback-correction saturation

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("policy node times must be strictly increasing")

    def _locate(self, t):
        times = self.times
        if t <= times[0]:
            return 0, 0, 0.0
        if t >= times[-1]:
            n = len(times) - 1
            return n, n, 0.0
        j = int(np.searchsorted(times, t, side="right"))
        i = j - 1
        w = (t - times[i]) / (times[j] - times[i])
        return i, j, float(w)

    def _ff_weight(self, i, w):
        if self.hold_segments is not None and w > 0.0 \
                and self.hold_segments[min(i, len(self.hold_segments) - 1)]:
            return 0.0
        return w

    def feedforward(self, t):
        i, j, w = self._locate(t)
        w = self._ff_weight(i, w)
        return (1.0 - w) * self.u_ff[i] + w * self.u_ff[j]

    def nominal_state(self, t):
        i, j, w = self._locate(t)
        return (1.0 - w) * self.x_nom[i] + w * self.x_nom[j]

    def gain(self, t):
        i, _, _ = self._locate(t)
        return self.K[i]

    def __call__(self, t, x):
        i, j, w = self._locate(t)
        x_nom = (1.0 - w) * self.x_nom[i] + w * self.x_nom[j]
        w = self._ff_weight(i, w)
        u_ff = (1.0 - w) * self.u_ff[i] + w * self.u_ff[j]
        correction = self.K[i] @ (x - x_nom)
        if self.fb_limit is not None:
            np.clip(correction, -self.fb_limit, self.fb_limit, out=correction)
        return u_ff + correction


def constant_policy(times, x_hold, u_fn, nu=None, nx=None, hold_segments=None):
    """Zero-gain policy holding a state and a per-time feedforward."""
    times = np.asarray(times, dtype=float)
    n = len(times)
    u_ff = np.array([u_fn(t) for t in times], dtype=float)
    nu = u_ff.shape[1] if nu is None else nu
    nx = len(x_hold) if nx is None else nx
    return FeedbackPolicy(
        times=times,
        u_ff=u_ff,
        K=np.zeros((n, nu, nx)),
        x_nom=np.tile(np.asarray(x_hold, dtype=float), (n, 1)),
        valid_start=float(times[0]),
        valid_end=float(times[-1]),
        hold_segments=hold_segments,
    )


@dataclass
class SolverStats:
    """Per-cycle instrumentation, emitted as a JSON-friendly record."""

    rollout_ms: float = 0.0
    linearization_ms: float = 0.0
    backward_pass_ms: float = 0.0
    line_search_ms: float = 0.0
    penalty_eval_ms: float = 0.0
    cost_before: float = 0.0
    cost_after: float = 0.0
    merit_before: float = 0.0
    merit_after: float = 0.0
    constraint_residual_before: float = 0.0
    constraint_residual_after: float = 0.0
    step_size: float = 0.0
    iterations: int = 0
    nodes: int = 0
    degraded: bool = False

    @property
    def total_ms(self):
        return (self.rollout_ms + self.linearization_ms
                + self.backward_pass_ms + self.line_search_ms)

    def to_record(self):
        return {
            "rollout_ms": self.rollout_ms,
            "linearization_ms": self.linearization_ms,
            "backward_pass_ms": self.backward_pass_ms,
            "line_search_ms": self.line_search_ms,
            "total_ms": self.total_ms,
            "penalty_eval_ms": self.penalty_eval_ms,
            "cost_before": self.cost_before,
            "cost_after": self.cost_after,
            "merit_before": self.merit_before,
            "merit_after": self.merit_after,
            "constraint_residual_before": self.constraint_residual_before,
            "constraint_residual_after": self.constraint_residual_after,
            "step_size": self.step_size,
            "iterations": self.iterations,
            "nodes": self.nodes,
            "degraded": self.degraded,
        }


def node_grid(t0, t1, ocp, settings):
    """Uniform node times over [t0, t1] with mode switches inserted."""
    times = np.linspace(t0, t1, settings.nodes)
    switches = ocp.switch_times(t0, t1) if hasattr(ocp, "switch_times") else []
    if switches:
        times = np.unique(np.concatenate([times, np.asarray(switches)]))
        # drop uniform nodes that landed pathologically close to a switch
        keep = np.concatenate([[True], np.diff(times) > 1e-9])
        times = times[keep]
    return times


def rollout(ocp, policy, x0, times, settings, with_cost=False):
    """Integrate the closed-loop system through the node grid.

    Integration stops and restarts exactly at every node time (the grid
    already contains the mode switches), with the contact mode frozen per
    segment: the integrator's endpoint stages evaluate at the segment's right
    edge, which belongs to the next mode, so both the mode and the policy
    lookup clamp strictly inside the segment. With with_cost=True the running
    cost rides along as an extra ODE state and converges with the integrator
    tolerance. Returns (xs, us, cost).
    """
    n = len(times)
    nx = len(x0)
    xs = np.empty((n, nx))
    xs[0] = x0

    seg_dyn = getattr(ocp, "segment_dynamics", None)
    apply_input = getattr(ocp, "apply_input", None)
    can_freeze = hasattr(ocp, "equilibrium_input")
    y = np.concatenate([x0, [0.0]]) if with_cost else x0.copy()
    frozen_from = None
    h_carry = None

    for k in range(n - 1):
        t_hi = times[k + 1]
        t_clamp = t_hi - 1e-9 * max(1.0, abs(t_hi))
        f_seg = seg_dyn(0.5 * (times[k] + t_hi)) if seg_dyn is not None \
            else (lambda t, x, u: ocp.dynamics(t, x, u))

        if with_cost:
            def rhs(t, y):
                te = min(t, t_clamp)
                u = policy(te, y[:nx])
                dx = f_seg(te, y[:nx], u)
                ua = apply_input(te, y[:nx], u) if apply_input is not None \
                    else ocp.input_mask(te, u)
                return np.concatenate([dx, [ocp.cost(te, y[:nx], ua)]])
        else:
            def rhs(t, y):
                te = min(t, t_clamp)
                return f_seg(te, y, policy(te, y))

        try:
            y, h_carry = integrate(rhs, times[k], t_hi, y,
                                   rtol=settings.rollout_rtol,
                                   atol=settings.rollout_atol,
                                   max_norm=settings.max_state_norm,
                                   h0=h_carry, return_h=True)
        except (IntegrationDiverged, SingularAttitude):
            if not can_freeze:
                raise
            # the closed loop blew up mid-horizon: freeze the remaining
            # nodes at the last finite state so the solve stays evaluable
            # (the huge tracking cost of the frozen tail rejects bad
            # line-search candidates and steers the next update)
            frozen_from = k + 1
            xs[k + 1:] = xs[k]
            break
        xs[k + 1] = y[:nx]

    if apply_input is not None:
        us = np.array([apply_input(t, x, policy(t, x))
                       for t, x in zip(times, xs)])
    else:
        us = np.array([ocp.input_mask(t, policy(t, x))
                       for t, x in zip(times, xs)])
    if frozen_from is not None:
        for k in range(frozen_from, n):
            us[k] = apply_input(times[k], xs[k],
                                ocp.equilibrium_input(times[k])) \
                if apply_input is not None else ocp.equilibrium_input(times[k])
    # a frozen rollout's ODE cost integral is truncated: let the caller
    # recompute by node quadrature instead
    cost = float(y[nx]) if with_cost and frozen_from is None else None
    return xs, us, cost


def lq_approximation(ocp, times, xs, us):
    """Linearize dynamics and quadratize the augmented cost at every node."""
    return [ocp.linearize_node(t, x, u) for t, x, u in zip(times, xs, us)]


@dataclass
class ProjectedNode:
    """LQ node with the input decomposed into constraint-correcting and
    nullspace coordinates: du = c + M dx + N nu (matrices fixed per node)."""

    node: object
    M: np.ndarray
    N: np.ndarray
    Dp: np.ndarray
    A_t: np.ndarray
    B_t: np.ndarray
    Q_t: np.ndarray
    R_t: np.ndarray
    P_t: np.ndarray
    R_chol: object

    def _correction(self, e_raw):
        if self.Dp is None:
            return np.zeros(self.M.shape[0])
        return -self.Dp @ e_raw

    def affine_terms(self, q_raw, r_raw, e_raw):
        """Affine Riccati data for raw (q, r, e) under this node's projection.

        Returns (q_t, r_t, b_t) of the projected subproblem.
        """
        c = self._correction(e_raw)
        Rc = r_raw + self.node.R @ c
        return q_raw + self.M.T @ Rc, self.N.T @ Rc, self.node.B @ c

    def gains(self, S_k, s_k):
        c = self._correction(self.node.e)
        r_t = self.N.T @ (self.node.r + self.node.R @ c)
        G = self.P_t + self.B_t.T @ S_k
        g = r_t + self.B_t.T @ s_k
        K_nu = -scipy.linalg.cho_solve(self.R_chol, G, check_finite=False)
        nu_ff = -scipy.linalg.cho_solve(self.R_chol, g, check_finite=False)
        return c + self.N @ nu_ff, self.M + self.N @ K_nu


def project_equalities(node, rank_tol=1e-8):
    """Express the node's LQ subproblem in constraint-nullspace coordinates.

    Every policy built on the projected problem satisfies the linearized
    equalities exactly. Raises RankDeficientConstraint when the input
    Jacobian loses row rank (reports the node time).
    """
    nx = node.A.shape[0]
    nu = node.B.shape[1]
    m = node.D.shape[0] if node.D is not None else 0
    if m == 0:
        M = np.zeros((nu, nx))
        N = np.eye(nu)
        Dp = None
    else:
        svals = scipy.linalg.svdvals(node.D)
        if svals.min() < rank_tol * max(1.0, svals.max()):
            raise RankDeficientConstraint(
                f"constraint input Jacobian rank-deficient at t={node.t:.4f} "
                f"(min sv {svals.min():.2e})", time=node.t)
        Dp = np.linalg.pinv(node.D)
        N = scipy.linalg.null_space(node.D)
        M = -Dp @ node.C

    A_t = node.A + node.B @ M
    B_t = node.B @ N
    Q_t = node.Q + M.T @ node.R @ M
    Q_t = 0.5 * (Q_t + Q_t.T)
    R_t = N.T @ node.R @ N
    R_t = 0.5 * (R_t + R_t.T)
    P_t = N.T @ node.R @ M
    try:
        R_chol = scipy.linalg.cho_factor(R_t)
    except scipy.linalg.LinAlgError as exc:
        raise RiccatiDiverged(
            f"projected input Hessian not PD at t={node.t:.4f}") from exc
    return ProjectedNode(node=node, M=M, N=N, Dp=Dp, A_t=A_t, B_t=B_t,
                         Q_t=Q_t, R_t=R_t, P_t=P_t, R_chol=R_chol)


def backward_pass(nodes, times, settings, terminal_S=None, terminal_s=None):
    """Integrate the Riccati equation backward and assemble the policy update.

    Matrix data holds per segment (left node); the affine terms (cost
    gradients and constraint residuals) interpolate linearly between segment
    ends whenever both ends share the constraint pattern, which keeps one
    iteration exact on linear-quadratic problems. Returns (du_ff, K, S0, s0).
    """
    n = len(nodes)
    nx = nodes[0].A.shape[0]
    nu = nodes[0].B.shape[1]
    projected = [project_equalities(nd, settings.constraint_rank_tol)
                 for nd in nodes]

    S = np.zeros((nx, nx)) if terminal_S is None else terminal_S.copy()
    s = np.zeros(nx) if terminal_s is None else terminal_s.copy()

    du_ff = np.empty((n, nu))
    K = np.empty((n, nu, nx))
    du_ff[-1], K[-1] = projected[-1].gains(S, s)
    h_carry = None

    for k in range(n - 2, -1, -1):
        pn = projected[k]
        right = nodes[k + 1]
        left = nodes[k]
        span = times[k + 1] - times[k]
        same_mode = right.e.shape == left.e.shape and right.D.shape == left.D.shape

        q_l, r_l, e_l = left.q, left.r, left.e
        if same_mode:
            dq = right.q - left.q
            dr = right.r - left.r
            de = right.e - left.e
        else:
            dq = np.zeros_like(left.q)
            dr = np.zeros_like(left.r)
            de = np.zeros_like(left.e)

        def riccati_rhs(sigma, y):
            # sigma runs forward from t_{k+1} (sigma=0) down to t_k (sigma=span)
            w = 1.0 - sigma / span
            q_t, r_t, b_t = pn.affine_terms(q_l + w * dq, r_l + w * dr,
                                            e_l + w * de)
            S_m = y[:nx * nx].reshape(nx, nx)
            s_m = y[nx * nx:]
            G = pn.P_t + pn.B_t.T @ S_m
            RG = scipy.linalg.cho_solve(pn.R_chol, G, check_finite=False)
            g = r_t + pn.B_t.T @ s_m
            dS = pn.Q_t + pn.A_t.T @ S_m + S_m @ pn.A_t - G.T @ RG
            ds = q_t + pn.A_t.T @ s_m + S_m @ b_t \
                - G.T @ scipy.linalg.cho_solve(pn.R_chol, g, check_finite=False)
            return np.concatenate([dS.ravel(), ds])

        y = np.concatenate([S.ravel(), s])
        y, h_carry = integrate(riccati_rhs, 0.0, span, y,
                               rtol=settings.riccati_rtol,
                               atol=settings.riccati_atol,
                               h0=h_carry, return_h=True)
        if not np.all(np.isfinite(y)):
            raise RiccatiDiverged(f"non-finite value function at t={times[k]:.4f}")
        S = y[:nx * nx].reshape(nx, nx)
        asym = float(np.abs(S - S.T).max())
        if asym > 1e-6 * max(1.0, float(np.abs(S).max())):
            raise RiccatiDiverged(
                f"value Hessian asymmetry {asym:.2e} at t={times[k]:.4f}")
        S = 0.5 * (S + S.T)
        s = y[nx * nx:]
        du_ff[k], K[k] = pn.gains(S, s)

    return du_ff, K, S, s


def _terminal_value(ocp, t_f, x_f):
    term = getattr(ocp, "terminal_quadratics", None)
    return term(t_f, x_f)[0] if term is not None else 0.0


def trajectory_merit(ocp, times, xs, us, settings, cost_integral=None):
    """Merit = integrated augmented cost + terminal cost + weighted squared
    residual norm. The running pieces integrate by trapezoid over the nodes
    unless an ODE-accurate cost integral is supplied.
    """
    costs = np.array([ocp.cost(t, x, u) for t, x, u in zip(times, xs, us)])
    if getattr(ocp, "constraints_exact_in_rollout", False):
        violation = 0.0
    else:
        res = np.array([np.sum(ocp.constraint_residual(t, x, u) ** 2)
                        for t, x, u in zip(times, xs, us)])
        violation = float(np.trapezoid(res, times))
    cost = float(np.trapezoid(costs, times)) if cost_integral is None else cost_integral
    cost += _terminal_value(ocp, times[-1], xs[-1])
    merit = cost + settings.merit_constraint_weight * violation
    return merit, cost, float(np.sqrt(violation))


def merit_from_nodes(ocp, times, nodes, settings):
    costs = np.array([nd.cost for nd in nodes])
    res = np.array([np.sum(nd.e ** 2) for nd in nodes])
    cost = float(np.trapezoid(costs, times))
    cost += _terminal_value(ocp, times[-1], nodes[-1].x)
    violation = float(np.trapezoid(res, times))
    return cost + settings.merit_constraint_weight * violation, cost, \
        float(np.sqrt(violation))


def line_search(ocp, times, xs, us, du_ff, K, merit_cur, settings,
                hold_segments=None, fb_limit=None):
    """Try decreasing feedforward scalings; accept the first merit decrease.

    Candidates are compared against the zero-increment baseline (the current
    trajectory re-rolled under the candidate parameterization): node-sampled
    policies do not reproduce their defining rollout exactly between nodes,
    and comparing against the raw current merit would reject any improvement
    smaller than that re-parameterization error. Returns (accepted, alpha,
    xs_new, us_new, merit_new, cost_new, res_new); non-improvement is an
    outcome (alpha = 0), not an error.
    """
    with_cost = settings.cost_integration == "ode"

    def roll(alpha):
        candidate = FeedbackPolicy(
            times=times.copy(),
            u_ff=us + alpha * du_ff if alpha != 0.0 else us.copy(),
            K=K,
            x_nom=xs.copy(),
            valid_start=float(times[0]),
            valid_end=float(times[-1]),
            hold_segments=hold_segments,
            fb_limit=fb_limit,
        )
        xs_new, us_new, cost_int = rollout(ocp, candidate, xs[0], times,
                                           settings, with_cost=with_cost)
        merit, cost, res = trajectory_merit(ocp, times, xs_new, us_new,
                                            settings, cost_integral=cost_int)
        return xs_new, us_new, merit, cost, res

    def better(merit, bar):
        return merit < bar - 1e-12 * max(1.0, abs(bar))

    # fast path: accept against the current merit directly
    cached = []
    for alpha in settings.line_search_steps:
        try:
            result = roll(alpha)
        except (IntegrationDiverged, SingularAttitude):
            continue  # candidate blew up: treat as a rejected step
        if better(result[2], merit_cur):
            return (True, alpha) + result
        cached.append((alpha, result))

    # all candidates lost to the raw current merit, which overstates what the
    # re-parameterized current policy can actually achieve: re-compare against
    # the zero-increment baseline rollout
    if cached:
        try:
            _, _, merit_bar, _, _ = roll(0.0)
        except (IntegrationDiverged, SingularAttitude):
            merit_bar = merit_cur
        for alpha, result in cached:
            if better(result[2], merit_bar):
                return (True, alpha) + result
    return False, 0.0, xs, us, merit_cur, None, None


def slq_iteration(ocp, policy, x0, times, settings):
    """One SLQ iteration; returns (policy, stats, improved)."""
    stats = SolverStats(nodes=len(times))
    penalty_base = getattr(ocp, "penalty_eval_s", 0.0)
    holds = ocp.interpolation_holds(times) \
        if hasattr(ocp, "interpolation_holds") else None
    fb_limit = getattr(ocp, "feedback_limit", None)

    tic = time.perf_counter()
    with_cost = settings.cost_integration == "ode"
    xs, us, cost_int = rollout(ocp, policy, x0, times, settings,
                               with_cost=with_cost)
    stats.rollout_ms = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    nodes = lq_approximation(ocp, times, xs, us)
    stats.linearization_ms = (time.perf_counter() - tic) * 1e3

    if with_cost:
        merit_cur, cost_cur, res_cur = trajectory_merit(
            ocp, times, xs, us, settings, cost_integral=cost_int)
    else:
        merit_cur, cost_cur, res_cur = merit_from_nodes(ocp, times, nodes,
                                                        settings)
    stats.merit_before = merit_cur
    stats.cost_before = cost_cur
    stats.constraint_residual_before = res_cur

    tic = time.perf_counter()
    term = getattr(ocp, "terminal_quadratics", None)
    if term is not None:
        _, t_grad, t_hess = term(times[-1], xs[-1])
        du_ff, K, _, _ = backward_pass(nodes, times, settings,
                                       terminal_S=t_hess, terminal_s=t_grad)
    else:
        du_ff, K, _, _ = backward_pass(nodes, times, settings)
    stats.backward_pass_ms = (time.perf_counter() - tic) * 1e3

    tic = time.perf_counter()
    accepted, alpha, xs_new, us_new, merit_new, cost_new, res_new = \
        line_search(ocp, times, xs, us, du_ff, K, merit_cur, settings,
                    hold_segments=holds, fb_limit=fb_limit)
    stats.line_search_ms = (time.perf_counter() - tic) * 1e3

    stats.step_size = alpha
    stats.iterations = 1
    stats.penalty_eval_ms = (getattr(ocp, "penalty_eval_s", 0.0)
                             - penalty_base) * 1e3
    if not accepted:
        stats.merit_after = merit_cur
        stats.cost_after = cost_cur
        stats.constraint_residual_after = res_cur
        return policy, stats, False

    new_policy = FeedbackPolicy(
        times=times.copy(),
        u_ff=us_new,
        K=K,
        x_nom=xs_new,
        valid_start=float(times[0]),
        valid_end=float(times[-1]),
        hold_segments=holds,
        fb_limit=fb_limit,
    )
    stats.merit_after = merit_new
    stats.cost_after = cost_new
    stats.constraint_residual_after = res_new
    return new_policy, stats, True


def solve_ocp(ocp, x0, t0, t1, settings, policy=None, iterations=1):
    """Run SLQ iterations from an optional warm start; returns last stats."""
    times = node_grid(t0, t1, ocp, settings)
    if policy is None:
        policy = constant_policy(times, x0,
                                 lambda t: ocp.equilibrium_input(t),
                                 nx=len(x0))
    stats = None
    prev_cost = None
    for _ in range(iterations):
        policy, stats, improved = slq_iteration(ocp, policy, x0, times, settings)
        if prev_cost is not None and improved:
            rel = abs(prev_cost - stats.cost_after) / max(1.0, abs(prev_cost))
            if rel < settings.convergence_cost_tol:
                break
        if not improved and prev_cost is not None:
            break
        prev_cost = stats.cost_after if improved else stats.cost_before
    return policy, stats


def shift_policy(policy, times, hold_segments=None, tail_input=None):
    """Resample a policy onto a new node grid, holding the tail values.

    Past the previous validity the nominal state and gain hold; the tail
    feedforward comes from `tail_input(t)` when given (the new tail may sit
    in a different contact mode, where holding the old last input would plan
    a free fall), else from the held last node.
    """
    n = len(times)
    nu = policy.u_ff.shape[1]
    nx = policy.x_nom.shape[1]
    u_ff = np.empty((n, nu))
    x_nom = np.empty((n, nx))
    K = np.empty((n, nu, nx))
    for k, t in enumerate(times):
        if tail_input is not None and t > policy.valid_end + 1e-12:
            u_ff[k] = tail_input(t)
        else:
            u_ff[k] = policy.feedforward(t)
        x_nom[k] = policy.nominal_state(t)
        K[k] = policy.gain(t)
    return FeedbackPolicy(times=np.asarray(times, dtype=float).copy(),
                          u_ff=u_ff, K=K, x_nom=x_nom,
                          valid_start=float(times[0]),
                          valid_end=float(times[-1]),
                          hold_segments=hold_segments,
                          fb_limit=policy.fb_limit)


class MpcController:
    """Receding-horizon wrapper: one SLQ iteration per cycle, warm-started.

    Each mpc_step builds a fresh OCP (schedule, reference, snapshot) anchored
    at the measured state, shifts the previous policy onto the new node grid
    (holding the tail), and performs the real-time iteration. On solver
    failure the shifted previous policy is returned flagged degraded.
    """

    def __init__(self, params, costs, gait_params, settings=None):
        from . import gait as gait_mod
        from . import ocp as ocp_mod
        self._gait_mod = gait_mod
        self._ocp_mod = ocp_mod
        self.params = params
        self.costs = costs
        self.gait = gait_params
        self.settings = settings if settings is not None else SolverSettings()
        self.policy = None
        self.last_ocp = None

    def reset(self):
        self.policy = None

    def mpc_step(self, x_s, t_s, command, snapshot):
        """Solve from the latest state measurement; returns (policy, stats)."""
        horizon = self.costs.horizon
        schedule = self._gait_mod.build_schedule(self.gait, t_s, t_s + horizon)
        reference = self._ocp_mod.reference_from_command(
            x_s, command, horizon, self.params,
            clip_radius=self.costs.clip_radius, t0=t_s)
        ocp = self._ocp_mod.OcpProblem(self.params, self.costs, schedule,
                                       reference, snapshot)
        self.last_ocp = ocp
        times = node_grid(t_s, t_s + horizon, ocp, self.settings)
        holds = ocp.interpolation_holds(times)

        cold = self.policy is None
        if cold:
            warm = constant_policy(times, x_s, ocp.equilibrium_input,
                                   nx=len(x_s), hold_segments=holds)
            iterations = max(1, self.settings.cold_start_iterations)
        else:
            warm = shift_policy(self.policy, times, hold_segments=holds,
                                tail_input=ocp.equilibrium_input)
            iterations = self.settings.max_iterations

        try:
            policy = warm
            stats = None
            prev_cost = None
            accepted_any = False
            for _ in range(iterations):
                policy, stats, improved = slq_iteration(
                    ocp, policy, x_s, times, self.settings)
                accepted_any = accepted_any or improved
                if not improved:
                    break
                if prev_cost is not None:
                    rel = abs(prev_cost - stats.cost_after) \
                        / max(1.0, abs(prev_cost))
                    if rel < self.settings.convergence_cost_tol:
                        break
                prev_cost = stats.cost_after
        except (RiccatiDiverged, RankDeficientConstraint, IntegrationDiverged,
                SingularAttitude) as exc:
            degraded = shift_policy(warm, times, hold_segments=holds)
            degraded.degraded = True
            stats = SolverStats(nodes=len(times), degraded=True)
            stats.cost_before = stats.cost_after = float("nan")
            # next cycle re-initializes instead of inheriting the broken plan
            self.policy = None
            self._last_error = exc
            return degraded, stats

        if accepted_any or cold:
            self.policy = policy
        else:
            # stalled: keep the last accepted policy object; re-shifting it
            # every stalled cycle would compound resampling error
            policy = self.policy
        return policy, stats
