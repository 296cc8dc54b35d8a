"""Combined collision environment and the soft barrier penalty.

The CCE holds one immutable ESDF snapshot and a list of tracked-cylinder
snapshots, and forwards distance plus gradient from whichever environment is
closest to a query point. The penalty is the one-sided squared hinge
mu/2 * max(0, eps - d_i)^2 summed over the robot's collision spheres; its
Hessian keeps only the Gauss-Newton outer-product term so it is positive
semi-definite by construction. Distances are measured to the sphere surface:
d_i = 0 means contact, d_i < 0 a collision.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import model as mdl
from .obstacles import cylinder_distance_batch

log = logging.getLogger(__name__)

DEFAULT_MU = 500.0
DEFAULT_EPSILON = 0.10
DEFAULT_EPSILON_NOISY = 0.15


@dataclass(frozen=True)
class PenaltyParams:
    mu: float = DEFAULT_MU
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.mu < 0.0 or self.epsilon < 0.0:
            raise ValueError("mu and epsilon must be non-negative")


@dataclass(frozen=True)
class CollisionSnapshot:
    """Frozen view of both environments for exactly one MPC iteration."""

    esdf: object                  # Esdf, immutable after build
    cylinders: tuple = ()         # TrackedCylinder snapshots
    stamp: float = 0.0
    horizon: float = 1.5          # queries allowed on [stamp, stamp + horizon]

    def with_cylinders(self, cylinders):
        return CollisionSnapshot(self.esdf, tuple(cylinders), self.stamp,
                                 self.horizon)


def min_distance(snap, center, sphere_radius, t):
    """Surface distance of one sphere to the closest environment.

    Returns (distance, gradient, source); source is "static" or
    "dynamic:<id>". Ties resolve to the static environment.
    """
    if not (snap.stamp - 1e-9 <= t <= snap.stamp + snap.horizon + 1e-9):
        raise ValueError(
            f"query time {t} outside snapshot window "
            f"[{snap.stamp}, {snap.stamp + snap.horizon}]")
    d, g, src = _min_distance_batch(snap, np.asarray(center, float)[None, :], t)
    return float(d[0]) - sphere_radius, g[0], src[0]


def _min_distance_batch(snap, centers, t):
    """Center distances (before radius subtraction) for points (N, 3)."""
    d, g, _ = snap.esdf.query_batch(centers)
    src = ["static"] * len(centers)
    for cyl in snap.cylinders:
        dc, gc = cylinder_distance_batch(cyl, centers, t)
        closer = dc < d
        d = np.where(closer, dc, d)
        g[closer] = gc[closer]
        for i in np.flatnonzero(closer):
            src[i] = f"dynamic:{cyl.id}"
    return d, g, src


def sphere_distances(snap, x, t, params, verbose=False):
    """Per-sphere surface distances with their Jacobian ingredients.

    Returns (dists (8,), grads (8, 3), dc_dtheta (8, 3, 3), sources). With
    verbose=True each evaluation is logged (sphere id, distance, source) for
    the minimum-distance trace.
    """
    centers, dc_dtheta = mdl.sphere_centers(x, params)
    d, g, src = _min_distance_batch(snap, centers, t)
    d = d - params.sphere_radii
    if verbose and log.isEnabledFor(logging.DEBUG):
        for i in range(mdl.NUM_SPHERES):
            log.debug("sphere=%d t=%.3f distance=%.4f source=%s", i, t, d[i], src[i])
    return d, g, dc_dtheta, src


def min_sphere_distance(snap, x, t, params):
    """Smallest surface distance over the sphere decomposition (the
    minimum-distance trace; per-sphere records logged at DEBUG level)."""
    d, _, _, src = sphere_distances(snap, x, t, params, verbose=True)
    i = int(np.argmin(d))
    return float(d[i]), i, src[i]


def _distance_state_jacobians(grads, dc_dtheta):
    """d d_i/dx rows (8, 24): environment gradient chained through centers."""
    dd_dx = np.zeros((mdl.NUM_SPHERES, mdl.NX))
    dd_dx[:, 3:6] = grads
    dd_dx[:, 0:3] = np.einsum("sc,sck->sk", grads, dc_dtheta)
    return dd_dx


def penalty_value(snap, x, t, penalty, params):
    """l_c(x, t): sum over spheres of mu/2 * max(0, eps - d_i)^2."""
    if penalty.mu == 0.0:
        return 0.0
    d, _, _, _ = sphere_distances(snap, x, t, params)
    viol = np.maximum(0.0, penalty.epsilon - d)
    return float(0.5 * penalty.mu * np.sum(viol ** 2))


def penalty_value_grad_hess(snap, x, t, penalty, params):
    """Value, 24-gradient, and Gauss-Newton 24x24 Hessian of the penalty.

    The hinge is half-open: a sphere exactly on the safety margin
    (d_i == eps) contributes nothing to any of the three, so value, gradient,
    and Hessian stay consistent at the kink.
    """
    if penalty.mu == 0.0:
        return 0.0, np.zeros(mdl.NX), np.zeros((mdl.NX, mdl.NX))
    d, grads, dc_dtheta, _ = sphere_distances(snap, x, t, params)
    active = d < penalty.epsilon
    value = float(0.5 * penalty.mu *
                  np.sum((penalty.epsilon - d[active]) ** 2))
    grad = np.zeros(mdl.NX)
    hess = np.zeros((mdl.NX, mdl.NX))
    if np.any(active):
        dd_dx = _distance_state_jacobians(grads, dc_dtheta)[active]
        viol = penalty.epsilon - d[active]
        grad = -penalty.mu * (viol @ dd_dx)
        hess = penalty.mu * dd_dx.T @ dd_dx
    return value, grad, hess


def penalty_gradient(snap, x, t, penalty, params):
    return penalty_value_grad_hess(snap, x, t, penalty, params)[1]


def penalty_gn_hessian(snap, x, t, penalty, params):
    return penalty_value_grad_hess(snap, x, t, penalty, params)[2]
