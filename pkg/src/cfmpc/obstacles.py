"""Dynamic environment: constant-velocity Kalman tracking of moving cylinders.

Observations arrive pre-segmented with stable ids (the upstream detector is
out of scope here). Each track carries a planar position/velocity estimate,
its covariance, and an exponentially smoothed radius. Predictions across the
MPC horizon extrapolate with the constant-velocity model.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonmonotoneTimestamp

DEFAULT_ACCEL_SIGMA = 0.5   # [m/s^2] white-noise acceleration
DEFAULT_MEAS_SIGMA = 0.05   # [m]
DEFAULT_RADIUS_SMOOTHING = 0.5
DEFAULT_STALE_AFTER = 1.0   # [s]
_INIT_VEL_VAR = 1.0         # [m^2/s^2]


@dataclass(frozen=True)
class ObstacleObservation:
    id: int
    position: np.ndarray  # (2,) [m]
    radius: float
    timestamp: float


@dataclass(frozen=True)
class KfNoise:
    accel_sigma: float = DEFAULT_ACCEL_SIGMA
    meas_sigma: float = DEFAULT_MEAS_SIGMA
    radius_smoothing: float = DEFAULT_RADIUS_SMOOTHING


@dataclass(frozen=True)
class TrackedCylinder:
    """Kalman-filtered moving obstacle; state is (x, y, vx, vy)."""

    id: int
    state: np.ndarray       # (4,)
    covariance: np.ndarray  # (4, 4)
    radius: float
    last_update_time: float

    @property
    def position(self):
        return self.state[0:2]

    @property
    def velocity(self):
        return self.state[2:4]


def start_track(obs, noise=KfNoise()):
    """Open a track at an observation: zero velocity prior, loose covariance."""
    state = np.array([obs.position[0], obs.position[1], 0.0, 0.0])
    cov = np.diag([noise.meas_sigma ** 2, noise.meas_sigma ** 2,
                   _INIT_VEL_VAR, _INIT_VEL_VAR])
    return TrackedCylinder(id=obs.id, state=state, covariance=cov,
                           radius=float(obs.radius),
                           last_update_time=obs.timestamp)


def _transition(dt):
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def _process_noise(dt, accel_sigma):
    """Discretized white-noise-acceleration covariance, per axis."""
    q = accel_sigma ** 2
    a = 0.25 * dt ** 4 * q
    b = 0.5 * dt ** 3 * q
    c = dt ** 2 * q
    Q = np.zeros((4, 4))
    Q[0, 0] = Q[1, 1] = a
    Q[0, 2] = Q[2, 0] = Q[1, 3] = Q[3, 1] = b
    Q[2, 2] = Q[3, 3] = c
    return Q


def kf_step(track, obs, noise=KfNoise()):
    """Predict to the observation time, then fuse the position measurement.

    The covariance update uses the Joseph form, which keeps it symmetric
    positive definite regardless of conditioning.
    """
    if obs.id != track.id:
        raise ValueError(f"observation id {obs.id} does not match track {track.id}")
    dt = obs.timestamp - track.last_update_time
    if dt < 0.0:
        raise NonmonotoneTimestamp(
            f"track {track.id}: observation at {obs.timestamp} precedes {track.last_update_time}")

    F = _transition(dt)
    x = F @ track.state
    P = F @ track.covariance @ F.T + _process_noise(dt, noise.accel_sigma)

    H = np.zeros((2, 4))
    H[0, 0] = H[1, 1] = 1.0
    Rm = noise.meas_sigma ** 2 * np.eye(2)
    S = H @ P @ H.T + Rm
    K = P @ H.T @ np.linalg.inv(S)
    innov = np.asarray(obs.position, dtype=float) - H @ x
    x = x + K @ innov
    IKH = np.eye(4) - K @ H
    P = IKH @ P @ IKH.T + K @ Rm @ K.T
    P = 0.5 * (P + P.T)

    a = noise.radius_smoothing
    radius = (1.0 - a) * track.radius + a * float(obs.radius)
    return TrackedCylinder(id=track.id, state=x, covariance=P, radius=radius,
                           last_update_time=obs.timestamp)


def predict_position(track, t):
    """Constant-velocity extrapolation of the planar center to time t."""
    dt = t - track.last_update_time
    return track.position + track.velocity * dt


def cylinder_distance(track, point, t):
    """Distance and gradient from a point to the predicted cylinder at time t.

    The cylinder is infinite in z, so the gradient is a horizontal unit
    vector; exactly on the axis it degenerates to (1, 0, 0).
    """
    center = predict_position(track, t)
    rel = np.asarray(point, dtype=float)[0:2] - center
    rho = float(np.hypot(rel[0], rel[1]))
    d = rho - track.radius
    if rho > 1e-12:
        g = np.array([rel[0] / rho, rel[1] / rho, 0.0])
    else:
        g = np.array([1.0, 0.0, 0.0])
    return d, g


def cylinder_distance_batch(track, pts, t):
    """Vectorized cylinder_distance for points (N, 3)."""
    center = predict_position(track, t)
    rel = pts[:, 0:2] - center
    rho = np.hypot(rel[:, 0], rel[:, 1])
    d = rho - track.radius
    g = np.zeros((len(pts), 3))
    ok = rho > 1e-12
    g[ok, 0:2] = rel[ok] / rho[ok, None]
    g[~ok, 0] = 1.0
    return d, g


@dataclass
class ObstacleTracker:
    """Id-keyed set of tracks, mutated only by the perception task."""

    noise: KfNoise = field(default_factory=KfNoise)
    stale_after: float = DEFAULT_STALE_AFTER
    tracks: dict = field(default_factory=dict)

    def observe(self, obs):
        track = self.tracks.get(obs.id)
        if track is None:
            self.tracks[obs.id] = start_track(obs, self.noise)
        else:
            self.tracks[obs.id] = kf_step(track, obs, self.noise)

    def prune(self, now):
        stale = [tid for tid, tr in self.tracks.items()
                 if now - tr.last_update_time > self.stale_after]
        for tid in stale:
            del self.tracks[tid]

    def snapshot(self):
        """Immutable copies of all tracks, ordered by id for determinism."""
        return [replace(self.tracks[tid],
                        state=self.tracks[tid].state.copy(),
                        covariance=self.tracks[tid].covariance.copy())
                for tid in sorted(self.tracks)]
