"""Adaptive explicit integration (Dormand-Prince 5(4)).

Used for closed-loop rollouts and the backward Riccati sweep. The embedded
4th-order solution drives a standard proportional step-size controller; step
sizes adapt to the requested accuracy, so callers pay only for the precision
they ask for. Deterministic: no randomness, no wall-clock dependence.
"""

import numpy as np

from .errors import IntegrationDiverged

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_MIN_SCALE = 0.2
_MAX_SCALE = 5.0
_MAX_STEPS = 100_000
_MIN_STEP_FRAC = 1e-7  # h below this fraction of the span means divergence


def integrate(f, t0, t1, y0, rtol=1e-6, atol=1e-9, max_norm=None, h0=None,
              return_h=False):
    """Integrate y' = f(t, y) from t0 to t1 (t1 > t0). Returns y(t1).

    With return_h=True also returns the last accepted step size, which a
    caller integrating many adjacent segments can thread back in as h0 to
    avoid re-learning the step on every segment.
    """
    y = np.asarray(y0, dtype=float).copy()
    t = t0
    span = t1 - t0
    if span <= 0.0:
        return (y, h0) if return_h else y
    h_floor = _MIN_STEP_FRAC * span
    h = min(h0, span) if h0 is not None else span
    h_accepted = h
    k = [None] * 7
    k[0] = f(t, y)
    for _ in range(_MAX_STEPS):
        h = min(h, t1 - t)
        for i in range(1, 7):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_A[i]))
            k[i] = f(t + _C[i] * h, yi)
        y5 = y + h * sum(b * k[i] for i, b in enumerate(_B5) if b != 0.0)
        y4 = y + h * sum(b * k[i] for i, b in enumerate(_B4) if b != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean(((y5 - y4) / scale) ** 2)))
        if not np.isfinite(err):
            raise IntegrationDiverged(f"non-finite integration error at t={t:.4f}")
        if err <= 1.0:
            t += h
            y = y5
            h_accepted = h
            if max_norm is not None and np.linalg.norm(y) > max_norm:
                raise IntegrationDiverged(
                    f"state norm {np.linalg.norm(y):.3e} exceeded {max_norm:.3e} at t={t:.4f}")
            if t >= t1 - 1e-14 * max(1.0, abs(t1)):
                grow = _SAFETY * err ** -0.2 if err > 0.0 else _MAX_SCALE
                h_next = h_accepted * min(_MAX_SCALE, max(_MIN_SCALE, grow))
                return (y, h_next) if return_h else y
            k[0] = k[6]  # FSAL: last stage was evaluated at (t, y)
        # on rejection (t, y) are unchanged, so k[0] stays valid
        grow = _SAFETY * err ** -0.2 if err > 0.0 else _MAX_SCALE
        h *= min(_MAX_SCALE, max(_MIN_SCALE, grow))
        if h < h_floor:
            raise IntegrationDiverged(
                f"step collapsed to {h:.3e} at t={t:.6f} (span {span:.3e})")
    raise IntegrationDiverged(f"step budget exhausted between t={t0} and t={t1}")


def rk4_step(f, t, y, h):
    """One classical fixed RK4 step (plant sub-stepping)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
