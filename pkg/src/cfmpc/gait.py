"""Contact schedules and the swing-foot height profile.

The mode sequence is a predefined function of absolute time, so successive
MPC solves agree on phase boundaries without bookkeeping. The default gait is
a duty-0.5 trot of diagonal pairs with an all-stance settle phase at the
start; "stand" keeps all four feet planted.
"""

import math
from dataclasses import dataclass

import numpy as np

NUM_LEGS = 4
ALL_STANCE = (True, True, True, True)

# diagonal pairs: phase A swings {RF, LH}, phase B swings {LF, RH}
_TROT_A = (True, False, False, True)
_TROT_B = (False, True, True, False)

DEFAULT_STRIDE = 0.8
DEFAULT_DUTY = 0.5
DEFAULT_SETTLE = 0.4
DEFAULT_APEX = 0.10


@dataclass(frozen=True)
class GaitParams:
    kind: str = "trot"          # "trot" | "stand"
    stride: float = DEFAULT_STRIDE
    duty: float = DEFAULT_DUTY
    settle: float = DEFAULT_SETTLE
    swing_apex: float = DEFAULT_APEX

    @property
    def half_stride(self):
        return 0.5 * self.stride

    @property
    def swing_duration(self):
        return (1.0 - self.duty) * self.stride


@dataclass
class ModeSchedule:
    """Switched contact timeline over [start, end].

    phase i is active on [times[i], times[i+1]); len(times) = len(flags) + 1.
    """

    times: np.ndarray
    flags: list
    gait: GaitParams

    def __post_init__(self):
        if len(self.times) != len(self.flags) + 1:
            raise ValueError("need len(times) == len(flags) + 1")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("switch times must be strictly increasing")

    @property
    def start(self):
        return float(self.times[0])

    @property
    def end(self):
        return float(self.times[-1])

    def phase_index(self, t):
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.flags) - 1)

    def contacts_at(self, t):
        return self.flags[self.phase_index(t)]

    def switches_in(self, t0, t1):
        """Interior switch times strictly inside (t0, t1)."""
        interior = self.times[1:-1]
        return [float(s) for s in interior if t0 + 1e-12 < s < t1 - 1e-12]

    def swing_phase(self, leg, t):
        """Normalized swing phase in [0, 1] and duration, for a swinging leg.

        Returns (phase, duration); raises if the leg is in stance at t.
        """
        i = self.phase_index(t)
        if self.flags[i][leg]:
            raise ValueError(f"leg {leg} is in stance at t={t}")
        t0, t1 = float(self.times[i]), float(self.times[i + 1])
        # merge adjacent swing phases of the same leg (never happens for trot,
        # but keeps the phase well defined for custom schedules)
        while i > 0 and not self.flags[i - 1][leg]:
            i -= 1
            t0 = float(self.times[i])
        j = self.phase_index(t)
        while j + 1 < len(self.flags) and not self.flags[j + 1][leg]:
            j += 1
            t1 = float(self.times[j + 1])
        phase = (t - t0) / (t1 - t0)
        return min(max(phase, 0.0), 1.0), t1 - t0


def _trot_contacts_at(gait, t):
    """Contacts of the absolute-time-anchored trot at time t."""
    if t < gait.settle:
        return ALL_STANCE
    k = math.floor((t - gait.settle) / gait.half_stride)
    return _TROT_A if k % 2 == 0 else _TROT_B


def build_schedule(gait, t_start, t_end):
    """Schedule covering [t_start, t_end] with at least one boundary beyond
    the horizon end (warm-start shifting needs the overhang).

    The schedule begins at the TRUE start of the phase containing t_start,
    not at t_start itself: a re-solve landing mid-swing must see the actual
    liftoff time, otherwise the swing profile restarts at every MPC cycle.
    """
    t_end = t_end + gait.stride  # overhang
    if gait.kind == "stand":
        t0 = min(0.0, t_start)
        return ModeSchedule(np.array([t0, t_end]), [ALL_STANCE], gait)
    if gait.kind != "trot":
        raise ValueError(f"unknown gait kind {gait.kind!r}")

    half = gait.half_stride
    if t_start < gait.settle:
        phase_begin = min(0.0, t_start)
    else:
        phase_begin = gait.settle + \
            math.floor((t_start - gait.settle) / half + 1e-12) * half
    boundaries = [gait.settle + k * half for k in
                  range(0, max(1, math.ceil((t_end - gait.settle) / half)) + 1)]
    interior = [b for b in boundaries if phase_begin + 1e-12 < b < t_end - 1e-12]
    times = np.array([phase_begin] + interior + [t_end])
    flags = [_trot_contacts_at(gait, 0.5 * (times[i] + times[i + 1]))
             for i in range(len(times) - 1)]
    return ModeSchedule(times, flags, gait)


def swing_height(phase, apex):
    """Height bump z(s): zero at both ends, apex at mid-swing.

    Polynomial with natural quintic boundary conditions (z = 0 and z'' = 0
    at both ends, stationary apex); the leading coefficient degenerates,
    leaving z(s) = apex * (3.2 s - 6.4 s^3 + 3.2 s^4).
    """
    s = phase
    return apex * (3.2 * s - 6.4 * s ** 3 + 3.2 * s ** 4)


def swing_reference(phase, gait):
    """Commanded vertical foot velocity c(t) at a normalized swing phase.

    c(0) > 0 (liftoff), c(1) < 0 (touchdown), and the integral over the swing
    vanishes so the foot returns to the ground.
    """
    s = min(max(phase, 0.0), 1.0)
    dz_ds = gait.swing_apex * (3.2 - 19.2 * s ** 2 + 12.8 * s ** 3)
    return dz_ds / gait.swing_duration
