"""Closed-loop simulation: scenarios, task loop, and metrics.

The plant is the kino-dynamic model itself (no separate physics engine);
map, perception, and command producers exchange immutable snapshots with the
20 Hz control task through single-slot latest-value channels, all advanced
deterministically in simulation time. Fixed seeds make entire runs
byte-reproducible.
"""

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import collision as col
from . import model as mdl
from .collision import CollisionSnapshot, PenaltyParams
from .errors import ConfigError, ScenarioAborted
from .gait import GaitParams
from .integrators import rk4_step
from .obstacles import KfNoise, ObstacleObservation, ObstacleTracker
from .ocp import CostParams, cone_margin
from .sdf import PrimitiveScene, build_esdf, scene_from_dict
from .slq import MpcController, SolverSettings

CONTROL_PERIOD = 0.05       # 20 Hz per the benchmark setup
DEFAULT_DT_SIM = 0.0025
DEFAULT_MAP_PERIOD = 0.25   # 4 Hz ESDF rebuilds
DEFAULT_OBS_RATE = 10.0


@dataclass
class ScriptedObstacle:
    """Ground-truth moving cylinder: piecewise-constant velocity segments."""

    id: int
    radius: float
    start: np.ndarray                 # (2,)
    velocity: np.ndarray              # (2,) initial velocity
    segments: list = field(default_factory=list)  # [(t, vx, vy), ...] later pieces

    def position(self, t):
        p = np.asarray(self.start, dtype=float).copy()
        v = np.asarray(self.velocity, dtype=float)
        t_prev = 0.0
        for (ts, vx, vy) in self.segments:
            if t <= ts:
                break
            p = p + v * (ts - t_prev)
            v = np.array([vx, vy])
            t_prev = ts
        return p + v * (max(t, 0.0) - t_prev)

    def true_distance(self, point, t):
        rel = np.asarray(point, dtype=float)[0:2] - self.position(t)
        return float(np.hypot(rel[0], rel[1])) - self.radius


@dataclass
class CommandTimeline:
    """Latest-value command source: hold the last point at or before t."""

    points: list = field(default_factory=lambda: [(0.0, 0.0, 0.0, 0.0)])

    def at(self, t):
        cmd = (0.0, 0.0, 0.0)
        for (ts, vx, vy, wz) in self.points:
            if ts > t + 1e-12:
                break
            cmd = (vx, vy, wz)
        return np.array(cmd)


@dataclass
class Scenario:
    name: str
    scene: PrimitiveScene
    duration: float
    esdf_bounds: tuple
    obstacles: list = field(default_factory=list)
    command: object = field(default_factory=CommandTimeline)  # or "teleop"
    gait: GaitParams = field(default_factory=lambda: GaitParams(kind="trot"))
    costs: CostParams = field(default_factory=CostParams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    model: mdl.ModelParams = field(default_factory=mdl.ModelParams)
    seed: int = 0
    voxel_size: float = 0.10
    map_period: float = DEFAULT_MAP_PERIOD
    obs_rate: float = DEFAULT_OBS_RATE
    obs_noise: float = 0.0
    dt_sim: float = DEFAULT_DT_SIM
    start_xy: tuple = (0.0, 0.0)
    start_yaw: float = 0.0
    goal_x: float = None
    state_noise: float = 0.0       # optional robustness knob
    command_latency: float = 0.0   # [s] delay on the command channel

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ConfigError("scenario duration must be positive")
        if self.dt_sim > CONTROL_PERIOD + 1e-12:
            raise ConfigError("dt_sim must not exceed the control period")


@dataclass
class Metrics:
    """Per-cycle series plus aggregates; one row per control cycle."""

    t: list = field(default_factory=list)
    min_distance: list = field(default_factory=list)
    true_min_distance: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    base_pose: list = field(default_factory=list)       # (x, y, z, r, p, yaw)
    tracking_error: list = field(default_factory=list)
    stance_speed: list = field(default_factory=list)    # max |v_ee| stance
    cone_margin: list = field(default_factory=list)     # min over stance legs
    swing_force: list = field(default_factory=list)     # max |force| swing
    step_size: list = field(default_factory=list)
    degraded: list = field(default_factory=list)
    solve_ms: list = field(default_factory=list)
    phase_ms: list = field(default_factory=list)        # per-phase dict rows
    penalty_eval_ms: list = field(default_factory=list)

    goal_time: float = None
    aborted: bool = False

    @property
    def collision_count(self):
        return int(np.sum(np.asarray(self.true_min_distance) < 0.0))

    @property
    def global_min_distance(self):
        return float(np.min(self.min_distance)) if self.min_distance else float("inf")

    def deterministic_dict(self):
        """Everything reproducible bit-for-bit under a fixed seed; wall-clock
        solve timings live in timings_dict()."""
        return {
            "cycles": len(self.t),
            "collision_count": self.collision_count,
            "global_min_distance": self.global_min_distance,
            "global_true_min_distance": (float(np.min(self.true_min_distance))
                                         if self.true_min_distance else None),
            "goal_time": self.goal_time,
            "aborted": self.aborted,
            "series": {
                "t": [float(v) for v in self.t],
                "min_distance": [float(v) for v in self.min_distance],
                "true_min_distance": [float(v) for v in self.true_min_distance],
                "penalty": [float(v) for v in self.penalty],
                "base_pose": [[float(c) for c in row] for row in self.base_pose],
                "tracking_error": [float(v) for v in self.tracking_error],
                "stance_speed": [float(v) for v in self.stance_speed],
                "cone_margin": [float(v) for v in self.cone_margin],
                "swing_force": [float(v) for v in self.swing_force],
                "step_size": [float(v) for v in self.step_size],
                "degraded": [bool(v) for v in self.degraded],
            },
        }

    def timings_dict(self):
        total = np.asarray(self.solve_ms)
        out = {
            "cycles": len(self.t),
            "solve_ms_mean": float(total.mean()) if len(total) else 0.0,
            "solve_ms_std": float(total.std()) if len(total) else 0.0,
            "penalty_eval_ms_mean": (float(np.mean(self.penalty_eval_ms))
                                     if self.penalty_eval_ms else 0.0),
            "series": {"solve_ms": [float(v) for v in self.solve_ms]},
            "phases": {},
        }
        if self.phase_ms:
            for key in self.phase_ms[0]:
                vals = np.array([row[key] for row in self.phase_ms])
                out["phases"][key] = {"mean": float(vals.mean()),
                                      "std": float(vals.std())}
        return out


class LatestValueChannel:
    """Single-slot conflated channel: writers overwrite, readers get the
    freshest value with its publication time."""

    def __init__(self, name, max_age=None):
        self.name = name
        self.max_age = max_age
        self._value = None
        self._stamp = None

    def publish(self, value, t):
        self._value = value
        self._stamp = t

    def read(self, t):
        if self._value is None:
            raise ScenarioAborted(f"channel {self.name} read before first publish", t=t)
        if self.max_age is not None and t - self._stamp > self.max_age + 1e-9:
            raise ScenarioAborted(
                f"channel {self.name} stale: age {t - self._stamp:.3f}s "
                f"exceeds {self.max_age:.3f}s", t=t)
        return self._value, self._stamp


def step_sim(x, policy, t, dt_sim, ocp):
    """One plant sub-step: affine policy evaluated continuously through the
    RK4 stages, inputs passed through the mode projection (swing forces are
    exactly zero, stance feet exactly pinned)."""

    def rhs(tt, y):
        u = ocp.apply_input(tt, y, policy(tt, y))
        return mdl.dynamics(y, u, ocp.params)

    return rk4_step(rhs, t, x, dt_sim)


def true_min_distance(scenario, x, t, params):
    """Ground-truth clearance: analytic scene plus scripted cylinders."""
    centers, _ = mdl.sphere_centers(x, params)
    d_static, _ = scenario.scene.sdf(centers)
    d = d_static - params.sphere_radii
    best = float(d.min())
    for ob in scenario.obstacles:
        for c, r in zip(centers, params.sphere_radii):
            best = min(best, ob.true_distance(c, t) - r)
    return best


def run_scenario(scenario, teleop_hooks=None, cycle_limit=None,
                 collect_log=True):
    """Run the closed loop to completion; returns (Metrics, trajectory log).

    teleop_hooks, when given, is an object with `command(t)` returning the
    latest externally commanded twist and `publish_state(record)` /
    `publish_map(esdf)` callbacks (used by the teleop bridge).
    """
    params = scenario.model
    mpc = MpcController(params, scenario.costs, scenario.gait, scenario.solver)
    rng = np.random.default_rng(scenario.seed)
    tracker = ObstacleTracker(noise=KfNoise(
        meas_sigma=max(scenario.obs_noise, 0.02)))

    map_channel = LatestValueChannel("esdf", max_age=2 * scenario.map_period)
    obstacle_channel = LatestValueChannel(
        "tracks", max_age=2.0 / scenario.obs_rate if scenario.obstacles else None)

    x = mdl.standing_state(params, x=scenario.start_xy[0],
                           y=scenario.start_xy[1], yaw=scenario.start_yaw)
    t = 0.0
    metrics = Metrics()
    log = []

    n_cycles = int(round(scenario.duration / CONTROL_PERIOD))
    if cycle_limit is not None:
        n_cycles = min(n_cycles, cycle_limit)
    next_map = 0.0
    next_obs = 0.0
    obs_period = 1.0 / scenario.obs_rate
    consecutive_degraded = 0

    substeps = int(round(CONTROL_PERIOD / scenario.dt_sim))

    for k in range(n_cycles):
        t = k * CONTROL_PERIOD

        # map task (4 Hz rebuild, full grid swap even for a static scene)
        while next_map <= t + 1e-9:
            esdf = build_esdf(scenario.scene, scenario.esdf_bounds,
                              voxel_size=scenario.voxel_size, build_time=next_map)
            map_channel.publish(esdf, next_map)
            next_map += scenario.map_period

        # perception task (noisy pre-segmented detections into the KF)
        while scenario.obstacles and next_obs <= t + 1e-9:
            for ob in scenario.obstacles:
                pos = ob.position(next_obs) + rng.normal(0.0, scenario.obs_noise, 2)
                tracker.observe(ObstacleObservation(
                    id=ob.id, position=pos, radius=ob.radius, timestamp=next_obs))
            tracker.prune(next_obs)
            obstacle_channel.publish(tracker.snapshot(), next_obs)
            next_obs += obs_period
        if not scenario.obstacles and obstacle_channel._value is None:
            obstacle_channel.publish([], 0.0)

        # command task
        if teleop_hooks is not None:
            cmd = teleop_hooks.command(t)
        else:
            cmd = scenario.command.at(t - scenario.command_latency)

        # control task: read snapshots, one real-time iteration
        esdf, _ = map_channel.read(t)
        tracks, _ = obstacle_channel.read(t)
        snap = CollisionSnapshot(esdf=esdf, cylinders=tuple(tracks), stamp=t,
                                 horizon=scenario.costs.horizon + 0.5)

        wall = time.perf_counter()
        policy, stats = mpc.mpc_step(x, t, cmd, snap)
        solve_ms = (time.perf_counter() - wall) * 1e3
        ocp = mpc.last_ocp
        if stats.degraded:
            consecutive_degraded += 1
            if consecutive_degraded >= 3:
                metrics.aborted = True
                raise ScenarioAborted(
                    f"solver degraded {consecutive_degraded} cycles in a row "
                    f"at t={t:.2f} (last: {getattr(mpc, '_last_error', None)})",
                    t=t)
        else:
            consecutive_degraded = 0

        _record_cycle(metrics, scenario, params, ocp, snap, x, policy, t, cmd,
                      stats, solve_ms)
        if collect_log:
            u_applied = ocp.apply_input(t, x, policy(t, x))
            log.append({
                "t": round(t, 6),
                "state": [float(v) for v in x],
                "input": [float(v) for v in u_applied],
                "min_distance": metrics.min_distance[-1],
                "penalty": metrics.penalty[-1],
                "timings": stats.to_record(),
            })

        if teleop_hooks is not None:
            teleop_hooks.publish_state(_teleop_state_record(
                scenario, params, ocp, snap, x, policy, t, cmd, metrics,
                solve_ms))
            teleop_hooks.publish_map(esdf, t)
            if teleop_hooks.should_stop():
                break

        # plant integration to the next control instant
        try:
            for _ in range(substeps):
                x = step_sim(x, policy, t, scenario.dt_sim, ocp)
                t += scenario.dt_sim
        except Exception as exc:
            metrics.aborted = True
            raise ScenarioAborted(
                f"plant integration failed at t={t:.3f}: {exc}", t=t) from exc
        if scenario.state_noise > 0.0:
            x = x + rng.normal(0.0, scenario.state_noise, mdl.NX)

        if scenario.goal_x is not None and metrics.goal_time is None \
                and x[3] >= scenario.goal_x:
            metrics.goal_time = round(t, 6)

    return metrics, log


def _record_cycle(metrics, scenario, params, ocp, snap, x, policy, t, cmd,
                  stats, solve_ms):
    u_applied = ocp.apply_input(t, x, policy(t, x))
    d_min, _, _ = col.min_sphere_distance(snap, x, t, params)
    pen = col.penalty_value(snap, x, t, scenario.costs.penalty, params)

    contacts = ocp.schedule.contacts_at(t)
    stance_speed = 0.0
    margin = float("inf")
    swing_force = 0.0
    for leg in range(mdl.NUM_LEGS):
        if contacts[leg]:
            fk = mdl.foot_kinematics(x, u_applied, leg, params)
            stance_speed = max(stance_speed, float(np.linalg.norm(fk.vel)))
            margin = min(margin, cone_margin(u_applied[mdl.force_slice(leg)],
                                             scenario.costs.friction.mu_c))
        else:
            swing_force = max(swing_force, float(
                np.abs(u_applied[mdl.force_slice(leg)]).max()))

    x_d = ocp.reference.desired_state(t)
    track_err = float(np.linalg.norm(x[3:5] - x_d[3:5]))

    metrics.t.append(round(t, 6))
    metrics.min_distance.append(d_min)
    metrics.true_min_distance.append(true_min_distance(scenario, x, t, params))
    metrics.penalty.append(pen)
    metrics.base_pose.append([float(x[3]), float(x[4]), float(x[5]),
                              float(x[0]), float(x[1]), float(x[2])])
    metrics.tracking_error.append(track_err)
    metrics.stance_speed.append(stance_speed)
    metrics.cone_margin.append(margin if margin != float("inf") else 0.0)
    metrics.swing_force.append(swing_force)
    metrics.step_size.append(stats.step_size)
    metrics.degraded.append(stats.degraded)
    metrics.solve_ms.append(solve_ms)
    metrics.phase_ms.append({
        "rollout": stats.rollout_ms,
        "linearization": stats.linearization_ms,
        "backward_pass": stats.backward_pass_ms,
        "line_search": stats.line_search_ms,
    })
    metrics.penalty_eval_ms.append(stats.penalty_eval_ms)


def _teleop_state_record(scenario, params, ocp, snap, x, policy, t, cmd,
                         metrics, solve_ms):
    centers, _ = mdl.sphere_centers(x, params)
    horizon_ts = np.linspace(t, t + scenario.costs.horizon, 21)
    planned = [[float(policy.nominal_state(tt)[3]),
                float(policy.nominal_state(tt)[4])] for tt in horizon_ts]
    commanded = [[float(ocp.reference.desired_planar(tt)[0]),
                  float(ocp.reference.desired_planar(tt)[1])]
                 for tt in horizon_ts]
    return {
        "type": "state",
        "t": round(t, 4),
        "base": {"x": float(x[3]), "y": float(x[4]), "z": float(x[5]),
                 "roll": float(x[0]), "pitch": float(x[1]), "yaw": float(x[2])},
        "joints": [float(v) for v in x[12:24]],
        "spheres": [{"x": float(c[0]), "y": float(c[1]), "z": float(c[2]),
                     "r": float(r)}
                    for c, r in zip(centers, params.sphere_radii)],
        "planned": planned,
        "commanded": commanded,
        "obstacles": [{"id": int(c.id), "x": float(c.position[0]),
                       "y": float(c.position[1]), "r": float(c.radius),
                       "vx": float(c.velocity[0]), "vy": float(c.velocity[1])}
                      for c in snap.cylinders],
        "min_distance": metrics.min_distance[-1],
        "penalty": metrics.penalty[-1],
        "base_height_nominal": float(params.nominal_height),
        "cmd": {"vx": float(cmd[0]), "vy": float(cmd[1]), "yaw_rate": float(cmd[2])},
        "solve_ms": round(solve_ms, 3),
    }


# --------------------------------------------------------------------------
# builtin scenarios
# --------------------------------------------------------------------------

def _floor():
    return {"type": "floor", "z": 0.0}


def _corridor_scene(params, epsilon):
    """Narrow static passage: width = robot width + 2 eps + 0.1, offset from
    the robot's straight-ahead path so the blind reference clips a wall."""
    width = 2 * params.half_width() + 2 * epsilon + 0.1
    y_center = 0.25
    lo = y_center - width / 2
    hi = y_center + width / 2
    return scene_from_dict({"primitives": [
        _floor(),
        {"type": "box", "min": [1.2, lo - 0.3, 0.0], "max": [3.6, lo, 1.2],
         "id": "wall_right"},
        {"type": "box", "min": [1.2, hi, 0.0], "max": [3.6, hi + 0.3, 1.2],
         "id": "wall_left"},
    ]})


def scenario_corridor(seed=0):
    params = mdl.ModelParams()
    eps = 0.10
    costs = CostParams(penalty=PenaltyParams(mu=1000.0, epsilon=eps))
    return Scenario(
        name="corridor",
        scene=_corridor_scene(params, eps),
        esdf_bounds=((-1.0, -2.0, -0.2), (6.0, 2.4, 1.4)),
        duration=16.0,
        command=CommandTimeline([(0.0, 0.3, 0.0, 0.0)]),
        costs=costs,
        model=params,
        seed=seed,
        goal_x=4.2,
    )


def scenario_overhang(seed=0):
    """Overhanging slab the robot must duck under (underside at 0.68 m,
    desk-scale stand-in for the ducking experiment)."""
    params = mdl.ModelParams()
    costs = CostParams(penalty=PenaltyParams(mu=2000.0, epsilon=0.10))
    scene = scene_from_dict({"primitives": [
        _floor(),
        {"type": "box", "min": [2.0, -1.5, 0.68], "max": [2.6, 1.5, 1.2],
         "id": "overhang"},
    ]})
    return Scenario(
        name="overhang",
        scene=scene,
        esdf_bounds=((-1.0, -2.0, -0.2), (6.0, 2.0, 1.6)),
        duration=15.0,
        command=CommandTimeline([(0.0, 0.3, 0.0, 0.0)]),
        costs=costs,
        model=params,
        seed=seed,
        goal_x=4.5,
    )


def _crossing(name, speed, y0, seed):
    params = mdl.ModelParams()
    costs = CostParams(penalty=PenaltyParams(mu=1000.0, epsilon=0.10))
    scene = scene_from_dict({"primitives": [_floor()]})
    obstacles = [
        ScriptedObstacle(id=1, radius=0.30, start=np.array([2.5, y0]),
                         velocity=np.array([0.0, -speed])),
        ScriptedObstacle(id=2, radius=0.30, start=np.array([2.2, -y0]),
                         velocity=np.array([0.0, speed])),
    ]
    return Scenario(
        name=name,
        scene=scene,
        esdf_bounds=((-1.0, -1.5, -0.2), (6.0, 1.5, 1.4)),
        duration=22.0,
        obstacles=obstacles,
        command=CommandTimeline([(0.0, 0.3, 0.0, 0.0)]),
        costs=costs,
        model=params,
        seed=seed,
        obs_noise=0.02,
        goal_x=4.0,
    )


def scenario_crossing_fast(seed=0):
    """Two cylinders converge on the path at 0.5 m/s: the robot has to let
    them pass (forward progress stalls or reverses)."""
    return _crossing("crossing_fast", 0.5, 3.3, seed)


def scenario_crossing_slow(seed=0):
    """Same geometry at 0.2 m/s: the gap stays open long enough to walk
    through without yielding."""
    return _crossing("crossing_slow", 0.2, 3.0, seed)


def scenario_clutter_noisy(seed=0):
    """Static clutter sensed as noisy dynamic detections, hardware-like
    margin eps = 0.15. Columns alternate sides of the commanded path with
    generous far-side gaps so the weave is feasible despite the noise."""
    params = mdl.ModelParams()
    costs = CostParams(penalty=PenaltyParams(
        mu=1000.0, epsilon=col.DEFAULT_EPSILON_NOISY))
    scene = scene_from_dict({"primitives": [
        _floor(),
        {"type": "box", "min": [0.5, 1.5, 0.0], "max": [7.0, 1.8, 1.2],
         "id": "wall_left"},
        {"type": "box", "min": [0.5, -1.8, 0.0], "max": [7.0, -1.5, 1.2],
         "id": "wall_right"},
    ]})
    cols = [(1, 2.0, 0.65), (2, 3.4, -0.65), (3, 4.8, 0.65), (4, 6.2, -0.65)]
    obstacles = [ScriptedObstacle(id=i, radius=0.28,
                                  start=np.array([cx, cy]),
                                  velocity=np.zeros(2))
                 for i, cx, cy in cols]
    return Scenario(
        name="clutter_noisy",
        scene=scene,
        esdf_bounds=((-1.0, -2.2, -0.2), (8.0, 2.2, 1.4)),
        duration=30.0,
        obstacles=obstacles,
        command=CommandTimeline([(0.0, 0.25, 0.0, 0.0)]),
        costs=costs,
        model=params,
        seed=seed,
        obs_noise=0.05,
        goal_x=6.8,
    )


def scenario_open_floor(seed=0):
    params = mdl.ModelParams()
    return Scenario(
        name="open_floor",
        scene=scene_from_dict({"primitives": [_floor()]}),
        esdf_bounds=((-2.0, -2.0, -0.2), (2.0, 2.0, 1.2)),
        duration=5.0,
        command=CommandTimeline([(0.0, 0.0, 0.0, 0.0)]),
        gait=GaitParams(kind="stand"),
        model=params,
        seed=seed,
    )


BUILTIN_SCENARIOS = {
    "corridor": scenario_corridor,
    "overhang": scenario_overhang,
    "crossing_fast": scenario_crossing_fast,
    "crossing_slow": scenario_crossing_slow,
    "clutter_noisy": scenario_clutter_noisy,
    "open_floor": scenario_open_floor,
}


def builtin_scenarios():
    """Names of the built-in scenario set."""
    return dict(BUILTIN_SCENARIOS)


def make_scenario(name, seed=None):
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError(f"unknown builtin scenario {name!r}; "
                          f"available: {sorted(BUILTIN_SCENARIOS)}")
    sc = BUILTIN_SCENARIOS[name]() if seed is None else BUILTIN_SCENARIOS[name](seed)
    return sc


def scenario_from_dict(data):
    """Scenario from a JSON-style dict (documented schema in the README)."""
    try:
        scene = scene_from_dict(data["scene"])
        obstacles = []
        for ob in data.get("obstacles", []):
            obstacles.append(ScriptedObstacle(
                id=int(ob["id"]), radius=float(ob["radius"]),
                start=np.asarray(ob["start"], dtype=float),
                velocity=np.asarray(ob.get("velocity", [0, 0]), dtype=float),
                segments=[tuple(seg) for seg in ob.get("segments", [])]))
        if data.get("command") == "teleop":
            command = "teleop"
        else:
            pts = data.get("command", {}).get("points", [[0, 0, 0, 0]])
            command = CommandTimeline([tuple(p) for p in pts])
        gait_cfg = data.get("gait", {})
        gait = GaitParams(kind=gait_cfg.get("kind", "trot"),
                          stride=float(gait_cfg.get("stride", 0.8)),
                          duty=float(gait_cfg.get("duty", 0.5)),
                          settle=float(gait_cfg.get("settle", 0.4)),
                          swing_apex=float(gait_cfg.get("swing_apex", 0.10)))
        pen_cfg = data.get("penalty", {})
        costs = CostParams(penalty=PenaltyParams(
            mu=float(pen_cfg.get("mu", col.DEFAULT_MU)),
            epsilon=float(pen_cfg.get("epsilon", col.DEFAULT_EPSILON))))
        model = mdl.model_params_from_dict(data.get("model", {}))
        bounds = data.get("esdf_bounds")
        if bounds is None:
            raise ConfigError("scenario needs esdf_bounds [[lo],[hi]]")
        return Scenario(
            name=data.get("name", "custom"),
            scene=scene,
            duration=float(data["duration"]),
            esdf_bounds=(tuple(bounds[0]), tuple(bounds[1])),
            obstacles=obstacles,
            command=command,
            gait=gait,
            costs=costs,
            model=model,
            seed=int(data.get("seed", 0)),
            voxel_size=float(data.get("voxel_size", 0.10)),
            obs_noise=float(data.get("obs_noise", 0.0)),
            obs_rate=float(data.get("obs_rate", DEFAULT_OBS_RATE)),
            start_xy=tuple(data.get("start_xy", (0.0, 0.0))),
            start_yaw=float(data.get("start_yaw", 0.0)),
            goal_x=data.get("goal_x"),
            state_noise=float(data.get("state_noise", 0.0)),
            command_latency=float(data.get("command_latency", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_scenario(path):
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def resolve_scenario(name_or_path, seed=None, duration=None):
    """Builtin name or JSON path -> Scenario, with optional overrides."""
    if name_or_path in BUILTIN_SCENARIOS:
        sc = make_scenario(name_or_path, seed=seed)
    else:
        sc = load_scenario(name_or_path)
        if seed is not None:
            sc = replace(sc, seed=seed)
    if duration is not None:
        sc = replace(sc, duration=float(duration))
    return sc
