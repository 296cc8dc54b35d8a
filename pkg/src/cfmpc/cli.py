"""Command-line entry point: run scenarios, benchmark blind vs collision-free
MPC, dump distance fields, and serve the teleop bridge.

Exit codes: 0 = run completed with zero collisions and no solver aborts,
1 = completed but collided, 2 = configuration error, 3 = solver abort.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .collision import PenaltyParams
from .errors import CfmpcError, ConfigError, PortInUse, ScenarioAborted
from .sdf import build_esdf, load_esdf, load_scene
from .simulate import (
    CONTROL_PERIOD,
    CommandTimeline,
    builtin_scenarios,
    resolve_scenario,
    run_scenario,
)

log = logging.getLogger("cfmpc")

EXIT_OK = 0
EXIT_COLLIDED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _setup_logging():
    level = os.environ.get("CFMPC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


# -- artifact schemas ---------------------------------------------------------

def validate_metrics_doc(doc):
    """Schema check for metrics.json; raises ConfigError on violation."""
    required = {"cycles", "collision_count", "global_min_distance",
                "goal_time", "aborted", "series"}
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"metrics missing keys: {sorted(missing)}")
    series = doc["series"]
    n = doc["cycles"]
    for key in ("t", "min_distance", "true_min_distance", "penalty",
                "base_pose", "tracking_error", "stance_speed", "cone_margin",
                "swing_force", "step_size", "degraded"):
        if key not in series:
            raise ConfigError(f"metrics series missing {key!r}")
        if len(series[key]) != n:
            raise ConfigError(
                f"metrics series {key!r} has {len(series[key])} rows, "
                f"expected {n}")
    return True


def validate_timings_doc(doc):
    for key in ("cycles", "solve_ms_mean", "solve_ms_std", "phases"):
        if key not in doc:
            raise ConfigError(f"timings missing key {key!r}")
    return True


def validate_trajectory_row(row):
    for key in ("t", "state", "input", "min_distance", "penalty", "timings"):
        if key not in row:
            raise ConfigError(f"trajectory row missing {key!r}")
    if len(row["state"]) != 24 or len(row["input"]) != 24:
        raise ConfigError("trajectory state/input must be 24-dim")
    return True


def _write_artifacts(out_dir, metrics, trajectory):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_doc = metrics.deterministic_dict()
    timings_doc = metrics.timings_dict()
    validate_metrics_doc(metrics_doc)
    validate_timings_doc(timings_doc)
    (out / "metrics.json").write_text(
        json.dumps(metrics_doc, sort_keys=True, indent=1))
    (out / "timings.json").write_text(
        json.dumps(timings_doc, sort_keys=True, indent=1))
    with open(out / "trajectory.jsonl", "w") as f:
        for row in trajectory:
            validate_trajectory_row(row)
            f.write(json.dumps(row, sort_keys=True) + "\n")
    return out


# -- subcommands ---------------------------------------------------------------

def cmd_run(args):
    scenario = resolve_scenario(args.scenario, seed=args.seed,
                                duration=args.duration)
    log.info("running scenario %s for %.1f s (seed %d)", scenario.name,
             scenario.duration, scenario.seed)
    try:
        metrics, trajectory = run_scenario(scenario)
    except ScenarioAborted as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = _write_artifacts(args.out, metrics, trajectory)
    collisions = metrics.collision_count
    print(f"scenario {scenario.name}: {len(metrics.t)} cycles, "
          f"collisions={collisions}, min_distance="
          f"{metrics.global_min_distance:.3f} m, goal_time={metrics.goal_time}")
    print(f"artifacts written to {out}")
    return EXIT_OK if collisions == 0 else EXIT_COLLIDED


def run_benchmark(scenario_name, cycles, seed=None, back_and_forth=True):
    """Collision-free vs blind (mu = 0) timing comparison on one scenario.

    Returns a report dict with per-phase mean/std [ms] for both variants.
    Runs single-threaded, so the timings are serial by construction.
    """
    duration = cycles * CONTROL_PERIOD
    base = resolve_scenario(scenario_name, seed=seed, duration=duration)
    if back_and_forth:
        # keep the robot inside the cluttered region for the whole run
        leg_time = 24.0
        points, v, t = [], 0.25, 0.0
        while t < duration:
            points.append((t, v, 0.0, 0.0))
            v = -v
            t += leg_time
        base = replace(base, command=CommandTimeline(points), goal_x=None)

    report = {"scenario": base.name, "cycles": cycles, "variants": {}}
    for label, mu in (("collision_free", None), ("blind", 0.0)):
        sc = base
        if mu is not None:
            pen = PenaltyParams(mu=0.0, epsilon=sc.costs.penalty.epsilon)
            sc = replace(sc, costs=replace(sc.costs, penalty=pen))
        metrics, _ = run_scenario(sc, collect_log=False, cycle_limit=cycles)
        t = metrics.timings_dict()
        phases = {k: v for k, v in t["phases"].items()}
        total = np.array(metrics.solve_ms)
        report["variants"][label] = {
            "iterations": len(metrics.t),
            "phases_ms": phases,
            "total_ms_mean": float(total.mean()),
            "total_ms_std": float(total.std()),
            "penalty_eval_ms_mean": t["penalty_eval_ms_mean"],
        }
    cf = report["variants"]["collision_free"]
    bl = report["variants"]["blind"]
    report["overhead_ms"] = cf["total_ms_mean"] - bl["total_ms_mean"]
    report["overhead_ratio"] = report["overhead_ms"] / bl["total_ms_mean"]
    per_phase = {}
    for key in cf["phases_ms"]:
        per_phase[key] = cf["phases_ms"][key]["mean"] - bl["phases_ms"][key]["mean"]
    report["overhead_by_phase_ms"] = per_phase
    return report


def format_benchmark(report):
    lines = [f"benchmark on {report['scenario']} "
             f"({report['cycles']} solver iterations per variant)"]
    header = f"{'phase':<16}{'collision-free':>18}{'blind':>18}{'delta':>12}"
    lines.append(header)
    cf = report["variants"]["collision_free"]["phases_ms"]
    bl = report["variants"]["blind"]["phases_ms"]
    for key in ("rollout", "linearization", "backward_pass", "line_search"):
        lines.append(
            f"{key:<16}"
            f"{cf[key]['mean']:>10.2f} ±{cf[key]['std']:>5.2f} "
            f"{bl[key]['mean']:>10.2f} ±{bl[key]['std']:>5.2f} "
            f"{report['overhead_by_phase_ms'][key]:>10.2f}")
    cft = report["variants"]["collision_free"]
    blt = report["variants"]["blind"]
    lines.append(
        f"{'total':<16}"
        f"{cft['total_ms_mean']:>10.2f} ±{cft['total_ms_std']:>5.2f} "
        f"{blt['total_ms_mean']:>10.2f} ±{blt['total_ms_std']:>5.2f} "
        f"{report['overhead_ms']:>10.2f}")
    lines.append(
        f"{'penalty_eval':<16}"
        f"{cft['penalty_eval_ms_mean']:>10.2f}        "
        f"{blt['penalty_eval_ms_mean']:>10.2f}       ")
    lines.append(f"overhead ratio: {report['overhead_ratio'] * 100:.1f}% "
                 f"({report['overhead_ms']:.2f} ms)")
    return "\n".join(lines)


def cmd_benchmark(args):
    if args.cycles < 100:
        print("benchmark needs at least 100 cycles", file=sys.stderr)
        return EXIT_CONFIG
    report = run_benchmark(args.scenario, args.cycles, seed=args.seed)
    print(format_benchmark(report))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, sort_keys=True, indent=1))
        print(f"report written to {args.out}")
    return EXIT_OK


def cmd_esdf(args):
    scene = load_scene(args.scene)
    if args.bounds:
        vals = [float(v) for v in args.bounds.split(",")]
        if len(vals) != 6:
            raise ConfigError("--bounds needs 6 comma-separated numbers")
        bounds = (vals[0:3], vals[3:6])
    else:
        with open(args.scene) as f:
            doc = json.load(f)
        if "esdf_bounds" not in doc:
            raise ConfigError("scene file has no esdf_bounds; pass --bounds")
        bounds = (doc["esdf_bounds"][0], doc["esdf_bounds"][1])

    grid = build_esdf(scene, bounds, voxel_size=args.voxel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid_path = out / "grid.esdf"
    grid.dump(grid_path)
    # round-trip guard: the dump must reproduce queries bit-exactly
    reloaded = load_esdf(grid_path)
    probe = grid.origin + grid.voxel_size * np.array(grid.dims) / 2.0
    if reloaded.query(probe).distance != grid.query(probe).distance:
        raise ConfigError("ESDF dump round-trip mismatch")
    print(f"grid {grid.dims} voxels @ {grid.voxel_size} m -> {grid_path}")

    if args.slice is not None:
        layer, z_actual = grid.slice_distances(args.slice)
        csv_path = out / f"slice_z{z_actual:.2f}.csv"
        with open(csv_path, "w") as f:
            f.write(f"# origin_x={grid.origin[0]} origin_y={grid.origin[1]} "
                    f"z={z_actual} voxel={grid.voxel_size} "
                    f"nx={grid.dims[0]} ny={grid.dims[1]}\n")
            for row in layer:
                f.write(",".join(f"{v:.4f}" for v in row) + "\n")
        print(f"slice at z={z_actual:.2f} -> {csv_path}")
    return EXIT_OK


def cmd_teleop(args):
    from .teleop import TeleopServer
    scenario = resolve_scenario(args.scenario, seed=args.seed)
    server = TeleopServer(scenario, args.port,
                          allow_privileged=args.allow_privileged_port,
                          realtime=not args.fast)
    port = server.start_listener()
    print(f"teleop bridge on ws://127.0.0.1:{port} (scenario {scenario.name})")
    metrics = server.serve_forever()
    if metrics is not None:
        print(f"final metrics: cycles={len(metrics.t)} "
              f"collisions={metrics.collision_count} "
              f"min_distance={metrics.global_min_distance:.3f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfmpc",
        description="Collision-free whole-body MPC: scenarios, benchmark, "
                    "distance-field tools, teleop bridge.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario to completion")
    p_run.add_argument("scenario",
                       help=f"builtin ({', '.join(sorted(builtin_scenarios()))}) "
                            "or scenario JSON path")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--duration", type=float, default=None)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("benchmark",
                             help="collision-free vs blind solver timings")
    p_bench.add_argument("scenario", nargs="?", default="clutter_noisy")
    p_bench.add_argument("--cycles", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_benchmark)

    p_esdf = sub.add_parser("esdf", help="build and dump a distance field")
    p_esdf.add_argument("scene", help="scene JSON path")
    p_esdf.add_argument("--voxel", type=float, default=0.10)
    p_esdf.add_argument("--bounds", default=None,
                        help="x0,y0,z0,x1,y1,z1 (else scene esdf_bounds)")
    p_esdf.add_argument("--slice", type=float, default=None,
                        help="export a horizontal slice at this height as CSV")
    p_esdf.add_argument("--out", default="out")
    p_esdf.set_defaults(func=cmd_esdf)

    p_tel = sub.add_parser("teleop", help="serve the teleop bridge")
    p_tel.add_argument("scenario", nargs="?", default="open_floor")
    p_tel.add_argument("--port", type=int, default=8765)
    p_tel.add_argument("--seed", type=int, default=None)
    p_tel.add_argument("--allow-privileged-port", action="store_true")
    p_tel.add_argument("--fast", action="store_true",
                       help="run as fast as the solver allows (no pacing)")
    p_tel.set_defaults(func=cmd_teleop)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, PortInUse) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioAborted as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except CfmpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
