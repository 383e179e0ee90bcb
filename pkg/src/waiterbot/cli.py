"""Command-line surface.

Subcommands: `map build`, `map dump`, `nav-goal`, `place`, `run`, `repl`,
`metrics diff`.  Exit codes: 0 success, 1 domain errors (no goal, no space,
unreachable, metrics mismatch), 2 usage or input-parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .furniture import Detection3D, FurnitureError, FurnitureLayer, FurnitureNotFound
from .geometry import Pose2D
from .grid import GridFormatError, inflate, load_grid
from .layers import LayerFormatError, dump_layers, load_layers
from .llm import BackendConfig, RemoteBackend
from .navgoal import NavGoalParams, NoGoalError, select_goal
from .placement import NoSpaceError, PlacementError, RansacParams, find_placement, load_cloud, ransac_plane
from .sim import PathError, RunConfig, ScenarioError, Simulation, load_scenario
from .tasks import build_prompts, default_registry, execute, render_trace

USAGE_EXIT = 2
DOMAIN_EXIT = 1


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path: str, kind: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {kind} {path}: {e}", USAGE_EXIT) from None


def _load_detection_log(path: str) -> list[list[Detection3D]]:
    try:
        doc = json.loads(_read(path, "detection log"))
        frames = []
        for entry in doc:
            frame = entry["frame"]
            frames.append(
                [
                    Detection3D(
                        class_name=b["class"],
                        center=tuple(b["center"]),
                        dims=tuple(b["dims"]),
                        yaw=b.get("yaw", 0.0),
                        frame_id=frame,
                    )
                    for b in entry["boxes"]
                ]
            )
        return frames
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CliError(f"bad detection log {path}: {e}", USAGE_EXIT) from None


def cmd_map_build(args) -> int:
    try:
        load_grid(_read(args.grid, "grid"))  # validates geometry early
    except GridFormatError as e:
        raise CliError(f"bad grid {args.grid}: {e}", USAGE_EXIT) from None
    layer = FurnitureLayer()
    for dets in _load_detection_log(args.detections):
        layer.track_frame(dets)
    if args.kitchen:
        try:
            layer.set_kitchen(args.kitchen)
        except FurnitureNotFound:
            raise CliError(f"kitchen id {args.kitchen!r} not in the layer", DOMAIN_EXIT) from None
    text = dump_layers(layer)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(layer.instances())} instances)")
    else:
        print(text, end="")
    return 0


def cmd_map_dump(args) -> int:
    try:
        layer, zones, humans = load_layers(_read(args.layers, "layer dump"))
    except LayerFormatError as e:
        raise CliError(f"bad layer dump {args.layers}: {e}", USAGE_EXIT) from None
    print(dump_layers(layer, zones, humans), end="")
    return 0


def _parse_pose(text: str) -> Pose2D:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"pose must be x,y,theta — got {text!r}", USAGE_EXIT)
    try:
        x, y, theta = (float(p) for p in parts)
    except ValueError:
        raise CliError(f"pose must be numeric — got {text!r}", USAGE_EXIT) from None
    return Pose2D(x, y, theta)


def cmd_nav_goal(args) -> int:
    try:
        grid = load_grid(_read(args.map, "grid"))
    except GridFormatError as e:
        raise CliError(f"bad grid {args.map}: {e}", USAGE_EXIT) from None
    try:
        layer, _, _ = load_layers(_read(args.layers, "layer dump"))
    except LayerFormatError as e:
        raise CliError(f"bad layer dump {args.layers}: {e}", USAGE_EXIT) from None
    robot = _parse_pose(args.robot)
    try:
        target = layer.get(args.furniture)
    except FurnitureNotFound:
        raise CliError(f"unknown furniture id {args.furniture!r}", DOMAIN_EXIT) from None
    params = NavGoalParams()
    combined = layer.virtual_obstacles(grid)
    risk = inflate(combined, params.robot_radius)
    try:
        goal = select_goal(combined, risk, target, robot, params, instances=layer.instances())
    except NoGoalError as e:
        raise CliError(f"no goal: {e}", DOMAIN_EXIT) from None
    print(f"cell: ({goal.cell.col}, {goal.cell.row})")
    print(f"pose: x={goal.pose.x:.3f} y={goal.pose.y:.3f} theta={goal.pose.theta:.3f}")
    print(f"cost: {goal.cost}")
    return 0


def cmd_place(args) -> int:
    try:
        cloud = load_cloud(_read(args.cloud, "cloud"))
    except PlacementError as e:
        raise CliError(f"bad cloud {args.cloud}: {e}", USAGE_EXIT) from None
    params = RansacParams(seed=args.seed)
    try:
        plane, inliers = ransac_plane(cloud, params)
        spot = find_placement(cloud, plane, inliers, object_radius=args.radius)
    except NoSpaceError as e:
        raise CliError(f"no space: {e}", DOMAIN_EXIT) from None
    except PlacementError as e:
        raise CliError(f"plane fit failed: {e}", DOMAIN_EXIT) from None
    n = plane.normal
    print(f"plane: n=({n[0]:.6f}, {n[1]:.6f}, {n[2]:.6f}) d={plane.d:.6f} inliers={len(inliers)}")
    print(f"placement: ({spot[0]:.4f}, {spot[1]:.4f}, {spot[2]:.4f})")
    return 0


def _backend_for(args, registry, menu):
    if args.backend == "rules":
        return None  # Pipeline defaults to the rule backend
    try:
        config = BackendConfig(mode="remote", endpoint=args.endpoint, model=args.model)
    except ValueError as e:
        raise CliError(str(e), USAGE_EXIT) from None
    prompts = build_prompts("A small restaurant with customer tables and one kitchen table.",
                            registry, menu)
    return RemoteBackend(config, prompts)


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        raise CliError(str(e), USAGE_EXIT) from None
    registry = default_registry()
    backend = _backend_for(args, registry, scenario.menu)
    sim = Simulation(scenario, RunConfig(mode=args.mode, seed=args.seed),
                     registry=registry, backend=backend)
    try:
        metrics, log = sim.run()
    except ScenarioError as e:
        raise CliError(str(e), DOMAIN_EXIT) from None
    if args.log:
        Path(args.log).write_text("\n".join(log) + "\n")
    if args.metrics_out:
        Path(args.metrics_out).write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    print(metrics.render())
    return 0


def cmd_repl(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        raise CliError(str(e), USAGE_EXIT) from None
    registry = default_registry()
    backend = _backend_for(args, registry, scenario.menu)
    sim = Simulation(scenario, RunConfig(mode=args.mode, seed=args.seed),
                     registry=registry, backend=backend)
    # bring the world up: apply map-building events, skip scripted interactions
    for ev in scenario.events:
        if ev["type"] == "detections":
            sim._apply_detections(ev)
        elif ev["type"] == "human":
            sim._apply_human(ev)
    tables = [i.id for i in sim.layer.instances() if i.id != sim.layer.kitchen_id]
    sim.caller = args.table or (tables[0] if tables else None)
    print(f"serving table: {sim.caller}  (:quit to exit)")
    while True:
        try:
            line = input("you> ")
        except EOFError:
            break
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            break
        parsed, response = sim.pipeline.handle(line)
        sim.current_task = parsed
        sim.current_response = response
        print(f"robot> {response}")
        slots = ", ".join(f"{k}={parsed.slots[k]}" for k in sorted(parsed.slots))
        print(f"task: {parsed.name}({slots}) confidence={parsed.confidence:.2f}")
        outcome = execute(parsed, registry, sim.simulate_skill)
        print(render_trace(outcome))
    return 0


def cmd_metrics_diff(args) -> int:
    docs = []
    for path in (args.a, args.b):
        try:
            docs.append(json.loads(_read(path, "metrics")))
        except json.JSONDecodeError as e:
            raise CliError(f"bad metrics file {path}: {e}", USAGE_EXIT) from None
    keys = sorted(set(docs[0]) | set(docs[1]))
    same = True
    for key in keys:
        a, b = docs[0].get(key), docs[1].get(key)
        if a != b:
            same = False
            print(f"{key}: {a} != {b}")
    if same:
        print("metrics identical")
        return 0
    return DOMAIN_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waiterbot",
                                     description="Layered-map waiter robot toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="build or dump the layered map")
    map_sub = p_map.add_subparsers(dest="map_command", required=True)
    p_build = map_sub.add_parser("build", help="track a detection log into a layer dump")
    p_build.add_argument("--grid", required=True)
    p_build.add_argument("--detections", required=True)
    p_build.add_argument("--kitchen", default=None)
    p_build.add_argument("--out", default=None)
    p_build.set_defaults(func=cmd_map_build)
    p_dump = map_sub.add_parser("dump", help="print a layer dump document")
    p_dump.add_argument("--layers", required=True)
    p_dump.set_defaults(func=cmd_map_dump)

    p_goal = sub.add_parser("nav-goal", help="pick a navigation goal next to furniture")
    p_goal.add_argument("--map", required=True)
    p_goal.add_argument("--layers", required=True)
    p_goal.add_argument("--furniture", required=True)
    p_goal.add_argument("--robot", required=True, help="x,y,theta")
    p_goal.set_defaults(func=cmd_nav_goal)

    p_place = sub.add_parser("place", help="fit a surface and pick a placement point")
    p_place.add_argument("--cloud", required=True)
    p_place.add_argument("--radius", type=float, required=True)
    p_place.add_argument("--seed", type=int, default=0)
    p_place.set_defaults(func=cmd_place)

    p_run = sub.add_parser("run", help="replay a scenario and print metrics")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--mode", choices=("parallel", "sequential"), default="parallel")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--log", default=None, help="write the event log to this file")
    p_run.add_argument("--metrics-out", default=None, help="write metrics JSON to this file")
    p_run.add_argument("--backend", choices=("rules", "remote"), default="rules")
    p_run.add_argument("--endpoint", default="")
    p_run.add_argument("--model", default="")
    p_run.set_defaults(func=cmd_run)

    p_repl = sub.add_parser("repl", help="interactive utterances against a scenario world")
    p_repl.add_argument("--scenario", required=True)
    p_repl.add_argument("--table", default=None)
    p_repl.add_argument("--mode", choices=("parallel", "sequential"), default="parallel")
    p_repl.add_argument("--seed", type=int, default=0)
    p_repl.add_argument("--backend", choices=("rules", "remote"), default="rules")
    p_repl.add_argument("--endpoint", default="")
    p_repl.add_argument("--model", default="")
    p_repl.set_defaults(func=cmd_repl)

    p_metrics = sub.add_parser("metrics", help="metrics file tools")
    metrics_sub = p_metrics.add_subparsers(dest="metrics_command", required=True)
    p_diff = metrics_sub.add_parser("diff", help="compare two metrics JSON files")
    p_diff.add_argument("a")
    p_diff.add_argument("b")
    p_diff.set_defaults(func=cmd_metrics_diff)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (GridFormatError, LayerFormatError, ScenarioError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except (NoGoalError, NoSpaceError, PathError, PlacementError, FurnitureError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DOMAIN_EXIT


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
