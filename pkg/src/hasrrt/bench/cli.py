"""``hasrrt`` command line: plan, bench, perturb, gen-env, render.

Exit codes: 0 all runs succeeded, 1 at least one run failed, 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from ..cspace import SceneError, load_scene, save_scene
from ..planners import PLANNERS, PlannerConfig, PlannerSetupError, plan
from ..skeleton import (
    CompositionError,
    SkeletonError,
    annotate_clearance,
    load_blockgrid,
    load_skeleton,
    save_skeleton,
)
from .render import RenderError, render_svg
from .runner import ExperimentError, load_experiment, run_bench, run_perturb, write_outputs
from .scenes import bundled, scene_from_blockgrid

EXIT_OK, EXIT_RUN_FAILED, EXIT_INVALID = 0, 1, 2

_INPUT_ERRORS = (SceneError, SkeletonError, CompositionError, ExperimentError,
                 PlannerSetupError, RenderError, OSError)


def _resolve(path: str) -> Path:
    """A path as given, or the bundled scene of that name."""
    p = Path(path)
    if p.exists():
        return p
    b = bundled(p.name)
    if b.exists():
        return b
    raise FileNotFoundError(f"no such file: {path}")


def _load_scene_and_skeleton(scene_path: str, skeleton_path: str | None):
    """Scene files and block-grid files are both accepted as ``scene``."""
    path = _resolve(scene_path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    is_grid = isinstance(data, dict) and (
        str(data.get("format", "")).startswith("hasrrt-blockgrid")
        or ("blocks" in data and "boundary" not in data)
    )
    if is_grid:
        env, skel = scene_from_blockgrid(data)
    else:
        env, skel = load_scene(path), None
    if skeleton_path is not None:
        skel = load_skeleton(_resolve(skeleton_path))
        if skel.dim != env.dim:
            raise SkeletonError(f"{skel.dim}D skeleton for a {env.dim}D scene")
        skel = annotate_clearance(skel, env)
    return env, skel


def _sibling_skeleton(scene_path: str) -> str | None:
    """``<stem>.skeleton.json`` next to the scene, if there is one."""
    scene = _resolve(scene_path)
    candidate = scene.with_name(scene.stem + ".skeleton.json")
    return str(candidate) if candidate.exists() else None


def _cmd_plan(args) -> int:
    skeleton = args.skeleton
    if skeleton is None and args.planner != "rrt":
        skeleton = _sibling_skeleton(args.scene)
    env, skel = _load_scene_and_skeleton(args.scene, skeleton)
    if args.planner != "rrt" and skel is None:
        raise PlannerSetupError(
            f"planner {args.planner!r} requires a skeleton (--skeleton, or a "
            f"<scene>.skeleton.json next to the scene)")
    overrides = {"seed": args.seed, "time_limit": args.cap}
    if args.max_iterations is not None:
        overrides["max_iterations"] = args.max_iterations
    if args.success_rule is not None:
        overrides["success_rule"] = args.success_rule
    result = plan(args.planner, env, skel, PlannerConfig(**overrides))
    print(json.dumps(asdict(result.record)))
    if args.save:
        Path(args.save).write_text(result.dumps(include_tree=True) + "\n")
    if args.svg:
        Path(args.svg).write_text(render_svg(env, skel, result.to_json(), args.project))
    return EXIT_OK if result.record.success else EXIT_RUN_FAILED


def _finish_matrix(records, outdir, stem, key) -> int:
    csv_path, summary_path = write_outputs(records, outdir, stem, key)
    print(f"wrote {csv_path}")
    print(f"wrote {summary_path}")
    print(json.dumps(json.loads(summary_path.read_text()), indent=2))
    return EXIT_OK if all(r.success for r in records) else EXIT_RUN_FAILED


def _cmd_bench(args) -> int:
    spec = load_experiment(args.experiment)
    records, _ = run_bench(spec, workers=args.workers)
    return _finish_matrix(records, args.output or spec.output, f"{spec.name}_bench", "planner")


def _parse_d_list(text: str) -> list[float]:
    try:
        ds = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None
    if not ds or any(d < 0 for d in ds):
        raise argparse.ArgumentTypeError("d-list needs non-negative numbers")
    return ds


def _cmd_perturb(args) -> int:
    spec = load_experiment(args.experiment)
    records, _ = run_perturb(spec, args.d_list, args.region_radius, workers=args.workers)
    return _finish_matrix(records, args.output or spec.output, f"{spec.name}_perturb", "d")


def _cmd_gen_env(args) -> int:
    data = load_blockgrid(_resolve(args.blockgrid))
    env, skel = scene_from_blockgrid(data)
    save_scene(env, args.output)
    save_skeleton(skel, args.skeleton)
    print(f"wrote {args.output} ({len(env.geometry.obstacles)} obstacles)")
    print(f"wrote {args.skeleton} ({len(skel.vertices)} vertices, {len(skel.edges)} edges)")
    return EXIT_OK


def _cmd_render(args) -> int:
    env, skel = _load_scene_and_skeleton(args.scene, args.skeleton)
    run = None
    if args.tree:
        try:
            run = json.loads(Path(args.tree).read_text())
        except json.JSONDecodeError as exc:
            raise SceneError(f"{args.tree}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    Path(args.output).write_text(render_svg(env, skel, run, args.project))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hasrrt", description="Skeleton-guided RRT planning and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run one planner on a scene")
    p.add_argument("scene", help="scene or block-grid JSON (bundled names are found too)")
    p.add_argument("--skeleton", help="skeleton JSON")
    p.add_argument("--planner", required=True, choices=sorted(PLANNERS))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cap", type=float, default=60.0, help="wall-clock cap in seconds")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--success-rule", choices=["and", "or"])
    p.add_argument("--svg", help="write a picture of the run")
    p.add_argument("--save", help="write the full run (tree and path) as JSON")
    p.add_argument("--project", help="axis pair for 3D pictures, e.g. xy")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("bench", help="planner x seed matrix from an experiment file")
    p.add_argument("experiment")
    p.add_argument("--workers", type=int)
    p.add_argument("--output", help="output directory (default from the experiment)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("perturb", help="HAS-RRT under increasingly perturbed skeletons")
    p.add_argument("experiment")
    p.add_argument("--d-list", type=_parse_d_list, help="comma-separated distances, e.g. 0,2,4")
    p.add_argument("--region-radius", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("gen-env", help="compose a block grid into scene and skeleton files")
    p.add_argument("blockgrid")
    p.add_argument("-o", "--output", required=True, help="scene JSON to write")
    p.add_argument("-s", "--skeleton", required=True, help="skeleton JSON to write")
    p.set_defaults(func=_cmd_gen_env)

    p = sub.add_parser("render", help="draw a scene, skeleton and run as SVG")
    p.add_argument("scene")
    p.add_argument("--skeleton")
    p.add_argument("--tree", help="run JSON written by 'plan --save'")
    p.add_argument("--project", help="axis pair for 3D scenes, e.g. xy")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"hasrrt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
