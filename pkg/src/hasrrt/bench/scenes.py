"""Scene assembly from block-grid files and bundled scene lookup."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from ..geometry import ConvexShape
from ..cspace import Configuration, Environment, Query, RobotModel, SceneError, scene_to_dict
from ..skeleton import (
    CompositionError,
    annotate_clearance,
    blocks_from_dict,
    compose_blocks,
    load_blockgrid,
)


def bundled(name: str) -> Path:
    """Path of a scene file shipped with the package (``data/scenes``)."""
    return Path(str(resources.files("hasrrt") / "data" / "scenes" / name))


def scene_from_blockgrid(data: dict, check: bool = True):
    """Compose a block grid into ``(Environment, annotated skeleton)``.

    The grid file may carry a robot, start and goal cells, and planner
    defaults; start and goal sit at their cell centers. Without a robot a
    small translating box is used, and without a query none is set.
    """
    blocks, params = blocks_from_dict(data)
    geometry, skel = compose_blocks(blocks, **params)
    side = params["block_side"]
    dim = geometry.dim
    try:
        if "robot" in data:
            robot = RobotModel.from_dict(data["robot"])
        else:  # a small translating box, enough to check the tunnels are passable
            robot = RobotModel((ConvexShape.centered_box([side / 10.0] * dim),), "none")
        query = None
        qd = data.get("query")
        if qd is not None:
            ori = qd.get("orientation")
            if ori is None and robot.rotation == "planar":
                ori = 0.0
            elif ori is None and robot.rotation == "3d":
                ori = [1.0, 0.0, 0.0, 0.0]
            start = Configuration((np.asarray(qd["start_cell"], float) + 0.5) * side, ori)
            goal = Configuration((np.asarray(qd["goal_cell"], float) + 0.5) * side, ori)
            query = Query(start, goal, float(qd["goal_tolerance"]))
    except KeyError as exc:
        raise CompositionError(f"block grid is missing {exc}") from None
    env = Environment(
        geometry,
        robot,
        query,
        resolution=data.get("resolution"),
        skeleton_spacing=skel.spacing,
        name=data.get("name", "blockgrid"),
        planner_defaults=dict(data.get("planner", {})),
    )
    if check and query is not None:
        try:
            env.check_query()
        except SceneError as exc:
            raise CompositionError(str(exc)) from None
    return env, annotate_clearance(skel, env)


def load_blockgrid_scene(path, check: bool = True):
    return scene_from_blockgrid(load_blockgrid(path), check=check)


def write_scene(env: Environment, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(env), indent=2) + "\n")
