"""Configuration space: robot model, validity, metric, local planner and samplers.

A configuration is a workspace position plus an orientation whose form depends
on the robot's rotational freedom:

* ``"none"``   -- translation only, orientation is ``None``
* ``"planar"`` -- a 2D heading angle in (-pi, pi]
* ``"3d"``     -- a unit quaternion (w, x, y, z) with w >= 0
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (
    BOX,
    ConvexShape,
    EnvironmentGeometry,
    GeometryError,
    Placement,
    quat_normalize,
    rotation_matrix,
)

__all__ = [
    "Configuration",
    "Environment",
    "Query",
    "RobotModel",
    "SceneError",
    "TreeRoadmap",
    "ValidityCounter",
    "distance",
    "extend",
    "interpolate",
    "is_valid",
    "load_scene",
    "nearest_neighbor",
    "sample_in_region",
    "sample_uniform",
    "save_scene",
    "scene_from_dict",
    "validate_edge",
    "wrap_angle",
]

SCENE_FORMAT = "hasrrt-scene/1"
ROTATIONS = ("none", "planar", "3d")
_TWO_PI = 2.0 * math.pi


class SceneError(ValueError):
    """A scene file or in-memory scene violates its schema or invariants."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(theta, _TWO_PI)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True, eq=False)
class Configuration:
    position: np.ndarray
    orientation: float | np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(-1)
        if not np.all(np.isfinite(pos)):
            raise GeometryError(f"non-finite configuration position {pos.tolist()}")
        object.__setattr__(self, "position", pos)
        ori = self.orientation
        if ori is None:
            return
        if np.ndim(ori) == 0:
            ori = float(ori)
            if not math.isfinite(ori):
                raise GeometryError("non-finite heading")
            ori = wrap_angle(ori)
        else:
            ori = quat_normalize(np.asarray(ori, dtype=float).reshape(4))
            if ori[0] < 0:
                ori = -ori
        object.__setattr__(self, "orientation", ori)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        if not np.array_equal(self.position, other.position):
            return False
        a, b = self.orientation, other.orientation
        if a is None or b is None:
            return a is None and b is None
        return bool(np.array_equal(np.asarray(a), np.asarray(b)))

    def __hash__(self):
        return hash(tuple(self.as_vector()))

    def as_vector(self) -> np.ndarray:
        if self.orientation is None:
            return self.position.copy()
        return np.concatenate([self.position, np.atleast_1d(self.orientation)])

    def to_json(self):
        ori = self.orientation
        if isinstance(ori, np.ndarray):
            ori = ori.tolist()
        return {"position": self.position.tolist(), "orientation": ori}

    @classmethod
    def from_json(cls, data) -> "Configuration":
        if isinstance(data, dict):
            return cls(data["position"], data.get("orientation"))
        return cls(data)


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Rigid robot: a union of convex parts sharing one local frame."""

    parts: tuple[ConvexShape, ...]
    rotation: str = "none"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise SceneError("robot needs at least one body part")
        if self.rotation not in ROTATIONS:
            raise SceneError(f"rotation must be one of {ROTATIONS}, got {self.rotation!r}")
        dim = parts[0].dim
        if any(p.dim != dim for p in parts):
            raise SceneError("robot parts have mixed dimensions")
        if self.rotation == "planar" and dim != 2:
            raise SceneError("planar rotation requires a 2D robot")
        if self.rotation == "3d" and dim != 3:
            raise SceneError("3d rotation requires a 3D robot")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    @property
    def dof(self) -> int:
        return self.dim + {"none": 0, "planar": 1, "3d": 3}[self.rotation]

    @property
    def rotation_weight(self) -> float:
        """Scale applied to angular displacement in the metric (circumradius)."""
        return max(p.circumradius() for p in self.parts)

    def to_dict(self) -> dict:
        return {"parts": [p.to_dict() for p in self.parts], "rotation": self.rotation}

    @classmethod
    def from_dict(cls, data: dict) -> "RobotModel":
        return cls(tuple(ConvexShape.from_dict(p) for p in data["parts"]), data.get("rotation", "none"))


@dataclass(frozen=True)
class Query:
    start: Configuration
    goal: Configuration
    goal_tolerance: float

    def __post_init__(self):
        if not self.goal_tolerance > 0:
            raise SceneError("goal_tolerance must be positive")


@dataclass
class ValidityCounter:
    """Counts single-configuration validity tests (collision-detection calls)."""

    cd_calls: int = 0


@dataclass(frozen=True, eq=False)
class Environment:
    """A planning scene: workspace geometry, robot, query and scene-level defaults."""

    geometry: EnvironmentGeometry
    robot: RobotModel
    query: Query | None = None
    resolution: float | None = None
    skeleton_spacing: float | None = None
    name: str = "scene"
    planner_defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.robot.dim != self.geometry.dim:
            raise SceneError(
                f"{self.robot.dim}D robot in a {self.geometry.dim}D environment"
            )
        shortest = float(self.geometry.extent.min())
        if self.resolution is None:
            object.__setattr__(self, "resolution", shortest / 100.0)
        if self.skeleton_spacing is None:
            object.__setattr__(self, "skeleton_spacing", shortest / 50.0)
        if not self.resolution > 0:
            raise SceneError("resolution must be positive")
        # per-part local arrays, cached for the hot validity path
        object.__setattr__(
            self,
            "_parts",
            tuple((p.vertices, p.normals, p.edges, p.kind == BOX) for p in self.robot.parts),
        )

    @property
    def dim(self) -> int:
        return self.geometry.dim

    def check_query(self) -> None:
        if self.query is None:
            raise SceneError("scene has no query")
        probe = ValidityCounter()
        for label, q in (("start", self.query.start), ("goal", self.query.goal)):
            if q.position.size != self.dim:
                raise SceneError(f"{label} has the wrong dimension")
            if not is_valid(q, self, probe):
                raise SceneError(f"{label} configuration {q.to_json()} is not valid")


# --------------------------------------------------------------------------
# validity and metric
# --------------------------------------------------------------------------


def is_valid(q: Configuration, env: Environment, counter: ValidityCounter) -> bool:
    """Collision-free and inside the boundary. Counts exactly one CD call."""
    counter.cd_calls += 1
    geo = env.geometry
    pos = q.position
    if q.orientation is None:
        for verts, normals, edges, is_box in env._parts:
            va = verts + pos
            if np.any(va < geo.lo) or np.any(va > geo.hi):
                return False
            if geo.placed_collides(va, normals, edges, aligned=is_box):
                return False
        return True
    rot = rotation_matrix(q.orientation, pos.size)
    for verts, normals, edges, _ in env._parts:
        va = verts @ rot.T + pos
        if np.any(va < geo.lo) or np.any(va > geo.hi):
            return False
        if geo.placed_collides(va, normals @ rot.T, edges @ rot.T):
            return False
    return True


def _angle_between(a, b) -> float:
    if a is None:
        return 0.0
    if isinstance(a, float):
        return abs(wrap_angle(b - a))
    dot = min(1.0, abs(float(np.dot(a, b))))
    return 2.0 * math.acos(dot)


def distance(a: Configuration, b: Configuration, rotation_weight: float = 1.0) -> float:
    """Euclidean positional distance plus ``rotation_weight`` times the rotation angle.

    Planners pass the robot's circumradius as the weight.
    """
    if a.position.size != b.position.size:
        raise GeometryError("configurations have different dimensions")
    lin = float(np.linalg.norm(a.position - b.position))
    if a.orientation is None:
        return lin
    return lin + rotation_weight * _angle_between(a.orientation, b.orientation)


def _slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b, dot = -b, -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + t * (b - a))
    theta = math.acos(dot)
    s = math.sin(theta)
    return (math.sin((1.0 - t) * theta) * a + math.sin(t * theta) * b) / s


def interpolate(a: Configuration, b: Configuration, t: float) -> Configuration:
    """Straight-line interpolation; rotations take the shortest arc."""
    pos = a.position + t * (b.position - a.position)
    ori = a.orientation
    if ori is None:
        return Configuration(pos)
    if isinstance(ori, float):
        return Configuration(pos, ori + t * wrap_angle(b.orientation - ori))
    return Configuration(pos, _slerp(ori, b.orientation, t))


def _ordered(a: Configuration, b: Configuration):
    # canonical endpoint order so edge checks do not depend on direction
    va, vb = a.as_vector(), b.as_vector()
    for x, y in zip(va, vb):
        if x != y:
            return (a, b) if x < y else (b, a)
    return a, b


def validate_edge(
    a: Configuration,
    b: Configuration,
    env: Environment,
    resolution: float,
    counter: ValidityCounter,
) -> bool:
    """Check the straight segment a-b at spacing <= ``resolution``, endpoints included.

    Stops at the first invalid configuration.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    a, b = _ordered(a, b)
    lam = env.robot.rotation_weight
    n = max(1, math.ceil(distance(a, b, lam) / resolution))
    for i in range(n + 1):
        if not is_valid(interpolate(a, b, i / n), env, counter):
            return False
    return True


def extend(
    q_near: Configuration,
    q_rand: Configuration,
    env: Environment,
    max_step: float,
    resolution: float,
    counter: ValidityCounter,
) -> Configuration | None:
    """Walk from ``q_near`` toward ``q_rand`` (at most ``max_step``) in ``resolution`` steps.

    Returns the last valid configuration reached, or ``None`` if the first step
    is already invalid (or there is nowhere to go).
    """
    if not max_step > 0:
        raise ValueError("max_step must be positive")
    lam = env.robot.rotation_weight
    total = distance(q_near, q_rand, lam)
    if total == 0.0:
        return None
    if total <= max_step:
        target, length = q_rand, total
    else:
        target, length = interpolate(q_near, q_rand, max_step / total), max_step
    last = None
    k = 1
    while True:
        s = min(k * resolution, length)
        q = target if s >= length else interpolate(q_near, target, s / length)
        if not is_valid(q, env, counter):
            break
        last = q
        if s >= length:
            break
        k += 1
    return last


# --------------------------------------------------------------------------
# tree storage and nearest neighbor
# --------------------------------------------------------------------------


class TreeRoadmap:
    """Rooted tree of configurations with parent links and edge costs.

    Vertex ids are insertion indices; the root is vertex 0. Positions and
    orientations are mirrored into growable arrays for vectorized
    nearest-neighbor scans.
    """

    def __init__(self, root: Configuration, rotation_weight: float = 1.0):
        self.rotation_weight = rotation_weight
        self.vertices: list[Configuration] = []
        self.parent: dict[int, tuple[int, float]] = {}
        dim = root.position.size
        self._pos = np.empty((64, dim))
        ori = root.orientation
        self._ori_kind = None if ori is None else ("planar" if isinstance(ori, float) else "3d")
        self._ori = np.empty((64, 1 if self._ori_kind == "planar" else 4))
        self._add(root)

    @property
    def root(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.vertices)

    def _add(self, q: Configuration) -> int:
        n = len(self.vertices)
        if n == len(self._pos):
            self._pos = np.concatenate([self._pos, np.empty_like(self._pos)])
            self._ori = np.concatenate([self._ori, np.empty_like(self._ori)])
        self._pos[n] = q.position
        if self._ori_kind is not None:
            self._ori[n] = q.orientation
        self.vertices.append(q)
        return n

    def add(self, q: Configuration, parent: int, cost: float) -> int:
        if not 0 <= parent < len(self.vertices):
            raise KeyError(f"unknown parent vertex {parent}")
        vid = self._add(q)
        self.parent[vid] = (parent, cost)
        return vid

    def edges(self):
        for child, (par, _) in sorted(self.parent.items()):
            yield par, child

    def positions(self) -> np.ndarray:
        return self._pos[: len(self.vertices)]

    def distances_to(self, q: Configuration) -> np.ndarray:
        n = len(self.vertices)
        d = np.linalg.norm(self._pos[:n] - q.position, axis=1)
        if self._ori_kind == "planar":
            diff = np.abs(np.remainder(self._ori[:n, 0] - q.orientation + math.pi, _TWO_PI) - math.pi)
            d = d + self.rotation_weight * diff
        elif self._ori_kind == "3d":
            dots = np.minimum(1.0, np.abs(self._ori[:n] @ q.orientation))
            d = d + self.rotation_weight * 2.0 * np.arccos(dots)
        return d

    def to_json(self) -> dict:
        return {
            "vertices": [q.to_json() for q in self.vertices],
            "parents": [self.parent[i][0] if i in self.parent else None for i in range(len(self))],
        }


def nearest_neighbor(tree: TreeRoadmap, q: Configuration) -> int:
    """Vertex id minimizing distance to ``q``; ties go to the lowest id."""
    if len(tree) == 0:
        raise ValueError("empty tree")
    return int(np.argmin(tree.distances_to(q)))


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _random_orientation(rotation: str, rng: np.random.Generator):
    if rotation == "planar":
        return float(rng.uniform(-math.pi, math.pi))
    if rotation == "3d":
        # Shoemake's uniform random unit quaternion
        u1, u2, u3 = rng.random(3)
        a, b = math.sqrt(1.0 - u1), math.sqrt(u1)
        q = np.array(
            [
                a * math.sin(_TWO_PI * u2),
                a * math.cos(_TWO_PI * u2),
                b * math.sin(_TWO_PI * u3),
                b * math.cos(_TWO_PI * u3),
            ]
        )
        return q
    return None


def sample_uniform(env: Environment, rng: np.random.Generator) -> Configuration:
    """Uniform position in the boundary box and uniform orientation; validity not checked."""
    geo = env.geometry
    pos = rng.uniform(geo.lo, geo.hi)
    return Configuration(pos, _random_orientation(env.robot.rotation, rng))


def sample_in_region(region, env: Environment, rng: np.random.Generator) -> Configuration:
    """Uniform position in the ball around ``region.center`` (clipped to the boundary).

    ``region`` needs ``center`` and ``radius`` attributes.
    """
    if not region.radius > 0:
        raise ValueError("region radius must be positive")
    dim = env.dim
    direction = rng.standard_normal(dim)
    norm = float(np.linalg.norm(direction))
    while norm == 0.0:
        direction = rng.standard_normal(dim)
        norm = float(np.linalg.norm(direction))
    r = region.radius * rng.random() ** (1.0 / dim)
    pos = np.asarray(region.center, dtype=float) + (r / norm) * direction
    pos = np.clip(pos, env.geometry.lo, env.geometry.hi)
    return Configuration(pos, _random_orientation(env.robot.rotation, rng))


# --------------------------------------------------------------------------
# scene files
# --------------------------------------------------------------------------


def _config_from_json(data, robot: RobotModel) -> Configuration:
    q = Configuration.from_json(data)
    if robot.rotation == "none":
        if q.orientation is not None:
            raise SceneError("translation-only robot cannot carry an orientation")
    elif robot.rotation == "planar":
        if q.orientation is None:
            q = Configuration(q.position, 0.0)
        elif not isinstance(q.orientation, float):
            raise SceneError("planar robot orientation must be a single angle")
    elif q.orientation is None:
        q = Configuration(q.position, np.array([1.0, 0.0, 0.0, 0.0]))
    elif isinstance(q.orientation, float):
        raise SceneError("3d robot orientation must be a quaternion [w, x, y, z]")
    return q


def scene_from_dict(data: dict, check: bool = True) -> Environment:
    """Build an ``Environment`` from the scene schema (see docs/formats.md)."""
    try:
        fmt = data.get("format", SCENE_FORMAT)
        if fmt != SCENE_FORMAT:
            raise SceneError(f"unsupported scene format {fmt!r}")
        boundary = data["boundary"]
        geometry = EnvironmentGeometry(
            np.asarray(boundary["lo"], dtype=float),
            np.asarray(boundary["hi"], dtype=float),
            tuple(ConvexShape.from_dict(o) for o in data.get("obstacles", [])),
        )
        robot = RobotModel.from_dict(data["robot"])
        query = None
        if data.get("query") is not None:
            qd = data["query"]
            query = Query(
                _config_from_json(qd["start"], robot),
                _config_from_json(qd["goal"], robot),
                float(qd["goal_tolerance"]),
            )
        env = Environment(
            geometry,
            robot,
            query,
            resolution=data.get("resolution"),
            skeleton_spacing=data.get("skeleton_spacing"),
            name=data.get("name", "scene"),
            planner_defaults=dict(data.get("planner", {})),
        )
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed scene: {exc!r}") from None
    except GeometryError as exc:
        raise SceneError(str(exc)) from None
    if check and env.query is not None:
        env.check_query()
    return env


def scene_to_dict(env: Environment) -> dict:
    out = {"format": SCENE_FORMAT, "name": env.name}
    out.update(env.geometry.to_dict())
    out["robot"] = env.robot.to_dict()
    if env.query is not None:
        out["query"] = {
            "start": env.query.start.to_json(),
            "goal": env.query.goal.to_json(),
            "goal_tolerance": env.query.goal_tolerance,
        }
    out["resolution"] = env.resolution
    out["skeleton_spacing"] = env.skeleton_spacing
    if env.planner_defaults:
        out["planner"] = dict(env.planner_defaults)
    return out


def load_scene(path, check: bool = True) -> Environment:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scene_from_dict(data, check=check)


def save_scene(env: Environment, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(env), indent=2) + "\n")
