"""Workspace skeletons: storage, clearance annotation, query directing and pruning,
block-grid composition, and random perturbation.

A skeleton is an undirected graph embedded in the workspace. Each edge carries
an ordered list of intermediate points running from its source vertex position
to its target vertex position.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import ConvexShape, EnvironmentGeometry, point_clearance

__all__ = [
    "BlockSpec",
    "CompositionError",
    "DirectedQuerySkeleton",
    "NoSkeletonGuidance",
    "PerturbationSpec",
    "SkeletonEdge",
    "SkeletonError",
    "SkeletonVertex",
    "WorkspaceSkeleton",
    "annotate_clearance",
    "compose_blocks",
    "direct_and_prune",
    "load_blockgrid",
    "load_skeleton",
    "nearest_skeleton_vertex",
    "perturb_skeleton",
    "save_skeleton",
    "straight_intermediates",
]

SKELETON_FORMAT = "hasrrt-skeleton/1"
BLOCKGRID_FORMAT = "hasrrt-blockgrid/1"

_SPACING_SLACK = 1e-9
PERTURB_MAX_TRIES = 1000


class SkeletonError(ValueError):
    """Malformed skeleton file or violated skeleton invariant."""


class NoSkeletonGuidance(SkeletonError):
    """The query's source and sink vertices are not connected in the skeleton."""


class CompositionError(ValueError):
    """Block grid cannot be composed into an environment."""


def _geometry_of(env) -> EnvironmentGeometry:
    return env if isinstance(env, EnvironmentGeometry) else env.geometry


def straight_intermediates(a, b, spacing: float) -> np.ndarray:
    """Evenly spaced points from ``a`` to ``b`` (both included), gaps <= ``spacing``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(1, math.ceil(float(np.linalg.norm(b - a)) / spacing - 1e-12))
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    pts = a + t * (b - a)
    pts[0], pts[-1] = a, b
    return pts


@dataclass(eq=False)
class SkeletonVertex:
    id: int
    position: np.ndarray
    clearance: float | None = None

    def __eq__(self, other):
        return (
            isinstance(other, SkeletonVertex)
            and self.id == other.id
            and np.array_equal(self.position, other.position)
            and self.clearance == other.clearance
        )


@dataclass(eq=False)
class SkeletonEdge:
    source: int
    target: int
    intermediates: np.ndarray
    min_clearance: float | None = None

    def __eq__(self, other):
        return (
            isinstance(other, SkeletonEdge)
            and (self.source, self.target) == (other.source, other.target)
            and np.array_equal(self.intermediates, other.intermediates)
            and self.min_clearance == other.min_clearance
        )

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.intermediates, axis=0), axis=1).sum())


@dataclass(eq=False)
class WorkspaceSkeleton:
    vertices: dict[int, SkeletonVertex] = field(default_factory=dict)
    edges: list[SkeletonEdge] = field(default_factory=list)
    spacing: float = 1.0

    def __eq__(self, other):
        return (
            isinstance(other, WorkspaceSkeleton)
            and self.spacing == other.spacing
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    @property
    def dim(self) -> int | None:
        for v in self.vertices.values():
            return v.position.size
        return None

    def copy(self) -> "WorkspaceSkeleton":
        return WorkspaceSkeleton(
            {k: replace(v, position=v.position.copy()) for k, v in self.vertices.items()},
            [replace(e, intermediates=e.intermediates.copy()) for e in self.edges],
            self.spacing,
        )

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {vid: [] for vid in self.vertices}
        for e in self.edges:
            adj[e.source].append(e.target)
            adj[e.target].append(e.source)
        return adj

    def validate(self) -> None:
        """Raise ``SkeletonError`` naming the first vertex or edge that breaks an invariant."""
        dim = self.dim
        if not self.spacing > 0:
            raise SkeletonError("intermediate spacing must be positive")
        for vid, v in self.vertices.items():
            if vid != v.id:
                raise SkeletonError(f"vertex key {vid} does not match its id {v.id}")
            if v.position.shape != (dim,) or not np.all(np.isfinite(v.position)):
                raise SkeletonError(f"vertex {vid}: bad position {v.position.tolist()}")
            if v.clearance is not None and not v.clearance >= 0:
                raise SkeletonError(f"vertex {vid}: clearance must be >= 0")
        for i, e in enumerate(self.edges):
            name = f"edge {i} ({e.source}-{e.target})"
            if e.source not in self.vertices or e.target not in self.vertices:
                raise SkeletonError(f"{name}: references an unknown vertex")
            pts = e.intermediates
            if pts.ndim != 2 or pts.shape[1] != dim or len(pts) < 2:
                raise SkeletonError(f"{name}: needs at least two {dim}D intermediates")
            if not np.allclose(pts[0], self.vertices[e.source].position, atol=1e-9):
                raise SkeletonError(f"{name}: intermediates do not start at the source vertex")
            if not np.allclose(pts[-1], self.vertices[e.target].position, atol=1e-9):
                raise SkeletonError(f"{name}: intermediates do not end at the target vertex")
            gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            if gaps.max() > self.spacing * (1 + _SPACING_SLACK) + _SPACING_SLACK:
                raise SkeletonError(
                    f"{name}: intermediate gap {gaps.max():.6g} exceeds spacing {self.spacing:.6g}"
                )
            if e.min_clearance is not None and not e.min_clearance >= 0:
                raise SkeletonError(f"{name}: min_clearance must be >= 0")

    # ------------------------------------------------------------------ io

    def to_dict(self) -> dict:
        return {
            "format": SKELETON_FORMAT,
            "spacing": self.spacing,
            "vertices": [
                {"id": v.id, "position": v.position.tolist(), "clearance": v.clearance}
                for _, v in sorted(self.vertices.items())
            ],
            "edges": [
                {
                    "source": e.source,
                    "target": e.target,
                    "intermediates": e.intermediates.tolist(),
                    "min_clearance": e.min_clearance,
                }
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorkspaceSkeleton":
        try:
            fmt = data.get("format", SKELETON_FORMAT)
            if fmt != SKELETON_FORMAT:
                raise SkeletonError(f"unsupported skeleton format {fmt!r}")
            vertices = {}
            for vd in data["vertices"]:
                vid = int(vd["id"])
                if vid in vertices:
                    raise SkeletonError(f"duplicate vertex id {vid}")
                vertices[vid] = SkeletonVertex(
                    vid, np.asarray(vd["position"], dtype=float), vd.get("clearance")
                )
            edges = [
                SkeletonEdge(
                    int(ed["source"]),
                    int(ed["target"]),
                    np.asarray(ed["intermediates"], dtype=float),
                    ed.get("min_clearance"),
                )
                for ed in data["edges"]
            ]
            skel = cls(vertices, edges, float(data["spacing"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SkeletonError):
                raise
            raise SkeletonError(f"malformed skeleton: {exc!r}") from None
        skel.validate()
        return skel


def load_skeleton(path) -> WorkspaceSkeleton:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SkeletonError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return WorkspaceSkeleton.from_dict(data)


def save_skeleton(skel: WorkspaceSkeleton, path) -> None:
    Path(path).write_text(json.dumps(skel.to_dict(), indent=1) + "\n")


# ------------------------------------------------------------------ queries


def annotate_clearance(skel: WorkspaceSkeleton, env) -> WorkspaceSkeleton:
    """Copy of ``skel`` with vertex clearances and per-edge minimum clearances filled in.

    Points outside the boundary box get clearance 0.
    """
    geo = _geometry_of(env)
    if skel.dim is not None and skel.dim != geo.dim:
        raise SkeletonError(f"{skel.dim}D skeleton in a {geo.dim}D environment")

    def clear(p):
        return point_clearance(p, geo) if geo.contains_point(p) else 0.0

    out = skel.copy()
    for v in out.vertices.values():
        v.clearance = clear(v.position)
    for e in out.edges:
        e.min_clearance = min(clear(p) for p in e.intermediates)
    return out


def nearest_skeleton_vertex(skel: WorkspaceSkeleton, p) -> int:
    """Id of the vertex closest to ``p``; ties go to the lowest id."""
    if not skel.vertices:
        raise SkeletonError("skeleton has no vertices")
    p = np.asarray(p, dtype=float)
    ids = sorted(skel.vertices)
    pos = np.array([skel.vertices[i].position for i in ids])
    return ids[int(np.argmin(np.linalg.norm(pos - p, axis=1)))]


@dataclass(eq=False)
class DirectedQuerySkeleton(WorkspaceSkeleton):
    """Skeleton oriented from ``source`` toward ``sink`` and pruned to the paths between them."""

    source: int = -1
    sink: int = -1

    def out_edges(self, vid: int) -> list[int]:
        return [i for i, e in enumerate(self.edges) if e.source == vid]

    def __eq__(self, other):
        return (
            isinstance(other, DirectedQuerySkeleton)
            and WorkspaceSkeleton.__eq__(self, other)
            and (self.source, self.sink) == (other.source, other.sink)
        )


def _bfs_hops(adj: dict[int, list[int]], root: int) -> dict[int, int]:
    hops = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in hops:
                hops[v] = hops[u] + 1
                queue.append(v)
    return hops


def direct_between(skel: WorkspaceSkeleton, v_s: int, v_g: int) -> DirectedQuerySkeleton:
    """Orient and prune ``skel`` for a known source and sink vertex.

    Edges are oriented by breadth-first hop level from the source and edges
    joining vertices of equal level are dropped, so the result is acyclic.
    Only vertices and edges on some directed source-to-sink path survive.
    """
    adj = skel.adjacency()
    from_s = _bfs_hops(adj, v_s)
    if v_g not in from_s:
        raise NoSkeletonGuidance(f"skeleton vertices {v_s} and {v_g} are not connected")
    from_g = _bfs_hops(adj, v_g)
    keep = {v for v in skel.vertices if v in from_s and v in from_g}

    directed: list[SkeletonEdge] = []
    for e in skel.edges:
        u, v = e.source, e.target
        if u not in keep or v not in keep:
            continue
        if from_s[v] == from_s[u] + 1:
            directed.append(replace(e, intermediates=e.intermediates.copy()))
        elif from_s[u] == from_s[v] + 1:
            directed.append(replace(e, source=v, target=u, intermediates=e.intermediates[::-1].copy()))

    # backward reachability from the sink over the oriented edges
    preds: dict[int, list[int]] = {}
    for i, e in enumerate(directed):
        preds.setdefault(e.target, []).append(i)
    reaches_sink = {v_g}
    stack = [v_g]
    while stack:
        v = stack.pop()
        for i in preds.get(v, ()):
            u = directed[i].source
            if u not in reaches_sink:
                reaches_sink.add(u)
                stack.append(u)
    # every kept vertex already has a predecessor chain back to the source
    edges = [e for e in directed if e.source in reaches_sink and e.target in reaches_sink]
    vertices = {
        vid: replace(skel.vertices[vid], position=skel.vertices[vid].position.copy())
        for vid in sorted(reaches_sink)
    }
    return DirectedQuerySkeleton(vertices, edges, skel.spacing, source=v_s, sink=v_g)


def direct_and_prune(skel: WorkspaceSkeleton, start, goal) -> DirectedQuerySkeleton:
    """Query skeleton between the vertices nearest ``start`` and ``goal``.

    Raises ``NoSkeletonGuidance`` when those two vertices are disconnected.
    """
    if not skel.vertices:
        raise SkeletonError("skeleton has no vertices")
    v_s = nearest_skeleton_vertex(skel, start)
    v_g = nearest_skeleton_vertex(skel, goal)
    return direct_between(skel, v_s, v_g)


# ------------------------------------------------------------------ blocks

FACES = ("+x", "-x", "+y", "-y", "+z", "-z")
_AXIS = {"x": 0, "y": 1, "z": 2}


def _face_axis(face: str) -> tuple[int, int]:
    return _AXIS[face[1]], (1 if face[0] == "+" else -1)


@dataclass(frozen=True)
class BlockSpec:
    """A cubic (or square) cell of a block grid with its open faces."""

    cell: tuple[int, ...]
    open_faces: frozenset[str]

    def __post_init__(self):
        cell = tuple(int(c) for c in self.cell)
        if len(cell) not in (2, 3):
            raise CompositionError(f"block cell must have 2 or 3 coordinates, got {cell}")
        faces = frozenset(self.open_faces)
        allowed = FACES[: 2 * len(cell)]
        bad = faces - set(allowed)
        if bad:
            raise CompositionError(f"block {cell}: invalid faces {sorted(bad)} for a {len(cell)}D grid")
        object.__setattr__(self, "cell", cell)
        object.__setattr__(self, "open_faces", faces)


@dataclass(frozen=True)
class PerturbationSpec:
    d: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d >= 0):
            raise ValueError("perturbation distance must be finite and >= 0")


def compose_blocks(
    blocks: list[BlockSpec],
    block_side: float,
    wall_thickness: float | None = None,
    spacing: float | None = None,
) -> tuple[EnvironmentGeometry, WorkspaceSkeleton]:
    """Assemble block cells into walls plus a joined skeleton.

    Each closed face of a block becomes a wall slab lying inside that block.
    Cells of the grid's bounding box that hold no block are filled solid.
    The skeleton has a vertex at every block center and at every open face
    center; touching open faces share one vertex. Vertex ids follow sorted
    block order, centers first.
    """
    if not blocks:
        raise CompositionError("no blocks given")
    if not block_side > 0:
        raise CompositionError("block_side must be positive")
    t = block_side / 10.0 if wall_thickness is None else float(wall_thickness)
    if not 0 < t < block_side / 2:
        raise CompositionError("wall thickness must lie in (0, block_side/2)")
    spacing = block_side / 8.0 if spacing is None else float(spacing)
    dim = len(blocks[0].cell)
    by_cell: dict[tuple[int, ...], BlockSpec] = {}
    for b in blocks:
        if len(b.cell) != dim:
            raise CompositionError("blocks mix 2D and 3D cells")
        if b.cell in by_cell:
            raise CompositionError(f"two blocks at cell {b.cell}")
        by_cell[b.cell] = b
    if not any(b.open_faces for b in blocks):
        raise CompositionError("no traversable opening: every block is fully closed")

    faces = FACES[: 2 * dim]
    for cell, b in sorted(by_cell.items()):
        for face in faces:
            axis, sign = _face_axis(face)
            nb = list(cell)
            nb[axis] += sign
            other = by_cell.get(tuple(nb))
            if other is None:
                continue
            opposite = ("-" if sign > 0 else "+") + face[1]
            if (face in b.open_faces) != (opposite in other.open_faces):
                raise CompositionError(
                    f"blocks {cell} and {tuple(nb)} disagree on their shared face "
                    f"({face} {'open' if face in b.open_faces else 'closed'} vs "
                    f"{opposite} {'open' if opposite in other.open_faces else 'closed'})"
                )

    cells = np.array(sorted(by_cell))
    cmin, cmax = cells.min(axis=0), cells.max(axis=0)
    lo = cmin * block_side
    hi = (cmax + 1) * block_side

    obstacles: list[ConvexShape] = []
    for cell in itertools.product(*(range(a, b + 1) for a, b in zip(cmin, cmax))):
        c_lo = np.array(cell, dtype=float) * block_side
        c_hi = c_lo + block_side
        b = by_cell.get(cell)
        if b is None:
            obstacles.append(ConvexShape.box(c_lo, c_hi))
            continue
        for face in faces:
            if face in b.open_faces:
                continue
            axis, sign = _face_axis(face)
            s_lo, s_hi = c_lo.copy(), c_hi.copy()
            if sign > 0:
                s_lo[axis] = c_hi[axis] - t
            else:
                s_hi[axis] = c_lo[axis] + t
            obstacles.append(ConvexShape.box(s_lo, s_hi))
    geometry = EnvironmentGeometry(lo, hi, tuple(obstacles))

    vertices: dict[int, SkeletonVertex] = {}
    centers: dict[tuple[int, ...], int] = {}
    for cell in sorted(by_cell):
        vid = len(vertices)
        vertices[vid] = SkeletonVertex(vid, (np.array(cell, dtype=float) + 0.5) * block_side)
        centers[cell] = vid
    face_vertex: dict[tuple, int] = {}
    edges: list[SkeletonEdge] = []
    for cell in sorted(by_cell):
        b = by_cell[cell]
        center = vertices[centers[cell]].position
        for face in faces:
            if face not in b.open_faces:
                continue
            axis, sign = _face_axis(face)
            # a shared face is keyed by the lower cell of the pair
            low = list(cell)
            if sign < 0:
                low[axis] -= 1
            key = (tuple(low), axis)
            if key not in face_vertex:
                pos = center.copy()
                pos[axis] += sign * block_side / 2.0
                vid = len(vertices)
                vertices[vid] = SkeletonVertex(vid, pos)
                face_vertex[key] = vid
            fid = face_vertex[key]
            edges.append(
                SkeletonEdge(
                    centers[cell],
                    fid,
                    straight_intermediates(center, vertices[fid].position, spacing),
                )
            )
    return geometry, WorkspaceSkeleton(vertices, edges, spacing)


def blocks_from_dict(data: dict) -> tuple[list[BlockSpec], dict]:
    fmt = data.get("format", BLOCKGRID_FORMAT)
    if fmt != BLOCKGRID_FORMAT:
        raise CompositionError(f"unsupported block-grid format {fmt!r}")
    try:
        blocks = [BlockSpec(tuple(b["cell"]), frozenset(b.get("open", []))) for b in data["blocks"]]
        params = {
            "block_side": float(data["block_side"]),
            "wall_thickness": data.get("wall_thickness"),
            "spacing": data.get("spacing"),
        }
    except (KeyError, TypeError) as exc:
        raise CompositionError(f"malformed block grid: {exc!r}") from None
    return blocks, params


def load_blockgrid(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CompositionError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


# ------------------------------------------------------------------ perturbation


def perturb_skeleton(
    skel: WorkspaceSkeleton,
    spec: PerturbationSpec,
    env,
    start,
    goal,
) -> WorkspaceSkeleton:
    """Shift every vertex except those nearest ``start`` and ``goal`` by exactly ``spec.d``.

    Directions are uniform on the sphere and resampled until the new position
    lies in free workspace; after ``PERTURB_MAX_TRIES`` rejections the vertex
    stays put. Edges touching a moved vertex get fresh straight intermediates.
    Clearance annotations on moved parts are cleared.
    """
    if spec.d == 0 or not skel.vertices:
        return skel.copy()
    geo = _geometry_of(env)
    rng = np.random.default_rng(spec.seed)
    fixed = {nearest_skeleton_vertex(skel, start), nearest_skeleton_vertex(skel, goal)}
    out = skel.copy()
    moved = set()
    dim = skel.dim
    for vid in sorted(out.vertices):
        if vid in fixed:
            continue
        v = out.vertices[vid]
        for _ in range(PERTURB_MAX_TRIES):
            u = rng.standard_normal(dim)
            n = float(np.linalg.norm(u))
            if n == 0.0:
                continue
            cand = v.position + spec.d * (u / n)
            if geo.contains_point(cand) and point_clearance(cand, geo) > 0.0:
                v.position = cand
                v.clearance = None
                moved.add(vid)
                break
    for e in out.edges:
        if e.source in moved or e.target in moved:
            e.intermediates = straight_intermediates(
                out.vertices[e.source].position, out.vertices[e.target].position, out.spacing
            )
            e.min_clearance = None
    return out
