"""Euclidean primitives: convex shapes, rigid placements, collision and clearance.

Shapes are closed sets. Two shapes that merely touch intersect, and a shape
flush against a boundary wall is still contained by it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

__all__ = [
    "BOX",
    "CONVEX",
    "ConvexShape",
    "EnvironmentGeometry",
    "GeometryError",
    "Placement",
    "boundary_contains",
    "point_clearance",
    "quat_mul",
    "quat_normalize",
    "quat_to_matrix",
    "rotation_matrix",
    "shapes_intersect",
]

BOX = "box"
CONVEX = "convex"

_QUAT_TOL = 1e-9


class GeometryError(ValueError):
    """Raised on dimension mismatches, malformed shapes, or out-of-domain queries."""


def _as_point(p, dim: int | None = None) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.size not in (2, 3):
        raise GeometryError(f"points must have 2 or 3 coordinates, got {arr.size}")
    if dim is not None and arr.size != dim:
        raise GeometryError(f"expected a {dim}D point, got {arr.size}D")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"non-finite coordinates: {arr.tolist()}")
    return arr


# --------------------------------------------------------------------------
# rotations
# --------------------------------------------------------------------------


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n == 0.0 or not math.isfinite(n):
        raise GeometryError("cannot normalize a zero or non-finite quaternion")
    if abs(n - 1.0) > _QUAT_TOL:
        q = q / n
    return q


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product ``a * b`` of (w, x, y, z) quaternions, renormalized on drift."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    out = np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )
    return quat_normalize(out)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_matrix(rotation, dim: int) -> np.ndarray:
    """Rotation matrix for a planar angle (2D) or a unit quaternion (3D).

    ``None`` stands for the identity.
    """
    if rotation is None:
        return np.eye(dim)
    if dim == 2:
        c, s = math.cos(rotation), math.sin(rotation)
        return np.array([[c, -s], [s, c]])
    return quat_to_matrix(rotation)


@dataclass(frozen=True)
class Placement:
    """Rigid transform: rotate about the local origin, then translate."""

    translation: np.ndarray
    rotation: float | np.ndarray | None = None

    def __post_init__(self):
        t = _as_point(self.translation)
        object.__setattr__(self, "translation", t)
        rot = self.rotation
        if rot is not None:
            if t.size == 2:
                rot = float(rot)
                if not math.isfinite(rot):
                    raise GeometryError("non-finite rotation angle")
            else:
                rot = np.asarray(rot, dtype=float).reshape(4)
                if abs(np.linalg.norm(rot) - 1.0) > _QUAT_TOL:
                    raise GeometryError("3D rotation must be a unit quaternion")
            object.__setattr__(self, "rotation", rot)

    @property
    def dim(self) -> int:
        return self.translation.size

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.rotation, self.dim)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.rotation is None:
            return points + self.translation
        return points @ self.matrix().T + self.translation


# --------------------------------------------------------------------------
# shapes
# --------------------------------------------------------------------------


def _dedupe_directions(dirs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Unit directions with antiparallel duplicates removed (axes, not rays)."""
    out: list[np.ndarray] = []
    for d in dirs:
        n = np.linalg.norm(d)
        if n < tol:
            continue
        d = d / n
        if any(abs(abs(float(d @ o)) - 1.0) < tol for o in out):
            continue
        out.append(d)
    return np.array(out)


@dataclass(frozen=True, eq=False)
class ConvexShape:
    """A convex polygon (2D) or polyhedron (3D) given by its vertices.

    ``normals`` holds the face normals used as separating-axis candidates;
    ``edges`` the edge directions (only needed in 3D).
    """

    vertices: np.ndarray
    kind: str = CONVEX
    normals: np.ndarray = field(default=None, repr=False)
    edges: np.ndarray = field(default=None, repr=False)
    # hull facets as (normal, offset) rows with normal . x + offset <= 0 inside
    facets: np.ndarray = field(default=None, repr=False)
    # 3D only: surface triangles for point distance queries
    triangles: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise GeometryError("vertices must be an (n, 2) or (n, 3) array")
        if not np.all(np.isfinite(v)):
            raise GeometryError("non-finite vertex coordinates")
        dim = v.shape[1]
        if self.kind == BOX:
            lo, hi = v.min(axis=0), v.max(axis=0)
            if np.any(hi - lo <= 0):
                raise GeometryError("degenerate box")
            corners = np.array(
                [[hi[k] if (i >> k) & 1 else lo[k] for k in range(dim)] for i in range(2**dim)]
            )
            eye = np.eye(dim)
            facets = np.vstack(
                [np.hstack([eye, -hi[:, None]]), np.hstack([-eye, lo[:, None]])]
            )
            object.__setattr__(self, "vertices", corners)
            object.__setattr__(self, "normals", eye)
            object.__setattr__(self, "edges", eye)
            object.__setattr__(self, "facets", facets)
            if dim == 3:
                object.__setattr__(self, "triangles", _box_triangles(corners))
            return
        if self.kind != CONVEX:
            raise GeometryError(f"unknown shape kind {self.kind!r}")
        try:
            hull = ConvexHull(v)
        except QhullError as exc:
            raise GeometryError(f"degenerate convex shape: {exc}") from None
        if len(hull.vertices) != len(v):
            raise GeometryError("vertices are not in convex position")
        if dim == 2:
            ordered = v[hull.vertices]  # counter-clockwise
            edge_vecs = np.roll(ordered, -1, axis=0) - ordered
            normals = np.column_stack([edge_vecs[:, 1], -edge_vecs[:, 0]])
            normals /= np.linalg.norm(normals, axis=1)[:, None]
            object.__setattr__(self, "vertices", ordered)
            object.__setattr__(self, "normals", normals)
            object.__setattr__(self, "edges", _dedupe_directions(edge_vecs))
        else:
            edge_vecs = np.concatenate(
                [v[s[[1, 2, 0]]] - v[s] for s in hull.simplices], axis=0
            )
            object.__setattr__(self, "vertices", v)
            object.__setattr__(self, "normals", _dedupe_directions(hull.equations[:, :3]))
            object.__setattr__(self, "edges", _dedupe_directions(edge_vecs))
            object.__setattr__(self, "triangles", v[hull.simplices])
        object.__setattr__(self, "facets", hull.equations)

    @classmethod
    def box(cls, lo, hi) -> "ConvexShape":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls(np.vstack([lo, hi]), kind=BOX)

    @classmethod
    def centered_box(cls, size) -> "ConvexShape":
        half = np.asarray(size, dtype=float) / 2.0
        return cls.box(-half, half)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def lo(self) -> np.ndarray:
        return self.vertices.min(axis=0)

    @property
    def hi(self) -> np.ndarray:
        return self.vertices.max(axis=0)

    def circumradius(self) -> float:
        """Largest distance from the local origin to a vertex."""
        return float(np.linalg.norm(self.vertices, axis=1).max())

    def contains_point(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(self.facets[:, :-1] @ p + self.facets[:, -1] <= tol))

    def to_dict(self) -> dict:
        if self.kind == BOX:
            return {"kind": BOX, "lo": self.lo.tolist(), "hi": self.hi.tolist()}
        return {"kind": CONVEX, "vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ConvexShape":
        kind = data.get("kind", CONVEX)
        if kind == BOX:
            return cls.box(data["lo"], data["hi"])
        return cls(np.asarray(data["vertices"], dtype=float), kind=kind)


def _box_triangles(corners: np.ndarray) -> np.ndarray:
    # corner index bits: 1 -> x, 2 -> y, 4 -> z
    quads = [
        (0, 2, 6, 4), (1, 3, 7, 5),  # x faces
        (0, 1, 5, 4), (2, 3, 7, 6),  # y faces
        (0, 1, 3, 2), (4, 5, 7, 6),  # z faces
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append(corners[[a, b, c]])
        tris.append(corners[[a, c, d]])
    return np.array(tris)


# --------------------------------------------------------------------------
# intersection
# --------------------------------------------------------------------------


def _placed(shape: ConvexShape, pl: Placement):
    if pl.rotation is None:
        return shape.vertices + pl.translation, shape.normals, shape.edges
    rot = pl.matrix()
    return shape.vertices @ rot.T + pl.translation, shape.normals @ rot.T, shape.edges @ rot.T


def _candidate_axes(na, nb, ea, eb, dim: int) -> np.ndarray:
    if dim == 2:
        return np.vstack([na, nb])
    cross = np.cross(ea[:, None, :], eb[None, :, :]).reshape(-1, 3)
    norms = np.linalg.norm(cross, axis=1)
    cross = cross[norms > 1e-12]
    return np.vstack([na, nb, cross])


def _overlap_on_all_axes(va, vb, axes) -> bool:
    pa = va @ axes.T
    pb = vb @ axes.T
    separated = (pa.max(axis=0) < pb.min(axis=0)) | (pb.max(axis=0) < pa.min(axis=0))
    return not bool(separated.any())


def shapes_intersect(a: ConvexShape, pa: Placement, b: ConvexShape, pb: Placement) -> bool:
    """True iff the two placed closed convex shapes share at least one point."""
    if not (a.dim == b.dim == pa.dim == pb.dim):
        raise GeometryError(
            f"dimension mismatch: shapes {a.dim}D/{b.dim}D, placements {pa.dim}D/{pb.dim}D"
        )
    va, na, ea = _placed(a, pa)
    vb, nb, eb = _placed(b, pb)
    if np.any(va.max(axis=0) < vb.min(axis=0)) or np.any(vb.max(axis=0) < va.min(axis=0)):
        return False
    return _overlap_on_all_axes(va, vb, _candidate_axes(na, nb, ea, eb, a.dim))


# --------------------------------------------------------------------------
# environment geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnvironmentGeometry:
    """Closed axis-aligned boundary box holding static convex obstacles (world frame)."""

    lo: np.ndarray
    hi: np.ndarray
    obstacles: tuple[ConvexShape, ...] = ()

    def __post_init__(self):
        lo = _as_point(self.lo)
        hi = _as_point(self.hi, lo.size)
        if np.any(hi <= lo):
            raise GeometryError("boundary box must have positive extent on every axis")
        obstacles = tuple(self.obstacles)
        for i, ob in enumerate(obstacles):
            if ob.dim != lo.size:
                raise GeometryError(f"obstacle {i} is {ob.dim}D in a {lo.size}D environment")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "obstacles", obstacles)
        if obstacles:
            ob_lo = np.array([ob.lo for ob in obstacles])
            ob_hi = np.array([ob.hi for ob in obstacles])
        else:
            ob_lo = ob_hi = np.empty((0, lo.size))
        object.__setattr__(self, "_ob_lo", ob_lo)
        object.__setattr__(self, "_ob_hi", ob_hi)
        is_box = np.array([ob.kind == BOX for ob in obstacles], dtype=bool)
        object.__setattr__(self, "_is_box", is_box)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def contains_point(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def in_free_space(self, p) -> bool:
        """Inside the boundary and strictly outside every obstacle."""
        return self.contains_point(p) and point_clearance(p, self) > 0.0

    def shape_collides(self, shape: ConvexShape, pl: Placement) -> bool:
        """True iff the placed shape touches or overlaps any obstacle."""
        va, na, ea = _placed(shape, pl)
        return self.placed_collides(va, na, ea, aligned=pl.rotation is None and shape.kind == BOX)

    def placed_collides(self, va, na, ea, aligned: bool = False) -> bool:
        """Collision test for an already-placed shape given as world-frame arrays.

        ``aligned`` marks an axis-aligned box, for which bounding-box overlap
        with a box obstacle is already exact.
        """
        lo, hi = va.min(axis=0), va.max(axis=0)
        cand = np.flatnonzero(
            np.all(self._ob_lo <= hi, axis=1) & np.all(lo <= self._ob_hi, axis=1)
        )
        for i in cand:
            if aligned and self._is_box[i]:
                return True
            ob = self.obstacles[i]
            axes = _candidate_axes(na, ob.normals, ea, ob.edges, self.dim)
            if _overlap_on_all_axes(va, ob.vertices, axes):
                return True
        return False

    def to_dict(self) -> dict:
        return {
            "boundary": {"lo": self.lo.tolist(), "hi": self.hi.tolist()},
            "obstacles": [ob.to_dict() for ob in self.obstacles],
        }


def boundary_contains(env: EnvironmentGeometry, s: ConvexShape, pl: Placement) -> bool:
    """True iff every vertex of the placed shape lies in the closed boundary box."""
    verts = pl.apply(s.vertices)
    return bool(np.all(verts >= env.lo) and np.all(verts <= env.hi))


# --------------------------------------------------------------------------
# clearance
# --------------------------------------------------------------------------


def _segment_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(p - closest, axis=1)


def _triangle_distance(p: np.ndarray, tri: np.ndarray) -> float:
    # closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5)
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(p - a))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(p - b))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + v * ab)))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(p - c))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + w * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + w * (c - b))))
    denom = 1.0 / (va + vb + vc)
    v, w = vb * denom, vc * denom
    return float(np.linalg.norm(p - (a + ab * v + ac * w)))


def _obstacle_distance(p: np.ndarray, ob: ConvexShape) -> float:
    if ob.kind == BOX:
        return float(np.linalg.norm(np.maximum(np.maximum(ob.lo - p, 0.0), p - ob.hi)))
    if ob.contains_point(p):
        return 0.0
    if ob.dim == 2:
        v = ob.vertices
        return float(_segment_distances(p, v, np.roll(v, -1, axis=0)).min())
    return min(_triangle_distance(p, tri) for tri in ob.triangles)


def point_clearance(p, env: EnvironmentGeometry) -> float:
    """Distance from ``p`` to the nearest obstacle surface or boundary wall.

    Zero when ``p`` lies inside (or on) an obstacle. Raises ``GeometryError``
    when ``p`` is outside the boundary box.
    """
    p = _as_point(p, env.dim)
    if not env.contains_point(p):
        raise GeometryError(f"point {p.tolist()} lies outside the environment boundary")
    best = float(min((p - env.lo).min(), (env.hi - p).min()))
    if not env.obstacles:
        return best
    boxes = env._is_box
    if boxes.any():
        gap = np.maximum(np.maximum(env._ob_lo[boxes] - p, 0.0), p - env._ob_hi[boxes])
        best = min(best, float(np.linalg.norm(gap, axis=1).min()))
    for i in np.flatnonzero(~boxes):
        if best == 0.0:
            break
        best = min(best, _obstacle_distance(p, env.obstacles[i]))
    return best
