"""Independent reference implementations used to check the library."""

import itertools

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from hasrrt.geometry import rotation_matrix


def random_convex(rng, dim, n=8, scale=1.0):
    """Vertices in convex position: hull of random points."""
    while True:
        pts = rng.normal(size=(n, dim)) * scale
        hull = ConvexHull(pts)
        v = pts[hull.vertices]
        if len(v) >= dim + 1:
            return v


def random_rotation(rng, dim):
    if dim == 2:
        return float(rng.uniform(-np.pi, np.pi))
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def world_halfspaces(shape, pl):
    """Rows (n, c) with n . x + c <= 0 inside the placed shape, n unit length."""
    R = rotation_matrix(pl.rotation, shape.dim) if pl.rotation is not None else np.eye(shape.dim)
    n = shape.facets[:, :-1] @ R.T
    c = shape.facets[:, -1] - n @ pl.translation
    return n, c


def lp_margin(a, pa, b, pb):
    """Largest t such that some point is at depth >= t inside both shapes.

    Positive: interiors overlap. Zero: touching. Negative: disjoint.
    """
    na, ca = world_halfspaces(a, pa)
    nb, cb = world_halfspaces(b, pb)
    A = np.vstack([na, nb])
    c = np.concatenate([ca, cb])
    dim = a.dim
    # variables (x, t): maximize t s.t. n.x + t <= -c
    A_ub = np.hstack([A, np.ones((len(A), 1))])
    res = linprog(
        np.r_[np.zeros(dim), -1.0], A_ub=A_ub, b_ub=-c,
        bounds=[(None, None)] * dim + [(None, 1e6)], method="highs",
    )
    assert res.status == 0, res.message
    return float(res.x[-1])


def boxes_overlap_by_sampling(lo1, hi1, lo2, hi2, step):
    """Dense lattice membership test. Exact when all corners lie on the lattice."""
    lo = np.maximum(lo1, lo2)
    hi = np.minimum(hi1, hi2)
    if np.any(hi < lo - 1e-12):
        return False
    axes = [np.arange(l_, h + step / 2, step) for l_, h in zip(lo, hi)]
    for p in itertools.product(*axes):
        p = np.array(p)
        if np.all(p >= lo1 - 1e-12) and np.all(p <= hi1 + 1e-12) and np.all(p >= lo2 - 1e-12) and np.all(p <= hi2 + 1e-12):
            return True
    return False


def polygon_distance_by_sampling(p, vertices, per_edge=4000):
    v = np.asarray(vertices)
    t = np.linspace(0.0, 1.0, per_edge)[:, None]
    best = np.inf
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        pts = a + t * (b - a)
        best = min(best, float(np.linalg.norm(pts - p, axis=1).min()))
    return best


def shortest_hop_oracle(n, edges, s, g):
    """Vertices and directed edges lying on some minimum-hop simple s->g path.

    Enumerates every simple path by depth-first search.
    """
    adj = {i: set() for i in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    paths = []

    def dfs(path, seen):
        u = path[-1]
        if u == g:
            paths.append(list(path))
            return
        for w in sorted(adj[u]):
            if w not in seen:
                seen.add(w)
                path.append(w)
                dfs(path, seen)
                path.pop()
                seen.discard(w)

    dfs([s], {s})
    if not paths:
        return None
    best = min(len(p) for p in paths)
    verts, dedges = set(), set()
    for p in paths:
        if len(p) == best:
            verts.update(p)
            dedges.update(zip(p, p[1:]))
    return verts, dedges


def step_walk(q0, target, resolution, valid):
    """Reference extender: points at k * resolution along the segment, then the
    target itself; returns the last valid one."""
    q0 = np.asarray(q0, float)
    target = np.asarray(target, float)
    length = float(np.linalg.norm(target - q0))
    last = None
    k = 1
    while True:
        s = min(k * resolution, length)
        p = q0 + (target - q0) * (s / length)
        if not valid(p):
            return last
        last = p
        if s >= length:
            return last
        k += 1
