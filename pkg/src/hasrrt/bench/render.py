"""Deterministic SVG pictures of scenes, skeletons, trees and paths."""

from __future__ import annotations

from xml.sax.saxutils import quoteattr

import numpy as np
from scipy.spatial import ConvexHull

from ..cspace import Environment
from ..skeleton import WorkspaceSkeleton

_AXES = {"x": 0, "y": 1, "z": 2}
_WIDTH = 800.0
_MARGIN = 10.0


class RenderError(ValueError):
    """Scene cannot be drawn as requested."""


def parse_projection(spec: str | None, dim: int) -> tuple[int, int]:
    """Axis pair to draw. 2D scenes default to ``xy``; 3D scenes must name one."""
    if spec is None:
        if dim != 2:
            raise RenderError("scene is 3D; pass a projection such as --project xy, xz or yz")
        return 0, 1
    spec = spec.lower()
    if len(spec) != 2 or spec[0] == spec[1] or any(c not in _AXES for c in spec):
        raise RenderError(f"bad projection {spec!r}; use two distinct axes from x, y, z")
    axes = (_AXES[spec[0]], _AXES[spec[1]])
    if max(axes) >= dim:
        raise RenderError(f"projection {spec!r} names an axis the {dim}D scene lacks")
    return axes


def _num(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, float)
        span = np.asarray(hi, float) - self.lo
        self.scale = (_WIDTH - 2 * _MARGIN) / float(span.max())
        self.size = span * self.scale + 2 * _MARGIN

    def xy(self, p) -> tuple[str, str]:
        x = _MARGIN + (p[0] - self.lo[0]) * self.scale
        y = self.size[1] - _MARGIN - (p[1] - self.lo[1]) * self.scale  # y up
        return _num(x), _num(y)

    def points(self, pts) -> str:
        return " ".join(",".join(self.xy(p)) for p in pts)


def _polygon(pts2d: np.ndarray) -> np.ndarray:
    """Counter-clockwise outline of projected vertices."""
    try:
        hull = ConvexHull(pts2d)
    except Exception:  # degenerate in projection: fall back to the bounding box
        lo, hi = pts2d.min(0), pts2d.max(0)
        return np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    return pts2d[hull.vertices]


def render_svg(
    env: Environment,
    skeleton: WorkspaceSkeleton | None = None,
    run: dict | None = None,
    projection: str | None = None,
) -> str:
    """SVG text with one ``<g>`` layer per element kind.

    ``run`` is a plan result dictionary (as written by ``plan --save``);
    its ``tree`` and ``path`` entries are drawn when present.
    """
    ax = parse_projection(projection, env.dim)
    proj = lambda pts: np.asarray(pts, float)[..., list(ax)]  # noqa: E731
    geo = env.geometry
    c = _Canvas(proj(geo.lo), proj(geo.hi))
    w, h = (_num(v) for v in c.size)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f"<title>{quoteattr(env.name)[1:-1]}</title>",
    ]

    x0, y1 = c.xy(proj(geo.lo))
    x1, y0 = c.xy(proj(geo.hi))
    out.append('<g id="boundary" fill="white" stroke="black" stroke-width="2">')
    out.append(f'<rect x="{x0}" y="{y0}" width="{_num(float(x1) - float(x0))}" '
               f'height="{_num(float(y1) - float(y0))}"/>')
    out.append("</g>")

    out.append('<g id="obstacles" fill="#555" stroke="none">')
    for ob in geo.obstacles:
        out.append(f'<polygon points="{c.points(_polygon(proj(ob.vertices)))}"/>')
    out.append("</g>")

    if skeleton is not None:
        out.append('<g id="skeleton" stroke="#d08000" stroke-width="2" stroke-dasharray="6,3" fill="#d08000">')
        for e in skeleton.edges:
            pts = np.vstack([skeleton.vertices[e.source].position, e.intermediates,
                             skeleton.vertices[e.target].position])
            out.append(f'<polyline fill="none" points="{c.points(proj(pts))}"/>')
        for vid in sorted(skeleton.vertices):
            cx, cy = c.xy(proj(skeleton.vertices[vid].position))
            out.append(f'<circle cx="{cx}" cy="{cy}" r="3"/>')
        out.append("</g>")

    if run is not None and run.get("tree"):
        verts = run["tree"]["vertices"]
        pos = proj(np.array([v["position"] for v in verts], float))
        out.append('<g id="tree" stroke="#3070c0" stroke-width="1">')
        for child, parent in enumerate(run["tree"]["parents"]):
            if parent is None:
                continue
            (ax_, ay), (bx, by) = c.xy(pos[parent]), c.xy(pos[child])
            out.append(f'<line x1="{ax_}" y1="{ay}" x2="{bx}" y2="{by}"/>')
        out.append("</g>")

    if run is not None and run.get("path"):
        pts = proj(np.array([q["position"] for q in run["path"]], float))
        out.append('<g id="path" stroke="#c02020" stroke-width="4" fill="none">')
        out.append(f'<polyline points="{c.points(pts)}"/>')
        out.append("</g>")

    if env.query is not None:
        out.append('<g id="query" stroke="black" stroke-width="1">')
        for label, q, color in (("start", env.query.start, "#20a020"), ("goal", env.query.goal, "#c020c0")):
            cx, cy = c.xy(proj(q.position))
            out.append(f'<circle id="{label}" cx="{cx}" cy="{cy}" r="6" fill="{color}"/>')
        out.append("</g>")

    out.append("</svg>")
    return "\n".join(out) + "\n"
