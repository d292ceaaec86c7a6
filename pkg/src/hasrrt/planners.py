"""RRT, a dynamic-region RRT baseline, and the hierarchical skeleton-guided RRT.

All three share one loop. The guided planners keep a set of sampling regions
anchored to a directed query skeleton plus a region covering the whole
environment. They differ only in how a region moves after a successful
extension and whether a failed region is pulled back:

=========  ================================  ==================
planner    advance on success                on failure
=========  ================================  ==================
``rrt``    (no regions)                      --
``drrrt``  one intermediate along its edge   count only
``hasrrt`` straight to the end of its edge   retract + count
=========  ================================  ==================
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .cspace import (
    Configuration,
    Environment,
    Query,
    TreeRoadmap,
    ValidityCounter,
    distance,
    extend,
    is_valid,
    nearest_neighbor,
    sample_in_region,
    sample_uniform,
    validate_edge,
)
from .skeleton import (
    DirectedQuerySkeleton,
    SkeletonError,
    WorkspaceSkeleton,
    direct_and_prune,
)

__all__ = [
    "ENV_REGION_ID",
    "PLANNERS",
    "PlanResult",
    "PlannerConfig",
    "PlannerSetupError",
    "RunRecord",
    "SamplingRegion",
    "TreeRoadmap",
    "advance_region",
    "drrrt_plan",
    "extract_path",
    "hasrrt_plan",
    "path_cost",
    "plan",
    "region_probabilities",
    "retract_region",
    "rrt_plan",
    "select_region",
    "update_weight",
]

ENV_REGION_ID = 0


class PlannerSetupError(ValueError):
    """Invalid query, configuration, or missing skeleton."""


@dataclass(frozen=True)
class PlannerConfig:
    """Planner hyperparameters. ``None`` fields fall back to the scene's defaults.

    ``success_rule`` decides what counts as a successful extension for a
    region: ``"and"`` needs a new vertex that lands inside the region,
    ``"or"`` accepts any new vertex.
    """

    explore_bias: float | None = None
    max_step: float | None = None
    region_radius: float | None = None
    min_region_radius: float | None = None
    resolution: float | None = None
    goal_tolerance: float | None = None
    max_iterations: int | None = None
    time_limit: float | None = None
    seed: int = 0
    success_rule: str | None = None

    def resolve(self, env: Environment) -> "PlannerConfig":
        """Fill unset fields from the scene, then from built-in fallbacks, and validate."""
        scene = env.planner_defaults
        shortest = float(env.geometry.extent.min())
        fallback = {
            "explore_bias": 0.1,
            "max_step": shortest / 4.0,
            "region_radius": shortest / 20.0,
            "resolution": env.resolution,
            "goal_tolerance": env.query.goal_tolerance if env.query else shortest / 20.0,
            "max_iterations": 200_000,
            "time_limit": 60.0,
            "success_rule": "or",
        }
        values = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                v = scene.get(f.name, fallback.get(f.name))
            values[f.name] = v
        if values["min_region_radius"] is None:
            values["min_region_radius"] = min(values["region_radius"], 2.0 * values["resolution"])
        cfg = PlannerConfig(**values)
        cfg.check()
        return cfg

    def check(self) -> None:
        if not 0.0 <= self.explore_bias <= 1.0:
            raise PlannerSetupError("explore_bias must lie in [0, 1]")
        for name in ("max_step", "region_radius", "min_region_radius", "resolution",
                     "goal_tolerance", "time_limit"):
            if not getattr(self, name) > 0:
                raise PlannerSetupError(f"{name} must be positive")
        if self.min_region_radius > self.region_radius:
            raise PlannerSetupError("min_region_radius exceeds region_radius")
        if not self.max_iterations > 0:
            raise PlannerSetupError("max_iterations must be positive")
        if self.success_rule not in ("and", "or"):
            raise PlannerSetupError("success_rule must be 'and' or 'or'")


@dataclass
class SamplingRegion:
    """A ball of candidate extension targets anchored to the directed skeleton.

    Anchors are either a skeleton vertex (``edge is None``) or an intermediate
    ``index`` on directed edge ``edge``. The whole-environment region has
    ``whole_env`` set and no anchor.
    """

    id: int
    center: np.ndarray
    radius: float
    edge: int | None = None
    index: int = 0
    vertex: int | None = None
    successes: int = 0
    failures: int = 0
    whole_env: bool = False

    @property
    def weight(self) -> float:
        return update_weight(self)

    def contains(self, p) -> bool:
        return float(np.linalg.norm(np.asarray(p) - self.center)) <= self.radius


@dataclass
class RunRecord:
    planner: str
    seed: int
    success: bool
    time_s: float
    vertices: int
    cd_calls: int
    path_cost: float | None
    env_region_frac: float | None = None
    iterations: int = 0
    d: float | None = None


@dataclass
class PlanResult:
    status: str
    path: list[Configuration]
    record: RunRecord
    tree: TreeRoadmap
    config: PlannerConfig
    skeleton: DirectedQuerySkeleton | None = None
    trace: dict = field(default_factory=dict)

    def to_json(self, include_tree: bool = True) -> dict:
        out = {
            "status": self.status,
            "planner": self.record.planner,
            "seed": self.record.seed,
            "record": asdict(self.record),
            "config": asdict(self.config),
            "path": [q.to_json() for q in self.path],
        }
        if include_tree:
            out["tree"] = self.tree.to_json()
        return out

    def dumps(self, include_tree: bool = True) -> str:
        return json.dumps(self.to_json(include_tree), indent=1)


# --------------------------------------------------------------------------
# region bookkeeping
# --------------------------------------------------------------------------


def update_weight(r: SamplingRegion) -> float:
    """Fraction of successful extensions; 1.0 before any attempt."""
    total = r.successes + r.failures
    if total == 0:
        return 1.0
    return r.successes / total


def region_probabilities(regions, explore_bias: float) -> tuple[float, np.ndarray]:
    """Selection probabilities ``(p_env, p_regions)`` for the live regions.

    Each region gets an equal explore share ``e / (|R| + 1)`` plus an exploit
    share proportional to its weight. The environment gets the explore share,
    and also the whole exploit mass when every weight is zero.
    """
    e = explore_bias
    n = len(regions)
    base = e / (n + 1)
    if n == 0:
        return 1.0, np.empty(0)
    w = np.array([update_weight(r) for r in regions], dtype=float)
    total = w.sum()
    if total > 0:
        return base, base + (1.0 - e) * w / total
    return base + (1.0 - e), np.full(n, base)


def select_region(regions, env_region: SamplingRegion, explore_bias: float, rng) -> SamplingRegion:
    """Draw the next region to sample from.

    One uniform variate is compared against the cumulative distribution,
    environment first, then regions in ascending id order. With no live
    regions the environment is returned without consuming randomness.
    """
    if not regions:
        return env_region
    ordered = sorted(regions, key=lambda r: r.id)
    p_env, p = region_probabilities(ordered, explore_bias)
    u = rng.random()
    acc = p_env
    if u < acc:
        return env_region
    for r, pr in zip(ordered, p):
        acc += pr
        if u < acc:
            return r
    return ordered[-1]  # rounding guard


def _anchor_radius(skel: DirectedQuerySkeleton, edge, vertex, max_radius, min_radius) -> float:
    cap = None
    if edge is not None:
        cap = skel.edges[edge].min_clearance
    elif vertex is not None:
        cap = skel.vertices[vertex].clearance
    r = max_radius if cap is None else min(max_radius, cap)
    return max(r, min_radius)


def region_at_vertex(skel, vid, rid, max_radius, min_radius) -> SamplingRegion:
    return SamplingRegion(
        rid,
        skel.vertices[vid].position.copy(),
        _anchor_radius(skel, None, vid, max_radius, min_radius),
        vertex=vid,
    )


def advance_region(
    r: SamplingRegion,
    skel: DirectedQuerySkeleton,
    new_ids,
    max_radius: float,
    min_radius: float = 0.0,
    single_step: bool = False,
) -> list[SamplingRegion]:
    """Regions that replace ``r`` after a successful extension.

    A region partway along its edge moves to the edge's last intermediate
    (or just the next one with ``single_step``). A region already at the end
    of its edge, or sitting on a vertex, retires and is replaced by fresh
    regions at the first intermediate of every outgoing edge.
    """
    if r.edge is not None:
        pts = skel.edges[r.edge].intermediates
        last = len(pts) - 1
        if r.index < last:
            r.index = min(r.index + 1, last) if single_step else last
            r.center = pts[r.index].copy()
            return [r]
        vertex = skel.edges[r.edge].target
    else:
        vertex = r.vertex
    out = []
    for ei in skel.out_edges(vertex):
        out.append(
            SamplingRegion(
                next(new_ids),
                skel.edges[ei].intermediates[0].copy(),
                _anchor_radius(skel, ei, None, max_radius, min_radius),
                edge=ei,
                index=0,
            )
        )
    return out


def retract_region(r: SamplingRegion, q_near: Configuration, q_new: Configuration | None) -> float:
    """Pull the region center halfway back toward the tree.

    The pull target is ``q_new`` when the extension produced one, else
    ``q_near``. Returns the negated center displacement.
    """
    prev = (q_new if q_new is not None else q_near).position
    old = r.center
    new = 0.5 * (prev + old)
    r.center = new
    return -float(np.linalg.norm(new - old))


# --------------------------------------------------------------------------
# paths
# --------------------------------------------------------------------------


def extract_path(tree: TreeRoadmap, goal_vertex: int) -> list[Configuration]:
    """Root-to-vertex configuration sequence following parent links."""
    if not 0 <= goal_vertex < len(tree):
        raise KeyError(f"vertex {goal_vertex} is not in the tree")
    chain = [goal_vertex]
    while chain[-1] in tree.parent:
        chain.append(tree.parent[chain[-1]][0])
    return [tree.vertices[i] for i in reversed(chain)]


def path_cost(path, rotation_weight: float = 1.0) -> float:
    return float(sum(distance(a, b, rotation_weight) for a, b in zip(path, path[1:])))


# --------------------------------------------------------------------------
# the planning loop
# --------------------------------------------------------------------------


class _Run:
    """Mutable state of one planner run."""

    def __init__(self, name: str, env: Environment, query: Query, cfg: PlannerConfig):
        self.name = name
        self.env = env
        self.query = query
        self.cfg = cfg
        self.lam = env.robot.rotation_weight
        self.rng = np.random.default_rng(cfg.seed)
        self.counter = ValidityCounter()
        self.tree = TreeRoadmap(query.start, self.lam)
        self.goal_vertex: int | None = None
        self.iterations = 0
        self.t0 = time.perf_counter()

    def out_of_budget(self) -> bool:
        if self.iterations >= self.cfg.max_iterations:
            return True
        return time.perf_counter() - self.t0 >= self.cfg.time_limit

    def step(self, q_rand: Configuration):
        """One extension toward ``q_rand``; returns (q_near, q_new, new vertex id)."""
        self.iterations += 1
        near = nearest_neighbor(self.tree, q_rand)
        q_near = self.tree.vertices[near]
        q_new = extend(q_near, q_rand, self.env, self.cfg.max_step, self.cfg.resolution, self.counter)
        # the walk grid starts at q_near; stored edges must also pass the edge check's own grid
        if q_new is not None and not validate_edge(q_near, q_new, self.env, self.cfg.resolution, self.counter):
            q_new = None
        vid = None
        if q_new is not None:
            vid = self.tree.add(q_new, near, distance(q_near, q_new, self.lam))
            self.try_goal(vid)
        return q_near, q_new, vid

    def try_goal(self, vid: int) -> None:
        q = self.tree.vertices[vid]
        goal = self.query.goal
        if distance(q, goal, self.lam) > self.cfg.goal_tolerance:
            return
        if q == goal:
            self.goal_vertex = vid
        elif validate_edge(q, goal, self.env, self.cfg.resolution, self.counter):
            self.goal_vertex = self.tree.add(goal, vid, distance(q, goal, self.lam))

    def finish(self, env_frac, skeleton=None, trace=None) -> PlanResult:
        elapsed = time.perf_counter() - self.t0
        path = extract_path(self.tree, self.goal_vertex) if self.goal_vertex is not None else []
        record = RunRecord(
            planner=self.name,
            seed=self.cfg.seed,
            success=self.goal_vertex is not None,
            time_s=elapsed,
            vertices=len(self.tree),
            cd_calls=self.counter.cd_calls,
            path_cost=path_cost(path, self.lam) if path else None,
            env_region_frac=env_frac,
            iterations=self.iterations,
        )
        return PlanResult(
            "success" if record.success else "failure",
            path,
            record,
            self.tree,
            self.cfg,
            skeleton,
            trace or {},
        )


def _setup(env: Environment, query: Query | None, cfg: PlannerConfig | None):
    query = query if query is not None else env.query
    if query is None:
        raise PlannerSetupError("no query given and the scene defines none")
    cfg = (cfg or PlannerConfig()).resolve(replace(env, query=query))
    probe = ValidityCounter()
    for label, q in (("start", query.start), ("goal", query.goal)):
        if q.position.size != env.dim:
            raise PlannerSetupError(f"{label} configuration has the wrong dimension")
        if not is_valid(q, env, probe):
            raise PlannerSetupError(f"{label} configuration is not valid")
    return query, cfg


def rrt_plan(env: Environment, query: Query | None = None, cfg: PlannerConfig | None = None) -> PlanResult:
    """Basic RRT: uniform targets, nearest-vertex extension, goal connection."""
    query, cfg = _setup(env, query, cfg)
    run = _Run("rrt", env, query, cfg)
    while run.goal_vertex is None and not run.out_of_budget():
        run.step(sample_uniform(env, run.rng))
    return run.finish(None)


def _guided(
    name: str,
    env: Environment,
    query: Query | None,
    skel: WorkspaceSkeleton | None,
    cfg: PlannerConfig | None,
    single_step: bool,
    retract: bool,
    record_trace: bool = False,
) -> PlanResult:
    if skel is None:
        raise PlannerSetupError(f"{name} requires a workspace skeleton")
    query, cfg = _setup(env, query, cfg)
    run = _Run(name, env, query, cfg)
    # trace: selected region ids, live weights, and one event per region attempt
    trace = {"selected": [], "weights": [], "events": []} if record_trace else None

    # pruning and directing are part of the measured run
    daws = None
    try:
        daws = direct_and_prune(skel, query.start.position, query.goal.position)
    except SkeletonError:
        daws = None
    # a query skeleton without edges gives no direction: environment sampling only
    if daws is not None and not daws.edges:
        daws = None

    new_ids = itertools.count(ENV_REGION_ID + 1)
    env_region = SamplingRegion(ENV_REGION_ID, np.zeros(env.dim), math.inf, whole_env=True)
    regions: list[SamplingRegion] = []
    if daws is not None:
        first = region_at_vertex(daws, daws.source, next(new_ids), cfg.region_radius, cfg.min_region_radius)
        regions.append(first)
        # grow the tree into the first region before the main loop
        reached = first.contains(query.start.position)
        while not reached and run.goal_vertex is None and not run.out_of_budget():
            _, q_new, _ = run.step(sample_in_region(first, env, run.rng))
            reached = q_new is not None and first.contains(q_new.position)

    selections = env_selections = 0
    rule_and = cfg.success_rule == "and"
    while run.goal_vertex is None and not run.out_of_budget():
        r = select_region(regions, env_region, cfg.explore_bias, run.rng)
        selections += 1
        if trace is not None:
            trace["selected"].append(r.id)
        if r.whole_env:
            env_selections += 1
            run.step(sample_uniform(env, run.rng))
            continue
        q_near, q_new, _ = run.step(sample_in_region(r, env, run.rng))
        ok = q_new is not None and (not rule_and or r.contains(q_new.position))
        anchor = None if r.edge is None else (daws.edges[r.edge].source, daws.edges[r.edge].target)
        if ok:
            replacement = advance_region(
                r, daws, new_ids, cfg.region_radius, cfg.min_region_radius, single_step
            )
            r.successes += 1
            i = regions.index(r)
            regions[i : i + 1] = replacement
        else:
            if retract:
                retract_region(r, q_near, q_new)
            r.failures += 1
        if trace is not None:
            trace["events"].append(
                {"region": r.id, "edge": anchor, "index": r.index, "ok": ok, "weight": update_weight(r)}
            )
            trace["weights"].append({x.id: update_weight(x) for x in regions})

    frac = env_selections / selections if selections else None
    return run.finish(frac, daws, trace)


def drrrt_plan(env, query=None, skel=None, cfg=None, record_trace=False) -> PlanResult:
    """Dynamic-region RRT: regions creep along skeleton edges one intermediate at a time."""
    return _guided("drrrt", env, query, skel, cfg, single_step=True, retract=False,
                   record_trace=record_trace)


def hasrrt_plan(env, query=None, skel=None, cfg=None, record_trace=False) -> PlanResult:
    """Hierarchical skeleton-guided RRT.

    A region that produced a good extension jumps to the end of its skeleton
    edge; one that failed is pulled halfway back toward the tree and loses
    weight, so poor guidance hands probability mass back to uniform sampling.
    """
    return _guided("hasrrt", env, query, skel, cfg, single_step=False, retract=True,
                   record_trace=record_trace)


PLANNERS = {"rrt": rrt_plan, "drrrt": drrrt_plan, "hasrrt": hasrrt_plan}


def plan(name: str, env: Environment, skel: WorkspaceSkeleton | None = None,
         cfg: PlannerConfig | None = None, query: Query | None = None) -> PlanResult:
    if name not in PLANNERS:
        raise PlannerSetupError(f"unknown planner {name!r}; choose from {sorted(PLANNERS)}")
    if name == "rrt":
        return rrt_plan(env, query, cfg)
    return PLANNERS[name](env, query, skel, cfg)
