"""Experiment matrices: planner x seed benchmarks and skeleton perturbation sweeps."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..cspace import Environment, SceneError, load_scene
from ..planners import PLANNERS, PlannerConfig, PlannerSetupError, PlanResult, RunRecord, plan
from ..skeleton import (
    PerturbationSpec,
    WorkspaceSkeleton,
    annotate_clearance,
    load_skeleton,
    perturb_skeleton,
)
from .scenes import load_blockgrid_scene

EXPERIMENT_FORMAT = "hasrrt-experiment/1"
CSV_FIELDS = ["planner", "seed", "d", "success", "time_s", "vertices", "cd_calls", "path_cost", "env_region_frac"]
SUMMARY_METRICS = ["vertices", "cd_calls", "time_s", "path_cost"]

_MASK64 = (1 << 64) - 1


class ExperimentError(ValueError):
    """Experiment file is malformed or refers to invalid inputs."""


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream: str, seed: int) -> int:
    """Sub-seed for one run, independent of execution order.

    ``stream`` is a planner name or ``"perturb"``. The perturbation distance is
    deliberately not mixed in, so every ``d`` of a sweep replays the same
    random numbers (and ``d = 0`` reproduces the plain benchmark).
    """
    tag = int.from_bytes(hashlib.blake2b(stream.encode(), digest_size=8).digest(), "little")
    x = splitmix64(master & _MASK64)
    x = splitmix64(x ^ tag)
    x = splitmix64(x ^ (seed & _MASK64))
    return x >> 1  # keep it a non-negative int64


@dataclass
class ExperimentSpec:
    planners: list[str]
    seeds: list[int]
    scene: Path | None = None
    skeleton: Path | None = None
    blockgrid: Path | None = None
    cap: float = 60.0
    config: dict = field(default_factory=dict)
    output: Path = Path("results")
    master_seed: int = 0
    workers: int = 1
    d_list: list[float] = field(default_factory=list)
    region_radius: float | None = None
    name: str = "experiment"

    def __post_init__(self):
        if not self.seeds:
            raise ExperimentError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ExperimentError("seed list has duplicates")
        if not self.cap > 0:
            raise ExperimentError("cap must be positive")
        bad = [p for p in self.planners if p not in PLANNERS]
        if bad:
            raise ExperimentError(f"unknown planners {bad}; choose from {sorted(PLANNERS)}")
        if (self.scene is None) == (self.blockgrid is None):
            raise ExperimentError("give exactly one of 'scene' or 'blockgrid'")
        if any(not d >= 0 for d in self.d_list):
            raise ExperimentError("perturbation distances must be >= 0")
        unknown = set(self.config) - set(PlannerConfig.__dataclass_fields__) - {"seed"}
        if unknown:
            raise ExperimentError(f"unknown planner settings {sorted(unknown)}")


def load_experiment(path) -> ExperimentSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ExperimentError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if data.get("format", EXPERIMENT_FORMAT) != EXPERIMENT_FORMAT:
        raise ExperimentError(f"unsupported experiment format {data.get('format')!r}")
    base = path.parent

    def rel(key):
        v = data.get(key)
        return None if v is None else (base / v).resolve()

    seeds = data.get("seeds")
    if isinstance(seeds, dict):
        seeds = list(range(seeds.get("start", 0), seeds.get("start", 0) + seeds["count"]))
    try:
        return ExperimentSpec(
            planners=list(data.get("planners", ["rrt", "drrrt", "hasrrt"])),
            seeds=[int(s) for s in seeds or []],
            scene=rel("scene"),
            skeleton=rel("skeleton"),
            blockgrid=rel("blockgrid"),
            cap=float(data.get("cap", 60.0)),
            config=dict(data.get("config", {})),
            output=(base / data.get("output", "results")).resolve(),
            master_seed=int(data.get("master_seed", 0)),
            workers=int(data.get("workers", 1)),
            d_list=[float(d) for d in data.get("d_list", [])],
            region_radius=data.get("region_radius"),
            name=data.get("name", path.stem),
        )
    except (TypeError, KeyError) as exc:
        raise ExperimentError(f"malformed experiment: {exc!r}") from None


def load_inputs(spec: ExperimentSpec) -> tuple[Environment, WorkspaceSkeleton | None]:
    """Scene and clearance-annotated skeleton (skeleton construction is not timed)."""
    if spec.blockgrid is not None:
        return load_blockgrid_scene(spec.blockgrid)
    env = load_scene(spec.scene)
    skel = None
    if spec.skeleton is not None:
        skel = annotate_clearance(load_skeleton(spec.skeleton), env)
    return env, skel


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


@dataclass
class Job:
    planner: str
    seed: int
    d: float | None = None


def _config_for(spec: ExperimentSpec, job: Job, region_radius=None) -> PlannerConfig:
    overrides = dict(spec.config)
    overrides.pop("seed", None)
    overrides.setdefault("time_limit", spec.cap)
    if region_radius is not None:
        overrides["region_radius"] = region_radius
    return PlannerConfig(seed=derive_seed(spec.master_seed, job.planner, job.seed), **overrides)


def _skeleton_for(spec, env, skel, job: Job):
    if job.d is None or skel is None:
        return skel
    q = env.query
    pspec = PerturbationSpec(job.d, derive_seed(spec.master_seed, "perturb", job.seed))
    moved = perturb_skeleton(skel, pspec, env, q.start.position, q.goal.position)
    return annotate_clearance(moved, env)


def _failed_record(job: Job) -> RunRecord:
    return RunRecord(job.planner, job.seed, False, 0.0, 0, 0, None, None, 0)


def run_job(spec: ExperimentSpec, env, skel, job: Job, region_radius=None,
            keep: bool = False) -> tuple[RunRecord, PlanResult | None]:
    """One run; the record carries the user-facing seed, not the derived one."""
    run_skel = _skeleton_for(spec, env, skel, job)
    try:
        result = plan(job.planner, env, run_skel, _config_for(spec, job, region_radius))
    except PlannerSetupError:
        return _failed_record(job), None
    rec = result.record
    rec.seed = job.seed
    return rec, (result if keep else None)


_WORKER_STATE: dict = {}


def _worker_init(spec: ExperimentSpec, region_radius):
    env, skel = load_inputs(spec)
    _WORKER_STATE.update(spec=spec, env=env, skel=skel, region_radius=region_radius)


def _worker_run(job: Job) -> RunRecord:
    st = _WORKER_STATE
    rec, _ = run_job(st["spec"], st["env"], st["skel"], job, st["region_radius"])
    return rec


def run_jobs(spec: ExperimentSpec, jobs: list[Job], workers: int | None = None,
             region_radius=None, keep: bool = False):
    """Run every job; returns ``(records, results)`` sorted by (d, planner, seed).

    ``results`` holds full plan results only for serial runs with ``keep``.
    """
    workers = spec.workers if workers is None else workers
    results: list[PlanResult] = []
    if workers <= 1:
        env, skel = load_inputs(spec)
        records = []
        for job in jobs:
            rec, res = run_job(spec, env, skel, job, region_radius, keep)
            records.append(rec)
            if res is not None:
                results.append(res)
    else:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(spec, region_radius)) as pool:
            records = list(pool.map(_worker_run, jobs))
        for rec, job in zip(records, jobs):
            rec.seed = job.seed
    for rec, job in zip(records, jobs):
        rec.d = job.d
    order = sorted(range(len(jobs)), key=lambda i: (jobs[i].d or 0.0, jobs[i].planner, jobs[i].seed))
    records = [records[i] for i in order]
    if results:
        results = [results[i] for i in order]
    return records, results


def run_bench(spec: ExperimentSpec, workers: int | None = None, keep: bool = False):
    if any(p != "rrt" for p in spec.planners) and spec.skeleton is None and spec.blockgrid is None:
        raise ExperimentError("guided planners need a skeleton or block grid")
    jobs = [Job(p, s) for p in spec.planners for s in spec.seeds]
    return run_jobs(spec, jobs, workers, keep=keep)


def run_perturb(spec: ExperimentSpec, d_list=None, region_radius=None,
                workers: int | None = None, keep: bool = False):
    """HAS-RRT over every (d, seed) pair with a freshly perturbed skeleton."""
    d_list = list(spec.d_list if d_list is None else d_list)
    if not d_list:
        raise ExperimentError("empty d-list")
    if spec.skeleton is None and spec.blockgrid is None:
        raise ExperimentError("perturbation study needs a skeleton or block grid")
    radius = region_radius if region_radius is not None else spec.region_radius
    jobs = [Job("hasrrt", s, float(d)) for d in d_list for s in spec.seeds]
    return run_jobs(spec, jobs, workers, region_radius=radius, keep=keep)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        row = asdict(r) if not isinstance(r, dict) else r
        w.writerow([_fmt(row.get(k)) for k in CSV_FIELDS])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append(
            {
                "planner": row["planner"],
                "seed": int(row["seed"]),
                "d": float(row["d"]) if row["d"] else None,
                "success": row["success"] == "true",
                "time_s": float(row["time_s"]),
                "vertices": int(row["vertices"]),
                "cd_calls": int(row["cd_calls"]),
                "path_cost": float(row["path_cost"]) if row["path_cost"] else None,
                "env_region_frac": float(row["env_region_frac"]) if row["env_region_frac"] else None,
            }
        )
    return out


def _stats(values):
    values = [v for v in values if v is not None]
    if not values:
        return {"mean": None, "std": None, "median": None}
    return {
        "mean": float(np.mean(values)),
        "std": float(np.std(values)),
        "median": float(statistics.median(values)),
    }


def summarize(records, key: str = "planner") -> dict:
    """Per-group mean/std/median of the run metrics plus success rate."""
    rows = [r if isinstance(r, dict) else asdict(r) for r in records]
    groups: dict = {}
    for row in rows:
        groups.setdefault(row[key], []).append(row)
    out = {}
    for name in sorted(groups, key=lambda g: (g is None, g)):
        rs = groups[name]
        entry = {
            "runs": len(rs),
            "completed": sum(r["success"] for r in rs),
            "success_rate": sum(r["success"] for r in rs) / len(rs),
        }
        for m in SUMMARY_METRICS + ["env_region_frac"]:
            entry[m] = _stats([r[m] for r in rs])
        out[str(name)] = entry
    return out


def write_outputs(records, outdir, stem: str, key: str = "planner") -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{stem}.csv"
    summary_path = outdir / f"{stem}_summary.json"
    csv_path.write_text(records_to_csv(records))
    summary_path.write_text(json.dumps(summarize(records, key), indent=2) + "\n")
    return csv_path, summary_path
