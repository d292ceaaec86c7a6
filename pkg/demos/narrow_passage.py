"""A planar rod through a one-unit gap.

Run from the repository root:  python demos/narrow_passage.py
Writes demos/out/narrow_<planner>.svg.
"""
# %%
from pathlib import Path

from hasrrt import PlannerConfig, annotate_clearance, load_skeleton, load_scene, plan
from hasrrt.bench.render import render_svg
from hasrrt.bench.scenes import bundled

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

env = load_scene(bundled("narrow2d.json"))
skel = annotate_clearance(load_skeleton(bundled("narrow2d.skeleton.json")), env)
print(f"{env.name}: {env.dim}D, {len(env.geometry.obstacles)} obstacles, "
      f"{len(skel.vertices)} skeleton vertices")

# %% Same seed for all three planners; the record is what the bench would log.
for name in ("rrt", "drrrt", "hasrrt"):
    res = plan(name, env, skel, PlannerConfig(seed=11))
    r = res.record
    frac = "-" if r.env_region_frac is None else f"{r.env_region_frac:.2f}"
    print(f"{name:7s} success={r.success} vertices={r.vertices:4d} cd_calls={r.cd_calls:5d} "
          f"cost={r.path_cost:.2f} env_frac={frac}")
    (out / f"narrow_{name}.svg").write_text(render_svg(env, skel, res.to_json()))
