"""How HAS-RRT falls back to plain sampling when its skeleton is wrong.

Each skeleton vertex (except the two nearest start and goal) is moved by d in a
random free direction. Regions anchored to the broken skeleton keep failing,
their weights drop, and the environment region takes over.

Run from the repository root:  python demos/perturbed_guidance.py
"""
# %%
import statistics

from hasrrt import PlannerConfig, annotate_clearance, perturb_skeleton, plan
from hasrrt.bench.scenes import bundled, load_blockgrid_scene
from hasrrt.skeleton import PerturbationSpec

env, skel = load_blockgrid_scene(bundled("grid_tunnels.blockgrid.json"))
start, goal = env.query.start.position, env.query.goal.position

# %%
for d in (0.0, 2.0, 4.0, 8.0):
    fracs, solved = [], 0
    for seed in range(5):
        moved = annotate_clearance(perturb_skeleton(skel, PerturbationSpec(d, seed), env, start, goal), env)
        r = plan("hasrrt", env, moved, PlannerConfig(seed=seed, region_radius=4.0)).record
        fracs.append(r.env_region_frac)
        solved += r.success
    print(f"d={d:3.0f}: solved {solved}/5, median env-region fraction {statistics.median(fracs):.2f}")
