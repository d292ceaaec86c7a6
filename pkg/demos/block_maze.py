"""Compose a maze from blocks, then compare planners on it.

Run from the repository root:  python demos/block_maze.py
"""
# %%
import statistics

from hasrrt import PlannerConfig, direct_and_prune, plan
from hasrrt.bench.scenes import bundled, load_blockgrid_scene

env, skel = load_blockgrid_scene(bundled("grid_tunnels.blockgrid.json"))
print(f"{len(env.geometry.obstacles)} wall slabs, skeleton {len(skel.vertices)} vertices / "
      f"{len(skel.edges)} edges")

# %% Only the shortest-hop corridors survive pruning; dead ends are dropped.
directed = direct_and_prune(skel, env.query.start.position, env.query.goal.position)
print(f"directed query skeleton: {len(directed.vertices)} vertices, {len(directed.edges)} edges")

# %% A few seeds each. Guided planners should need far fewer vertices.
for name in ("rrt", "drrrt", "hasrrt"):
    recs = [plan(name, env, skel, PlannerConfig(seed=s)).record for s in range(5)]
    print(f"{name:7s} solved {sum(r.success for r in recs)}/5, median vertices "
          f"{statistics.median(r.vertices for r in recs):.0f}")
