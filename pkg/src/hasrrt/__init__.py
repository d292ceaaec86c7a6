"""Skeleton-guided sampling-based motion planning (RRT, DR-RRT, HAS-RRT)."""

from .cspace import (
    Configuration,
    Environment,
    Query,
    RobotModel,
    ValidityCounter,
    load_scene,
    save_scene,
)
from .geometry import ConvexShape, EnvironmentGeometry, Placement
from .planners import (
    PlannerConfig,
    PlanResult,
    RunRecord,
    drrrt_plan,
    hasrrt_plan,
    plan,
    rrt_plan,
)
from .skeleton import (
    WorkspaceSkeleton,
    annotate_clearance,
    compose_blocks,
    direct_and_prune,
    load_skeleton,
    perturb_skeleton,
    save_skeleton,
)

__version__ = "0.1.0"
