import sys
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hasrrt.bench.scenes import bundled, load_blockgrid_scene
from hasrrt.cspace import Configuration, Environment, Query, RobotModel, load_scene
from hasrrt.geometry import ConvexShape, EnvironmentGeometry
from hasrrt.skeleton import annotate_clearance, load_skeleton

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=100
)
settings.load_profile("default")


def open_box_env(size=10.0, robot_side=0.5, rotation="none", start=(1, 1), goal=(9, 9), tol=0.5,
                 obstacles=(), **kw):
    geo = EnvironmentGeometry(np.zeros(2), np.full(2, size), tuple(obstacles))
    robot = RobotModel((ConvexShape.centered_box([robot_side, robot_side]),), rotation)
    ori = 0.0 if rotation == "planar" else None
    q = Query(Configuration(start, ori), Configuration(goal, ori), tol)
    return Environment(geo, robot, q, **kw)


@pytest.fixture(scope="session")
def narrow():
    env = load_scene(bundled("narrow2d.json"))
    skel = annotate_clearance(load_skeleton(bundled("narrow2d.skeleton.json")), env)
    return env, skel


@pytest.fixture(scope="session")
def tunnels():
    return load_blockgrid_scene(bundled("grid_tunnels.blockgrid.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
