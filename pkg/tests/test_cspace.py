import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hasrrt.cspace import (
    Configuration,
    Environment,
    Query,
    RobotModel,
    SceneError,
    TreeRoadmap,
    ValidityCounter,
    distance,
    extend,
    interpolate,
    is_valid,
    load_scene,
    nearest_neighbor,
    sample_in_region,
    sample_uniform,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    validate_edge,
    wrap_angle,
)
from hasrrt.geometry import ConvexShape, EnvironmentGeometry

from conftest import open_box_env
from oracles import step_walk


def C(*xy, ori=None):
    return Configuration(np.array(xy, float), ori)


# ---------------------------------------------------------------- configurations


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.5) == 0.5


def test_quaternion_canonical_sign():
    q = Configuration(np.zeros(3), [-1.0, 0.0, 0.0, 0.0])
    assert q.orientation[0] == 1.0


def test_configuration_rejects_nan():
    with pytest.raises(ValueError):
        C(0.0, float("nan"))


def test_robot_dof():
    box2 = ConvexShape.centered_box([1, 1])
    box3 = ConvexShape.centered_box([1, 1, 1])
    assert RobotModel((box2,), "none").dof == 2
    assert RobotModel((box2,), "planar").dof == 3
    assert RobotModel((box3,), "none").dof == 3
    assert RobotModel((box3,), "3d").dof == 6
    with pytest.raises(SceneError):
        RobotModel((box3,), "planar")
    with pytest.raises(SceneError):
        RobotModel((box2, box3))


# ---------------------------------------------------------------- validity


def test_is_valid_counts_once():
    env = open_box_env(obstacles=(ConvexShape.box([4, 4], [6, 6]),))
    c = ValidityCounter()
    assert is_valid(C(2, 2), env, c)
    assert not is_valid(C(5, 5), env, c)
    assert not is_valid(C(3.8, 4.0), env, c)
    assert c.cd_calls == 3


def test_passage_sixty_percent_width():
    # passage of width w = 1 between y = 4.5 and y = 5.5; robot 0.6 wide
    w = 1.0
    walls = (ConvexShape.box([4, 0], [6, 4.5]), ConvexShape.box([4, 5.5], [6, 10]))
    geo = EnvironmentGeometry(np.zeros(2), np.full(2, 10.0), walls)
    env = Environment(geo, RobotModel((ConvexShape.centered_box([0.6, 0.6 * w]),)))
    c = ValidityCounter()
    assert is_valid(C(5, 5), env, c)
    assert is_valid(C(5, 5 + 0.2 * w - 1e-6), env, c)
    assert not is_valid(C(5, 5 + 0.2 * w), env, c)  # contact is a collision
    assert not is_valid(C(5, 5 - 0.2 * w - 1e-3), env, c)


def test_rotated_robot_collides():
    walls = (ConvexShape.box([4, 0], [6, 4.5]), ConvexShape.box([4, 5.5], [6, 10]))
    geo = EnvironmentGeometry(np.zeros(2), np.full(2, 10.0), walls)
    env = Environment(geo, RobotModel((ConvexShape.centered_box([1.2, 0.2]),), "planar"))
    c = ValidityCounter()
    assert is_valid(C(5, 5, ori=0.0), env, c)
    assert not is_valid(C(5, 5, ori=math.pi / 2), env, c)


# ---------------------------------------------------------------- metric


def test_distance_examples():
    assert distance(C(0, 0), C(3, 4)) == 5.0
    assert distance(C(1, 2), C(1, 2)) == 0.0
    assert distance(C(0, 0, ori=0.0), C(0, 0, ori=math.pi / 2), 2.5) == pytest.approx(2.5 * math.pi / 2)


def test_distance_wraps_heading():
    assert distance(C(0, 0, ori=3.0), C(0, 0, ori=-3.0), 1.0) == pytest.approx(2 * math.pi - 6.0)


def test_quaternion_distance_is_geodesic():
    half = math.sqrt(0.5)
    a = Configuration(np.zeros(3), [1, 0, 0, 0])
    b = Configuration(np.zeros(3), [half, 0, 0, half])  # 90 degrees about z
    assert distance(a, b, 1.0) == pytest.approx(math.pi / 2)


def _rand_conf(rng, kind):
    pos = rng.uniform(-5, 5, 3 if kind == "3d" else 2)
    if kind == "none":
        return Configuration(pos)
    if kind == "planar":
        return Configuration(pos, rng.uniform(-math.pi, math.pi))
    q = rng.normal(size=4)
    return Configuration(pos, q / np.linalg.norm(q))


@pytest.mark.parametrize("kind", ["none", "planar", "3d"])
def test_triangle_inequality(kind):
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        a, b, c = (_rand_conf(rng, kind) for _ in range(3))
        assert distance(a, c, 1.7) <= distance(a, b, 1.7) + distance(b, c, 1.7) + 1e-9
        assert distance(a, b, 1.7) == pytest.approx(distance(b, a, 1.7), abs=1e-12)


def test_interpolate_endpoints_and_shortest_arc():
    a, b = C(0, 0, ori=3.0), C(2, 0, ori=-3.0)
    mid = interpolate(a, b, 0.5)
    assert np.allclose(mid.position, [1, 0])
    assert abs(abs(mid.orientation) - math.pi) < 1e-9  # goes through pi, not 0
    assert distance(interpolate(a, b, 1.0), b) < 1e-12


# ---------------------------------------------------------------- local planner


def test_validate_edge_examples():
    env = open_box_env(robot_side=0.1, obstacles=(ConvexShape.box([4, 0], [6, 6]),))
    c = ValidityCounter()
    assert validate_edge(C(1, 8), C(9, 8), env, 0.1, c)
    assert not validate_edge(C(1, 2), C(9, 2), env, 0.1, c)


def test_validate_edge_counts_each_check():
    env = open_box_env(robot_side=0.1)
    c = ValidityCounter()
    validate_edge(C(1, 1), C(2, 1), env, 0.25, c)
    assert c.cd_calls == 5  # 4 intervals, both endpoints


def test_validate_edge_thin_wall_caveat():
    # a wall thinner than the resolution can slip between two samples
    env = open_box_env(robot_side=0.01, obstacles=(ConvexShape.box([5.02, 0], [5.03, 10]),))
    c = ValidityCounter()
    assert validate_edge(C(4, 5), C(6, 5), env, 1.0, c)
    assert not validate_edge(C(4, 5), C(6, 5), env, 0.005, c)


def test_validate_edge_symmetric_random():
    env = open_box_env(robot_side=0.3, rotation="planar",
                       obstacles=(ConvexShape.box([3, 3], [4, 7]),
                                  ConvexShape(np.array([[6, 1], [8, 2], [7, 4.0]]))))
    rng = np.random.default_rng(3)
    for _ in range(1000):
        a = C(*rng.uniform(0.5, 9.5, 2), ori=rng.uniform(-3, 3))
        b = C(*rng.uniform(0.5, 9.5, 2), ori=rng.uniform(-3, 3))
        assert validate_edge(a, b, env, 0.2, ValidityCounter()) == validate_edge(b, a, env, 0.2, ValidityCounter())


def test_extend_examples():
    env = open_box_env(robot_side=0.1, size=20)
    c = ValidityCounter()
    assert np.allclose(extend(C(1, 1), C(11, 1), env, 4.0, 0.5, c).position, [5, 1])
    assert extend(C(1, 1), C(2, 2), env, 4.0, 0.5, c) == C(2, 2)


def test_extend_stops_before_wall_matches_step_walk():
    # wall face at x = 2 (shifted by 1 to keep the robot inside the boundary)
    wall = ConvexShape.box([3.0, 0], [4.0, 10])
    env = open_box_env(robot_side=0.1, obstacles=(wall,))
    c = ValidityCounter()
    q = extend(C(1, 5), C(5, 5), env, 4.0, 0.5, c)
    assert np.allclose(q.position, [2.5, 5])  # the (1.5, 0) step, offset by 1
    ref = step_walk([1, 5], [5, 5], 0.5, lambda p: is_valid(C(*p), env, ValidityCounter()))
    assert np.allclose(q.position, ref)


def test_extend_blocked_first_step():
    env = open_box_env(robot_side=0.1, obstacles=(ConvexShape.box([1.1, 0], [2, 10]),))
    assert extend(C(1, 5), C(5, 5), env, 4.0, 0.5, ValidityCounter()) is None


def test_extend_against_step_walk_random():
    env = open_box_env(robot_side=0.2, obstacles=(ConvexShape.box([3, 3], [4, 7]), ConvexShape.box([6, 0], [7, 5])))
    rng = np.random.default_rng(4)
    for _ in range(300):
        a = rng.uniform(0.2, 9.8, 2)
        if not is_valid(C(*a), env, ValidityCounter()):
            continue
        b = rng.uniform(0.2, 9.8, 2)
        d = np.linalg.norm(b - a)
        t = b if d <= 3.0 else a + (b - a) * 3.0 / d
        got = extend(C(*a), C(*b), env, 3.0, 0.25, ValidityCounter())
        ref = step_walk(a, t, 0.25, lambda p: is_valid(C(*p), env, ValidityCounter()))
        if ref is None:
            assert got is None
        else:
            assert np.allclose(got.position, ref, atol=1e-12)


@given(st.floats(0.3, 9.7), st.floats(0.3, 9.7), st.floats(0.3, 9.7), st.floats(0.3, 9.7),
       st.floats(0.05, 5.0), st.floats(0.01, 1.0))
def test_extend_never_invalid_never_too_far(x0, y0, x1, y1, max_step, res):
    env = open_box_env(robot_side=0.4, rotation="planar",
                       obstacles=(ConvexShape.box([4, 2], [5, 8]),))
    q0 = C(x0, y0, ori=0.3)
    if not is_valid(q0, env, ValidityCounter()):
        return
    q = extend(q0, C(x1, y1, ori=-1.0), env, max_step, res, ValidityCounter())
    if q is not None:
        assert is_valid(q, env, ValidityCounter())
        assert distance(q0, q, env.robot.rotation_weight) <= max_step + res + 1e-9


# ---------------------------------------------------------------- tree / NN


def test_nearest_neighbor_examples():
    t = TreeRoadmap(C(0, 0))
    assert nearest_neighbor(t, C(7, 7)) == 0
    t.add(C(5, 0), 0, 5.0)
    assert nearest_neighbor(t, C(1, 0)) == 0
    for p in [(9, 9), (9, 8), (4, 4)]:
        t.add(C(*p), 0, 1.0)
    assert nearest_neighbor(t, C(2.5, 0)) == 0  # ids 0 and 1 tie at 2.5


def test_nearest_neighbor_tie_lowest_id():
    t = TreeRoadmap(C(0, 10))
    for i in range(1, 8):
        t.add(C(0, 10 + i), 0, 1.0)
    t.vertices[3] = C(1, 0)
    t._pos[3] = [1, 0]
    t.vertices[7] = C(-1, 0)
    t._pos[7] = [-1, 0]
    assert nearest_neighbor(t, C(0, 0)) == 3


def test_tree_growth_beyond_initial_capacity():
    t = TreeRoadmap(C(0, 0, ori=0.0), 2.0)
    for i in range(200):
        t.add(C(i, 0, ori=0.01 * i), i, 1.0)
    assert len(t) == 201
    q = C(57.2, 0, ori=0.5)
    brute = min(range(len(t)), key=lambda i: (distance(t.vertices[i], q, 2.0), i))
    assert nearest_neighbor(t, q) == brute


# ---------------------------------------------------------------- sampling


def test_sample_uniform_statistics():
    env = open_box_env()
    rng = np.random.default_rng(0)
    pts = np.array([sample_uniform(env, rng).position for _ in range(10_000)])
    assert np.all((pts >= 0) & (pts <= 10))
    assert np.all((4.5 <= pts.mean(axis=0)) & (pts.mean(axis=0) <= 5.5))


def test_sample_uniform_orientation_and_determinism():
    env = open_box_env()
    assert all(sample_uniform(env, np.random.default_rng(s)).orientation is None for s in range(20))
    a = [sample_uniform(env, np.random.default_rng(9)).position for _ in range(3)]
    b = [sample_uniform(env, np.random.default_rng(9)).position for _ in range(3)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_sample_in_region_contracts():
    env = open_box_env()
    rng = np.random.default_rng(1)
    r = SimpleNamespace(center=np.array([3.0, 4.0]), radius=1.5)
    for _ in range(10_000):
        assert np.linalg.norm(sample_in_region(r, env, rng).position - r.center) <= 1.5 + 1e-12
    tiny = SimpleNamespace(center=np.array([3.0, 4.0]), radius=1e-9)
    assert np.linalg.norm(sample_in_region(tiny, env, rng).position - tiny.center) <= 1e-9
    wall = SimpleNamespace(center=np.array([0.0, 5.0]), radius=2.0)
    for _ in range(2000):
        p = sample_in_region(wall, env, rng).position
        assert np.all(p >= 0) and np.all(p <= 10)
    with pytest.raises(ValueError):
        sample_in_region(SimpleNamespace(center=np.zeros(2), radius=0.0), env, rng)


def test_sample_in_region_uniform_in_ball():
    env = open_box_env()
    rng = np.random.default_rng(2)
    r = SimpleNamespace(center=np.array([5.0, 5.0]), radius=2.0)
    d = np.array([np.linalg.norm(sample_in_region(r, env, rng).position - r.center) for _ in range(20_000)])
    # area law: P(dist <= radius/2) = 1/4
    assert abs(np.mean(d <= 1.0) - 0.25) < 0.015


# ---------------------------------------------------------------- scene files


def test_scene_roundtrip(tmp_path, narrow):
    env, _ = narrow
    path = tmp_path / "s.json"
    save_scene(env, path)
    back = load_scene(path)
    assert scene_to_dict(back) == scene_to_dict(env)


def test_scene_errors(tmp_path, narrow):
    env, _ = narrow
    data = scene_to_dict(env)
    bad = json.loads(json.dumps(data))
    bad["query"]["start"]["position"] = [10.0, 2.0]  # inside the wall
    with pytest.raises(SceneError, match="start"):
        scene_from_dict(bad)
    bad = json.loads(json.dumps(data))
    del bad["robot"]
    with pytest.raises(SceneError):
        scene_from_dict(bad)
    p = tmp_path / "broken.json"
    p.write_text('{"boundary": [1,\n 2,,]}')
    with pytest.raises(SceneError, match="line 2"):
        load_scene(p)


def test_environment_defaults():
    geo = EnvironmentGeometry(np.zeros(2), np.array([20.0, 10.0]))
    env = Environment(geo, RobotModel((ConvexShape.centered_box([1, 1]),)))
    assert env.resolution == pytest.approx(0.1)
    assert env.skeleton_spacing == pytest.approx(0.2)
    q = Query(C(1, 1), C(2, 2), 0.5)
    assert q.goal_tolerance == 0.5
