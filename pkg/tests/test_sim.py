import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navtune.sim import World, lidar_scan, step_robot
from navtune.types import (
    ROBOT_RADIUS,
    SCAN_BEAMS,
    SCAN_MAX_RANGE,
    EnvSpec,
    InvalidPose,
    Pose,
    VelocityCommand,
)


def rk4_unicycle(x, y, h, v, omega, dt, substeps=2000):
    """Independent oracle: RK4 integration of the unicycle ODE."""
    dd = dt / substeps

    def f(state):
        _, _, th = state
        return np.array([v * np.cos(th), v * np.sin(th), omega])

    s = np.array([x, y, h], dtype=np.float64)
    for _ in range(substeps):
        k1 = f(s)
        k2 = f(s + 0.5 * dd * k1)
        k3 = f(s + 0.5 * dd * k2)
        k4 = f(s + dd * k3)
        s = s + dd / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s


@settings(max_examples=30, deadline=None)
@given(
    v=st.floats(-0.5, 2.0),
    omega=st.floats(-3.0, 3.0),
    heading=st.floats(-3.0, 3.0),
)
def test_arc_step_matches_rk4_oracle(v, omega, heading):
    p = step_robot(Pose(5.0, 5.0, heading), VelocityCommand(v, omega), 0.1)
    ox, oy, oh = rk4_unicycle(5.0, 5.0, heading, v, omega, 0.1)
    assert abs(p.x - ox) < 1e-7
    assert abs(p.y - oy) < 1e-7
    assert abs(np.sin(p.heading) - np.sin(oh)) < 1e-7
    assert abs(np.cos(p.heading) - np.cos(oh)) < 1e-7


def test_zero_omega_is_straight_line():
    p = step_robot(Pose(1.0, 1.0, 0.0), VelocityCommand(1.0, 0.0), 0.1)
    assert np.isclose(p.x, 1.1) and np.isclose(p.y, 1.0) and p.heading == 0.0


def test_pure_rotation_keeps_position():
    p = step_robot(Pose(1.0, 1.0, 0.0), VelocityCommand(0.0, 1.0), 0.1)
    assert np.isclose(p.x, 1.0) and np.isclose(p.y, 1.0) and np.isclose(p.heading, 0.1)


def test_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        step_robot(Pose(0, 0, 0), VelocityCommand(0.1, 0.0), 0.0)


def _wall_env(wall_x_m: float = 3.0) -> EnvSpec:
    grid = np.zeros((120, 120), dtype=bool)
    grid[:, int(wall_x_m / 0.05) :] = True
    return EnvSpec(
        grid=grid,
        resolution=0.05,
        start_pose=Pose(1.0, 3.0, 0.0),
        goal=(2.5, 3.0),
        seed=0,
        difficulty=0.0,
    )


def test_lidar_forward_beam_hits_wall_at_analytic_distance():
    env = _wall_env(wall_x_m=3.0)
    scan = lidar_scan(env, Pose(2.0, 3.0, 0.0))
    # analytic oracle: wall face 1.0 m ahead of the sensor
    assert abs(scan.ranges[0] - 1.0) <= env.resolution
    # the rear beam sees nothing within range
    assert scan.ranges[SCAN_BEAMS // 2] == SCAN_MAX_RANGE


def test_lidar_oblique_beam_matches_secant_oracle():
    env = _wall_env(wall_x_m=3.0)
    scan = lidar_scan(env, Pose(2.0, 3.0, 0.0))
    # beam at angle a hits the plane x=3 at range 1/cos(a)
    for b in (10, 45, 90):
        a = 2 * np.pi * b / SCAN_BEAMS
        expected = min(1.0 / np.cos(a), SCAN_MAX_RANGE)
        assert abs(scan.ranges[b] - expected) <= 2 * env.resolution


def test_lidar_caps_at_max_range(open_env):
    scan = lidar_scan(open_env, Pose(3.0, 3.0, 0.0))
    assert np.all(scan.ranges <= SCAN_MAX_RANGE)
    assert np.all(scan.ranges == SCAN_MAX_RANGE)  # open world, nothing in range


def test_lidar_rejects_pose_in_wall():
    env = _wall_env()
    with pytest.raises(InvalidPose):
        lidar_scan(env, Pose(3.5, 3.0, 0.0))


def test_world_collision_freezes_robot():
    env = _wall_env(wall_x_m=1.5)
    w = World(env)  # starts at x=1.0 facing the wall
    for _ in range(20):
        w.step(VelocityCommand(1.0, 0.0), 0.1)
    assert w.collided
    # frozen at the last safe pose, clearance still >= robot radius
    assert w.clearance() >= ROBOT_RADIUS


def test_world_reset_restores_start():
    env = _wall_env()
    w = World(env)
    w.step(VelocityCommand(0.5, 0.1), 0.1)
    w.reset()
    assert w.pose == env.start_pose
    assert w.tick == 0 and not w.collided


def test_world_determinism():
    env = _wall_env()
    a, b = World(env), World(env)
    cmds = [VelocityCommand(0.3, 0.2), VelocityCommand(0.5, -0.4), VelocityCommand(0.2, 0.0)]
    for cmd in cmds * 10:
        a.step(cmd, 0.1)
        b.step(cmd, 0.1)
    assert a.pose == b.pose
    assert np.array_equal(a.scan().ranges, b.scan().ranges)


def test_at_goal_tolerance():
    env = _wall_env()
    w = World(env)
    w.pose = Pose(2.5, 3.0, 0.0)
    assert w.at_goal(0.5)
    w.pose = Pose(1.9, 3.0, 0.0)
    assert not w.at_goal(0.5)
