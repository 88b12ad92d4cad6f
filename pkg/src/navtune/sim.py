"""Differential-drive kinematics, LiDAR simulation, and the world session."""

from __future__ import annotations

import numpy as np

from . import kernels
from .envgen import distance_field
from .types import (
    SCAN_BEAMS,
    SCAN_MAX_RANGE,
    ROBOT_RADIUS,
    EnvSpec,
    InvalidPose,
    Pose,
    Scan,
    VelocityCommand,
)


def step_robot(pose: Pose, cmd: VelocityCommand, dt: float) -> Pose:
    """Advance one control interval with exact arc integration.

    omega = 0 degenerates to the straight-line limit.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, y, h = kernels.arc_step(pose.x, pose.y, pose.heading, cmd.v, cmd.omega, dt)
    return Pose(x, y, h)


def lidar_scan(env: EnvSpec, pose: Pose) -> Scan:
    """720-beam full-circle scan from the pose, ranges capped at 2 m."""
    if not env.in_bounds(pose.x, pose.y):
        raise InvalidPose(f"pose ({pose.x:.2f}, {pose.y:.2f}) outside grid")
    if env.grid[env.cell_of(pose.x, pose.y)]:
        raise InvalidPose(f"pose ({pose.x:.2f}, {pose.y:.2f}) inside an occupied cell")
    occ = env.grid.view(np.uint8)
    ranges = kernels.raycast(occ, env.resolution, pose.x, pose.y, pose.heading, SCAN_BEAMS, SCAN_MAX_RANGE)
    return Scan(ranges=ranges)


class World:
    """One simulated session: an environment plus the robot's mutable state.

    A World is owned by exactly one logical session; run several instances
    for parallelism. All derived per-environment fields (distance field) are
    computed once and shared read-only.
    """

    def __init__(self, env: EnvSpec):
        self.env = env
        self.pose = env.start_pose
        self.velocity = VelocityCommand(0.0, 0.0)
        self.tick = 0
        self.collided = False
        self.dist_field = distance_field(env.grid, env.resolution)

    def reset(self, pose: Pose | None = None) -> None:
        self.pose = pose if pose is not None else self.env.start_pose
        self.velocity = VelocityCommand(0.0, 0.0)
        self.tick = 0
        self.collided = False

    def clearance(self, pose: Pose | None = None) -> float:
        p = pose if pose is not None else self.pose
        if not self.env.in_bounds(p.x, p.y):
            return 0.0
        return float(self.dist_field[self.env.cell_of(p.x, p.y)])

    def in_collision(self, pose: Pose | None = None) -> bool:
        return self.clearance(pose) < ROBOT_RADIUS

    def step(self, cmd: VelocityCommand, dt: float) -> Pose:
        """Advance one tick; a step into collision freezes the robot there."""
        new_pose = step_robot(self.pose, cmd, dt)
        if not self.env.in_bounds(new_pose.x, new_pose.y) or self.in_collision(new_pose):
            self.collided = True
            self.velocity = VelocityCommand(0.0, 0.0)
        else:
            self.pose = new_pose
            self.velocity = cmd
        self.tick += 1
        return self.pose

    def scan(self) -> Scan:
        return lidar_scan(self.env, self.pose)

    def at_goal(self, tolerance: float = 0.5) -> bool:
        gx, gy = self.env.goal
        return (self.pose.x - gx) ** 2 + (self.pose.y - gy) ** 2 <= tolerance**2
