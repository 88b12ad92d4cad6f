"""Classical navigation stack: inflated costmap, Dijkstra global planner,
and the DWA local planner parameterized by a ParamSet."""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .envgen import distance_field
from .types import (
    ROBOT_RADIUS,
    TICK,
    EnvSpec,
    NoPath,
    ParamSet,
    PlannerOutput,
    PlannerState,
    Pose,
    Scan,
    VelocityCommand,
)

LETHAL = 10.0
COST_DECAY = 5.0  # exponential falloff rate of inflated cost, 1/m
ACCEL_V = 2.0  # m/s^2
ACCEL_W = 3.2  # rad/s^2
ROLLOUT_HORIZON_TICKS = 15  # 1.5 s at tick resolution
RECOVERY_ROTATE_TICKS = 10
RECOVERY_REVERSE_TICKS = 10
RECOVERY_REVERSE_V = -0.1


def inflate(grid: np.ndarray, inflation_radius: float, resolution: float, dist: np.ndarray | None = None) -> np.ndarray:
    """Costmap with exponential falloff from lethal at obstacles to 0 past the radius."""
    if inflation_radius < 0:
        raise ValueError("inflation radius must be non-negative")
    if dist is None:
        dist = distance_field(grid, resolution)
    cost = np.where(dist <= inflation_radius, LETHAL * np.exp(-COST_DECAY * dist), 0.0)
    cost[grid] = LETHAL
    return cost


def plan_global(costmap: np.ndarray, start: tuple[int, int], goal: tuple[int, int], resolution: float) -> np.ndarray:
    """Minimal-cost 8-connected path over the costmap.

    Step cost is step length times (1 + target cell cost); lethal cells are
    impassable. Returns path points (meters, cell centers) from start to goal.
    """
    h, w = costmap.shape
    if costmap[start] >= LETHAL or costmap[goal] >= LETHAL:
        raise NoPath("start or goal is lethal")
    _, prev, reached = kernels.dijkstra_grid(
        np.ascontiguousarray(costmap, dtype=np.float64), start[0], start[1], goal[0], goal[1], resolution, LETHAL
    )
    if not reached:
        raise NoPath("goal unreachable")
    cells = []
    node = goal[0] * w + goal[1]
    start_flat = start[0] * w + start[1]
    while node != start_flat:
        cells.append(node)
        node = int(prev[node])
    cells.append(start_flat)
    cells.reverse()
    return np.array([[(c % w + 0.5) * resolution, (c // w + 0.5) * resolution] for c in cells])


def local_goal(path: np.ndarray, pose: Pose, lookahead: float = 1.0) -> tuple[float, float]:
    """First path point at arc length >= lookahead ahead of the nearest path
    point to the pose; the global goal when less than that remains."""
    if len(path) == 0:
        raise ValueError("empty path")
    d = np.hypot(path[:, 0] - pose.x, path[:, 1] - pose.y)
    idx = int(np.argmin(d))
    acc = 0.0
    for k in range(idx + 1, len(path)):
        acc += math.hypot(path[k, 0] - path[k - 1, 0], path[k, 1] - path[k - 1, 1])
        if acc >= lookahead:
            return (float(path[k, 0]), float(path[k, 1]))
    return (float(path[-1, 0]), float(path[-1, 1]))


def dynamic_window(params: ParamSet, current_vel: VelocityCommand, dt: float = TICK) -> tuple[float, float, float, float]:
    v_lo = max(0.0, current_vel.v - ACCEL_V * dt)
    v_hi = min(params.max_vel_x, current_vel.v + ACCEL_V * dt)
    w_lo = max(-params.max_vel_theta, current_vel.omega - ACCEL_W * dt)
    w_hi = min(params.max_vel_theta, current_vel.omega + ACCEL_W * dt)
    return v_lo, v_hi, w_lo, w_hi


class NavStack:
    """Per-environment planning session with costmap and global-path caches.

    Caches are keyed by the inflation-radius bucket (one grid cell wide), so
    continuously varying parameter policies stay cheap. One NavStack per
    logical session; instances share nothing mutable.
    """

    def __init__(self, env: EnvSpec):
        self.env = env
        self.dist_field = distance_field(env.grid, env.resolution)
        self._costmaps: dict[int, np.ndarray] = {}
        self._paths: dict[int, np.ndarray] = {}
        self._recovery_ticks_left = 0

    def _bucket(self, radius: float) -> int:
        return int(round(radius / self.env.resolution))

    def costmap(self, inflation_radius: float) -> np.ndarray:
        b = self._bucket(inflation_radius)
        if b not in self._costmaps:
            self._costmaps[b] = inflate(self.env.grid, b * self.env.resolution, self.env.resolution, self.dist_field)
        return self._costmaps[b]

    def global_path(self, inflation_radius: float) -> np.ndarray:
        b = self._bucket(inflation_radius)
        if b not in self._paths:
            cm = self.costmap(inflation_radius)
            start = self.env.cell_of(self.env.start_pose.x, self.env.start_pose.y)
            goal = self.env.cell_of(*self.env.goal)
            self._paths[b] = plan_global(cm, start, goal, self.env.resolution)
        return self._paths[b]

    def make_state(self, pose: Pose, scan: Scan, params: ParamSet) -> PlannerState:
        path = self.global_path(params.inflation_radius)
        return PlannerState(
            scan=scan,
            pose=pose,
            global_goal=self.env.goal,
            local_goal=local_goal(path, pose),
            global_path=path,
        )

    def dwa_plan(self, x: PlannerState, params: ParamSet, current_vel: VelocityCommand) -> PlannerOutput:
        """Sample the dynamic window, roll each command forward, and return the
        cheapest non-colliding command; recovery when every sample collides."""
        cm = self.costmap(params.inflation_radius)
        v_lo, v_hi, w_lo, w_hi = dynamic_window(params, current_vel)
        commands, costs, collided = kernels.dwa_scores(
            self.dist_field,
            cm,
            self.env.resolution,
            ROBOT_RADIUS,
            x.pose.x,
            x.pose.y,
            x.pose.heading,
            v_lo,
            v_hi,
            w_lo,
            w_hi,
            params.vx_samples,
            params.vtheta_samples,
            params.occdist_scale,
            params.pdist_scale,
            params.gdist_scale,
            np.ascontiguousarray(x.global_path),
            x.local_goal[0],
            x.local_goal[1],
            TICK,
            ROLLOUT_HORIZON_TICKS,
        )
        scores = np.column_stack([commands, costs])
        if collided.all():
            return PlannerOutput(
                command=VelocityCommand(0.0, params.max_vel_theta / 2.0),
                recovery=True,
                sample_scores=scores,
            )
        best = int(np.argmin(costs))
        return PlannerOutput(
            command=VelocityCommand(float(commands[best, 0]), float(commands[best, 1])),
            recovery=False,
            sample_scores=scores,
        )

    def recovery_command(self, params: ParamSet, phase_tick: int) -> VelocityCommand:
        """Scripted recovery: rotate in place, then back up, then replan."""
        if phase_tick < RECOVERY_ROTATE_TICKS:
            return VelocityCommand(0.0, params.max_vel_theta / 2.0)
        return VelocityCommand(RECOVERY_REVERSE_V, 0.0)
