"""One tick-stepped navigation session tying the world to the planner.

Shared by trial running, the meta-MDP environment, and the live service.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .planner import (
    RECOVERY_REVERSE_TICKS,
    RECOVERY_ROTATE_TICKS,
    NavStack,
)
from .sim import World
from .types import TICK, EnvSpec, ParamSet, PlannerOutput, PlannerState, Pose, Scan, VelocityCommand

GOAL_TOLERANCE = 0.5


@dataclass
class TickInfo:
    tick: int
    pose: Pose
    scan: Scan
    state: PlannerState
    command: VelocityCommand
    recovery: bool
    collided: bool
    at_goal: bool


class NavSession:
    """Owns one World and one NavStack; advances one tick at a time.

    Recovery is stateful: once the local planner reports infeasibility, the
    scripted rotate-then-reverse primitive runs to completion before normal
    planning resumes.
    """

    def __init__(self, env: EnvSpec):
        self.env = env
        self.world = World(env)
        self.stack = NavStack(env)
        self._recovery_left = 0

    def reset(self, pose: Pose | None = None) -> None:
        self.world.reset(pose)
        self._recovery_left = 0

    @property
    def tick_count(self) -> int:
        return self.world.tick

    def observe(self, params: ParamSet) -> tuple[PlannerState, Scan]:
        scan = self.world.scan()
        return self.stack.make_state(self.world.pose, scan, params), scan

    def plan(self, state: PlannerState, params: ParamSet) -> PlannerOutput:
        if self._recovery_left > 0:
            phase = (RECOVERY_ROTATE_TICKS + RECOVERY_REVERSE_TICKS) - self._recovery_left
            self._recovery_left -= 1
            return PlannerOutput(command=self.stack.recovery_command(params, phase), recovery=True)
        out = self.stack.dwa_plan(state, params, self.world.velocity)
        if out.recovery:
            self._recovery_left = RECOVERY_ROTATE_TICKS + RECOVERY_REVERSE_TICKS - 1
        return out

    def tick(self, params: ParamSet, override: VelocityCommand | None = None) -> TickInfo:
        """Advance one tick under ``params``; an override command (teleop or
        intervention) bypasses the planner entirely."""
        state, scan = self.observe(params)
        if override is not None:
            cmd, recovery = override, False
        else:
            out = self.plan(state, params)
            cmd, recovery = out.command, out.recovery
        self.world.step(cmd, TICK)
        return TickInfo(
            tick=self.world.tick,
            pose=self.world.pose,
            scan=scan,
            state=state,
            command=cmd,
            recovery=recovery,
            collided=self.world.collided,
            at_goal=self.world.at_goal(GOAL_TOLERANCE),
        )

    def planner_action(self, params: ParamSet, state: PlannerState, current_vel: VelocityCommand) -> np.ndarray:
        """Pure planner query used by the behavior-cloning loss."""
        out = self.stack.dwa_plan(state, params, current_vel)
        return np.array([out.command.v, out.command.omega])
