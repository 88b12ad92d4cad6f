"""Live interaction service: sessions over HTTP, teleoperation and feedback
over a WebSocket, server-paced simulation ticks, and JSONL recordings.

Concurrency model: each session is owned by exactly one WebSocket loop; all
mutation happens serially inside that loop, so sessions share nothing.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import os

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from . import courses
from .envgen import generate_env
from .library import LibraryPolicy
from .orchestrator import StaticPolicy
from .recording import STATE_SCAN_DOWNSAMPLE, Recording
from .session import NavSession
from .types import EnvSpec, ParamSet, Pose, VelocityCommand

DEFAULT_PORT = 8080
MODES = ("watch", "demonstrate", "intervene", "evaluate")
COURSES = {
    "corridor": courses.corridor_course,
    "slalom": courses.slalom_course,
    "door": courses.door_course,
    "offset_door": courses.offset_door_course,
    "open": courses.open_course,
}


class LiveSession:
    """Server-side session state; mutated only by its WebSocket loop."""

    def __init__(self, sid: str, env: EnvSpec, mode: str, policy):
        self.sid = sid
        self.env = env
        self.mode = mode
        self.policy = policy
        self.nav = NavSession(env)
        self.recording = Recording()
        self.tick = 0
        self.poses: dict[int, Pose] = {0: self.nav.world.pose}
        self.theta = ParamSet.default()
        self.held_command = VelocityCommand(0.0, 0.0)
        self.marked_tick: int | None = None
        self.pending_kind: str | None = None
        self.rewound = False
        self.intervening = False
        self.done: str | None = None
        self.recording.append(0, "env", env=env.to_json())
        self.recording.append(0, "mode", mode=mode)

    # -- protocol handlers -------------------------------------------------

    def handle(self, msg: dict) -> dict:
        """Apply one client message; returns the ack or error reply."""
        mtype = msg.get("type")
        try:
            if mtype == "set_mode":
                return self._set_mode(msg)
            if mtype == "command":
                return self._command(msg)
            if mtype == "feedback":
                return self._feedback(msg)
            if mtype == "mark":
                return self._mark()
            if mtype == "begin_intervention":
                return self._begin_intervention(msg)
            if mtype == "rewind":
                return self._rewind(msg)
            if mtype == "end_intervention":
                return self._end_intervention()
            return {"type": "error", "reason": f"unknown message type {mtype!r}"}
        except (KeyError, TypeError, ValueError) as exc:
            return {"type": "error", "reason": f"malformed {mtype}: {exc}"}

    def _ack(self, of: str) -> dict:
        return {"type": "ack", "of": of, "tick": self.tick}

    def _set_mode(self, msg: dict) -> dict:
        mode = msg["mode"]
        if mode not in MODES:
            return {"type": "error", "reason": f"unknown mode {mode!r}"}
        if self.intervening or self.pending_kind or self.rewound:
            return {"type": "error", "reason": "cannot change mode during an intervention"}
        self.mode = mode
        self.marked_tick = None
        self.held_command = VelocityCommand(0.0, 0.0)
        self.recording.append(self.tick, "mode", mode=mode)
        return self._ack("set_mode")

    def _command(self, msg: dict) -> dict:
        if self.mode == "demonstrate":
            pass
        elif self.mode == "intervene" and self.intervening:
            pass
        else:
            return {"type": "error", "reason": f"commands not accepted in mode {self.mode!r}"}
        cmd = VelocityCommand(float(msg["v"]), float(msg["omega"]))
        self.held_command = cmd
        return self._ack("command")

    def _feedback(self, msg: dict) -> dict:
        if self.mode != "evaluate":
            return {"type": "error", "reason": "feedback only accepted in evaluate mode"}
        e = float(msg["e"])
        if not 0.0 <= e <= 1.0:
            return {"type": "error", "reason": "feedback must lie in [0, 1]"}
        from .feedback import FEEDBACK_LATENCY_TICKS

        if self.tick < FEEDBACK_LATENCY_TICKS:
            return {"type": "error", "reason": "no state old enough to bind feedback to yet"}
        self.recording.append(self.tick, "feedback", e=e, mode="discrete" if e in (0.0, 1.0) else "continuous")
        return self._ack("feedback")

    def _mark(self) -> dict:
        if self.mode != "intervene":
            return {"type": "error", "reason": "mark only valid in intervene mode"}
        if self.intervening:
            return {"type": "error", "reason": "cannot mark during an active intervention"}
        self.marked_tick = self.tick
        self.recording.append(self.tick, "mark")
        return self._ack("mark")

    def _begin_intervention(self, msg: dict) -> dict:
        if self.mode != "intervene":
            return {"type": "error", "reason": "begin_intervention only valid in intervene mode"}
        if self.marked_tick is None:
            return {"type": "error", "reason": "mark a tick before beginning an intervention"}
        if self.intervening or self.pending_kind:
            return {"type": "error", "reason": "an intervention is already in progress"}
        kind = msg["kind"]
        if kind not in ("A", "B"):
            return {"type": "error", "reason": "intervention kind must be 'A' or 'B'"}
        self.pending_kind = kind
        self.recording.append(self.tick, "intervention_begin", intervention_kind=kind, reset_tick=self.marked_tick)
        return self._ack("begin_intervention")

    def _rewind(self, msg: dict) -> dict:
        if self.pending_kind is None:
            return {"type": "error", "reason": "begin an intervention before rewinding"}
        if self.rewound:
            return {"type": "error", "reason": "already rewound"}
        target = int(msg["tick"])
        if target != self.marked_tick:
            return {"type": "error", "reason": "can only rewind to the marked tick"}
        self.nav.reset(self.poses[target])
        self.done = None
        self.recording.append(self.tick, "rewind", to_tick=target)
        self.rewound = True
        self.intervening = True
        self.held_command = VelocityCommand(0.0, 0.0)
        return self._ack("rewind")

    def _end_intervention(self) -> dict:
        if not self.intervening:
            return {"type": "error", "reason": "no active intervention"}
        self.recording.append(self.tick, "intervention_end")
        self.intervening = False
        self.pending_kind = None
        self.rewound = False
        self.marked_tick = None
        self.held_command = VelocityCommand(0.0, 0.0)
        return self._ack("end_intervention")

    # -- stepping ----------------------------------------------------------

    def step(self) -> dict:
        """Advance one tick and return the state broadcast message."""
        override = None
        if self.mode == "demonstrate" or (self.mode == "intervene" and self.intervening):
            override = self.held_command
            self.theta = ParamSet.default()
        elif self.tick % self.policy.cadence_ticks == 0:
            state, _ = self.nav.observe(self.theta)
            if getattr(self.policy, "needs_prev_params", False):
                self.theta = self.policy.params_for(state, self.theta)
            else:
                self.theta = self.policy.params_for(state)
        ti = self.nav.tick(self.theta, override=override)
        context = -1
        if isinstance(self.policy, LibraryPolicy) and override is None and self.policy.window._ring:
            context = int(self.policy.window._ring[-1])
        self.recording.append(
            self.tick,
            "command",
            v=ti.command.v,
            omega=ti.command.omega,
        )
        self.recording.append(
            self.tick,
            "state",
            pose=[ti.state.pose.x, ti.state.pose.y, ti.state.pose.heading],
            scan=ti.scan.ranges.tolist(),
            local_goal=list(ti.state.local_goal),
            theta=self.theta.as_array().tolist(),
            context=context,
            recovery=ti.recovery,
        )
        self.tick += 1
        self.poses[self.tick] = ti.pose
        if ti.at_goal:
            self.done = "goal"
        elif ti.collided:
            self.done = "collision"
        path = self.nav.stack.global_path(self.theta.inflation_radius)
        return {
            "type": "state",
            "tick": self.tick - 1,
            "pose": [ti.pose.x, ti.pose.y, ti.pose.heading],
            "scan": np.round(ti.scan.ranges[::STATE_SCAN_DOWNSAMPLE], 4).tolist(),
            "path": np.round(path[:: max(1, len(path) // 60)], 3).tolist(),
            "theta": self.theta.to_json(),
            "context": context,
            "recovery": ti.recovery,
            "done": self.done,
        }


def _resolve_env(body: dict) -> EnvSpec:
    env = body.get("env", {})
    if "course" in env:
        if env["course"] not in COURSES:
            raise HTTPException(404, f"unknown course {env['course']!r}")
        return COURSES[env["course"]]()
    if "bitmap" in env:
        return EnvSpec.from_json(env)
    return generate_env(int(env.get("seed", 0)), float(env.get("difficulty", 0.5)))


def create_app(tick_interval: float = 0.1) -> FastAPI:
    app = FastAPI(title="navtune interaction service")
    app.state.tick_interval = tick_interval
    app.state.sessions: dict[str, LiveSession] = {}
    app.state.policies = {"static": lambda: StaticPolicy()}
    counter = itertools.count(1)

    @app.get("/envs")
    def list_envs() -> dict:
        return {
            "courses": sorted(COURSES),
            "generator": {"seed": "int", "difficulty": "float in [0, 1]"},
        }

    @app.post("/sessions")
    def create_session(body: dict) -> dict:
        mode = body.get("mode", "watch")
        if mode not in MODES:
            raise HTTPException(422, f"unknown mode {mode!r}")
        policy_name = body.get("policy")
        if policy_name is None:
            if mode != "demonstrate":
                raise HTTPException(422, f"mode {mode!r} requires a policy")
            policy_name = "static"
        if policy_name not in app.state.policies:
            raise HTTPException(404, f"unknown policy {policy_name!r}")
        env = _resolve_env(body)
        sid = f"s{next(counter)}"
        app.state.sessions[sid] = LiveSession(sid, env, mode, app.state.policies[policy_name]())
        return {
            "session": sid,
            "mode": mode,
            "env": {
                "size": [env.width_m, env.height_m],
                "resolution": env.resolution,
                "start": [env.start_pose.x, env.start_pose.y, env.start_pose.heading],
                "goal": list(env.goal),
                "seed": env.seed,
            },
        }

    @app.get("/sessions/{sid}/recording", response_class=PlainTextResponse)
    def get_recording(sid: str) -> str:
        if sid not in app.state.sessions:
            raise HTTPException(404, "no such session")
        return app.state.sessions[sid].recording.dumps()

    @app.get("/sessions/{sid}/env")
    def get_env(sid: str) -> dict:
        if sid not in app.state.sessions:
            raise HTTPException(404, "no such session")
        return app.state.sessions[sid].env.to_json()

    @app.websocket("/sessions/{sid}/ws")
    async def session_ws(ws: WebSocket, sid: str):
        session = app.state.sessions.get(sid)
        if session is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        await ws.send_json(
            {
                "type": "hello",
                "session": sid,
                "mode": session.mode,
                "tick": session.tick,
                "tick_interval": app.state.tick_interval,
            }
        )
        inbox: asyncio.Queue = asyncio.Queue()
        closed = asyncio.Event()

        async def reader():
            try:
                while True:
                    inbox.put_nowait(await ws.receive_json())
            except (WebSocketDisconnect, RuntimeError):
                closed.set()

        reader_task = asyncio.create_task(reader())
        try:
            while not closed.is_set():
                while not inbox.empty():
                    reply = session.handle(inbox.get_nowait())
                    await ws.send_json(reply)
                if session.done is None:
                    await ws.send_json(session.step())
                if session.done is not None:
                    # terminal: stop stepping, keep serving protocol messages
                    await asyncio.sleep(max(app.state.tick_interval, 0.005))
                else:
                    await asyncio.sleep(app.state.tick_interval)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader_task.cancel()

    return app


def main(port: int | None = None, tick_interval: float = 0.1) -> None:
    import uvicorn

    if port is None:
        port = int(os.environ.get("APPL_PORT", DEFAULT_PORT))
    uvicorn.run(create_app(tick_interval), host="0.0.0.0", port=port)
