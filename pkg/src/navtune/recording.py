"""Session event recording: JSONL streams and typed extractors that turn a
recording back into learner inputs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .changepoint import Demonstration
from .feedback import FEEDBACK_LATENCY_TICKS, FeedbackSample, FeedbackStore
from .library import InterventionRecord
from .contexts import featurize_state
from .session import NavSession
from .types import TICK, EnvSpec, ParamSet, VelocityCommand, params_to_unit

STATE_SCAN_DOWNSAMPLE = 4  # 720 -> 180 beams in the broadcast payload


@dataclass
class Recording:
    """Append-only list of event dicts; serialization is canonical (sorted
    keys, no whitespace) so export -> import -> export is byte-identical."""

    events: list[dict] = field(default_factory=list)

    def append(self, tick: int, kind: str, **payload) -> None:
        self.events.append({"tick": tick, "kind": kind, **payload})

    def dumps(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @staticmethod
    def loads(text: str) -> "Recording":
        return Recording(events=[json.loads(line) for line in text.splitlines() if line])

    @staticmethod
    def load(path: str | Path) -> "Recording":
        return Recording.loads(Path(path).read_text())

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]

    def env(self) -> EnvSpec | None:
        """The embedded environment, when the recording is self-contained."""
        for e in self.events:
            if e["kind"] == "env":
                return EnvSpec.from_json(e["env"])
        return None


def _resolve_env(env: EnvSpec | None, recording: Recording) -> EnvSpec:
    env = env if env is not None else recording.env()
    if env is None:
        raise ValueError("recording has no embedded env; pass one explicitly")
    return env


def replay_commands(env: EnvSpec | None, recording: Recording) -> list[tuple]:
    """Re-run the environment under the recording's command stream, returning
    (state, command, tick) samples. Deterministic: identical to the live run."""
    session = NavSession(_resolve_env(env, recording))
    theta = ParamSet.default()
    by_tick = {e["tick"]: e for e in recording.of_kind("command")}
    rewinds = {e["tick"]: e for e in recording.of_kind("rewind")}
    last_tick = max((e["tick"] for e in recording.events), default=-1)
    samples = []
    poses = {0: session.world.pose}
    for t in range(last_tick + 1):
        if t in rewinds:
            target = rewinds[t]["to_tick"]
            session.reset(poses[target])
        cmd_event = by_tick.get(t)
        cmd = VelocityCommand(cmd_event["v"], cmd_event["omega"]) if cmd_event else VelocityCommand(0.0, 0.0)
        state, _ = session.observe(theta)
        samples.append((state, cmd, t * TICK))
        session.world.step(cmd, TICK)
        poses[t + 1] = session.world.pose
    return samples


def to_demonstration(env: EnvSpec | None, recording: Recording) -> Demonstration:
    """Rebuild the demonstration from a Demonstrate-mode recording."""
    samples = replay_commands(env, recording)
    return Demonstration(samples=[(x, a, t) for x, a, t in samples])


def to_interventions(env: EnvSpec | None, recording: Recording) -> list[InterventionRecord]:
    """Slice an Intervene-mode recording into per-intervention records."""
    samples = replay_commands(env, recording)
    by_tick = {t_idx: (x, a) for t_idx, (x, a, _) in enumerate(samples)}
    records = []
    begin = None
    for e in recording.events:
        if e["kind"] == "intervention_begin":
            begin = e
        elif e["kind"] == "rewind" and begin is not None:
            begin = {**begin, "tick": e["tick"]}  # teleoperation starts at the rewind
        elif e["kind"] == "intervention_end" and begin is not None:
            lo, hi = begin["tick"], e["tick"]
            segment = [by_tick[t] for t in range(lo, hi) if t in by_tick]
            if segment:
                records.append(
                    InterventionRecord(kind=begin["intervention_kind"], reset_pose=segment[0][0].pose, samples=segment)
                )
            begin = None
    return records


def to_feedback_store(env: EnvSpec | None, recording: Recording, mode: str = "discrete") -> FeedbackStore:
    """Bind recorded feedback events to the state in effect a fixed latency
    before each signal."""
    samples = replay_commands(env, recording)
    thetas = {e["tick"]: e for e in recording.of_kind("state")}
    store = FeedbackStore(mode=mode)
    for e in recording.of_kind("feedback"):
        bound = e["tick"] - FEEDBACK_LATENCY_TICKS
        if 0 <= bound < len(samples):
            x = samples[bound][0]
            st = thetas.get(bound, {})
            idx = int(st.get("context", -1))
            theta_vec = np.asarray(st.get("theta", ParamSet.default().as_array().tolist()))
            store.append(FeedbackSample(featurize_state(x), params_to_unit(theta_vec), idx, float(e["e"]), bound))
    return store
