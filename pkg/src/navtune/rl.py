"""Meta-MDP over the planner's parameter space and TD3 training of the
reinforcement-learned parameter policy."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .contexts import featurize_state
from .session import GOAL_TOLERANCE, NavSession
from .types import (
    TICK,
    EnvSpec,
    ParamSet,
    PlannerState,
    Scan,
    min_obstacle_distance,
    params_from_unit,
    params_to_unit,
)

HOLD_TICKS = 20  # a new parameter set every 2 s
EPISODE_CAP_TICKS = 500  # 50 s
FEATURE_DIM = 721
STATE_DIM = FEATURE_DIM + 8
ACTION_DIM = 8
ACTOR_HIDDEN = 512  # three 512-unit hidden layers


class AtGoal(Exception):
    """Progress reward queried at the goal itself; the terminal check should
    have fired first."""


@dataclass(frozen=True)
class RewardConfig:
    c_f: float = 1.0
    c_p: float = 1.0
    c_c: float = 0.05
    gamma: float = 0.99
    collision_penalty: float = -10.0
    barn_y_axis: bool = False  # replace the progress projection by its y component

    def __post_init__(self):
        if self.c_f == 0 and self.c_p == 0 and self.c_c == 0:
            raise ValueError("at least one reward coefficient must be non-zero")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


def reward_f(terminal: bool) -> float:
    """-1 for every step before the goal, 0 on the terminal step."""
    return 0.0 if terminal else -1.0


def reward_p(p_t: tuple[float, float], p_next: tuple[float, float], beta: tuple[float, float]) -> float:
    """Local progress projected on the direction toward the global goal."""
    dx, dy = beta[0] - p_t[0], beta[1] - p_t[1]
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        raise AtGoal("robot already at the goal")
    return ((p_next[0] - p_t[0]) * dx + (p_next[1] - p_t[1]) * dy) / norm


def reward_c(scan: Scan) -> float:
    """Obstacle-proximity penalty -1/d from the closest beam."""
    d = min_obstacle_distance(scan)
    if d <= 0.0:
        raise ValueError("scan distance must be positive; collision is terminal")
    return -1.0 / d


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray  # normalized theta in [-1, 1]^8
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")


class MetaSession:
    """The meta-environment: actions are parameter sets, each held for
    HOLD_TICKS planner ticks; rewards accumulate per tick."""

    def __init__(self, env: EnvSpec, reward: RewardConfig = RewardConfig()):
        self.session = NavSession(env)
        self.reward = reward
        self.theta_prev = ParamSet.default()

    def reset(self) -> np.ndarray:
        self.session.reset()
        self.theta_prev = ParamSet.default()
        return self.meta_state()

    def meta_state(self) -> np.ndarray:
        state, _ = self.session.observe(self.theta_prev)
        return np.concatenate([featurize_state(state), params_to_unit(self.theta_prev.as_array())])

    def meta_step(self, theta: ParamSet) -> tuple[np.ndarray, float, bool, dict]:
        """Hold theta for the full cadence, summing per-tick rewards; terminal
        on goal, collision, or the episode cap."""
        total = 0.0
        terminal = False
        info: dict = {"outcome": None}
        for _ in range(HOLD_TICKS):
            p_t = (self.session.world.pose.x, self.session.world.pose.y)
            ti = self.session.tick(theta)
            p_next = (ti.pose.x, ti.pose.y)
            terminal = ti.at_goal or ti.collided or self.session.tick_count >= EPISODE_CAP_TICKS
            r = self.reward.c_f * reward_f(terminal and ti.at_goal)
            if ti.at_goal:
                r_p = 0.0
            elif self.reward.barn_y_axis:
                r_p = p_next[1] - p_t[1]
            else:
                r_p = reward_p(p_t, p_next, self.session.env.goal)
            r += self.reward.c_p * r_p
            if ti.collided:
                r += self.reward.c_c * self.reward.collision_penalty
            else:
                r += self.reward.c_c * reward_c(ti.scan)
            total += r
            if terminal:
                info["outcome"] = "goal" if ti.at_goal else ("collision" if ti.collided else "timeout")
                break
        self.theta_prev = theta
        state = self.meta_state() if not ti.collided else np.concatenate(
            [np.zeros(FEATURE_DIM), params_to_unit(theta.as_array())]
        )
        return state, total, terminal, info


def exploration_sigma(step: int, total_budget: int = 5_000_000) -> float:
    """Gaussian exploration noise schedule: starts at 0.5, decays linearly at
    0.125 per million steps, floors at 0.02 from 4M steps on. For smaller
    budgets the step axis is compressed so the shape spans the whole run."""
    eff = step * (5_000_000 / total_budget)
    if eff >= 4_000_000:
        return 0.02
    return max(0.02, 0.5 - 0.125 * eff / 1_000_000)


def _mlp(in_dim: int, out_dim: int, tanh_head: bool) -> nn.Sequential:
    layers = [
        nn.Linear(in_dim, ACTOR_HIDDEN),
        nn.ReLU(),
        nn.Linear(ACTOR_HIDDEN, ACTOR_HIDDEN),
        nn.ReLU(),
        nn.Linear(ACTOR_HIDDEN, ACTOR_HIDDEN),
        nn.ReLU(),
        nn.Linear(ACTOR_HIDDEN, out_dim),
    ]
    if tanh_head:
        layers.append(nn.Tanh())
    return nn.Sequential(*layers)


class TD3Policy:
    """Deployable reinforcement-learned parameter policy (actor only).

    Queried every HOLD_TICKS ticks with the meta-state (features plus the
    previous normalized parameters)."""

    cadence_ticks = HOLD_TICKS
    needs_prev_params = True

    def __init__(self, actor: nn.Sequential | None = None):
        self.actor = actor if actor is not None else _mlp(STATE_DIM, ACTION_DIM, tanh_head=True)
        self.actor.eval()

    def action(self, meta_state: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.actor(torch.as_tensor(meta_state[None, :], dtype=torch.float32)).numpy()[0]

    def params_for(self, x: PlannerState, theta_prev: ParamSet) -> ParamSet:
        s = np.concatenate([featurize_state(x), params_to_unit(theta_prev.as_array())])
        return ParamSet.from_array(params_from_unit(self.action(s)))

    def reset(self) -> None:
        pass

    def save(self, path: str | Path) -> None:
        path = Path(path)
        torch.save(self.actor.state_dict(), path)
        manifest = {
            "state_dim": STATE_DIM,
            "action_dim": ACTION_DIM,
            "hidden": ACTOR_HIDDEN,
            "normalization": "unit box [-1,1] over the parameter bounds",
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(manifest))

    @staticmethod
    def load(path: str | Path) -> "TD3Policy":
        actor = _mlp(STATE_DIM, ACTION_DIM, tanh_head=True)
        actor.load_state_dict(torch.load(Path(path), weights_only=True))
        return TD3Policy(actor)


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int = STATE_DIM, action_dim: int = ACTION_DIM):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_states = np.zeros((capacity, state_dim), dtype=np.float32)
        self.terminals = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self.ptr = 0

    def add(self, t: Transition) -> None:
        i = self.ptr
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.terminals[i] = float(t.terminal)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        return (
            torch.as_tensor(self.states[idx]),
            torch.as_tensor(self.actions[idx]),
            torch.as_tensor(self.rewards[idx]),
            torch.as_tensor(self.next_states[idx]),
            torch.as_tensor(self.terminals[idx]),
        )


@dataclass
class TD3Config:
    total_steps: int = 300_000
    workers: int = 8
    seed: int = 0
    batch: int = 128
    lr: float = 3e-4
    tau: float = 0.005
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    warmup_steps: int = 1_000
    updates_per_step: float = 0.25
    buffer_capacity: int = 300_000
    reward: RewardConfig = field(default_factory=RewardConfig)
    eval_every: int = 0  # 0 = no periodic eval
    explore_policies: list = field(default_factory=list)  # (policy, prob_schedule) pairs


def train_td3(
    envs: list[EnvSpec],
    config: TD3Config,
    progress=None,
    init_policy: TD3Policy | None = None,
) -> TD3Policy:
    """Desk-scale actor/learner TD3.

    ``workers`` independent meta-sessions are stepped round-robin (each owns
    its own simulator); one learner owns the networks and updates after every
    collected transition batch. ``explore_policies`` optionally mixes in
    library policies as exploration actors (cycle-of-learning retraining):
    each entry is (policy, probability schedule over the fraction of training
    elapsed).
    """
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    actor = _mlp(STATE_DIM, ACTION_DIM, tanh_head=True)
    if init_policy is not None:
        actor.load_state_dict(init_policy.actor.state_dict())
    actor.train()
    actor_t = _mlp(STATE_DIM, ACTION_DIM, tanh_head=True)
    actor_t.load_state_dict(actor.state_dict())
    q1 = _mlp(STATE_DIM + ACTION_DIM, 1, tanh_head=False)
    q2 = _mlp(STATE_DIM + ACTION_DIM, 1, tanh_head=False)
    q1_t = _mlp(STATE_DIM + ACTION_DIM, 1, tanh_head=False)
    q2_t = _mlp(STATE_DIM + ACTION_DIM, 1, tanh_head=False)
    q1_t.load_state_dict(q1.state_dict())
    q2_t.load_state_dict(q2.state_dict())
    actor_opt = torch.optim.Adam(actor.parameters(), lr=config.lr)
    critic_opt = torch.optim.Adam(list(q1.parameters()) + list(q2.parameters()), lr=config.lr)
    buffer = ReplayBuffer(config.buffer_capacity)

    sessions = []
    for w in range(config.workers):
        env = envs[w % len(envs)]
        ms = MetaSession(env, config.reward)
        sessions.append({"ms": ms, "state": ms.reset(), "env_idx": w % len(envs), "explore_with": None})

    def pick_env(slot) -> None:
        slot["env_idx"] = int(rng.integers(0, len(envs)))
        slot["ms"] = MetaSession(envs[slot["env_idx"]], config.reward)
        slot["state"] = slot["ms"].reset()
        slot["explore_with"] = None
        if config.explore_policies:
            frac = step / max(1, config.total_steps)
            for pol, sched, env_ids in config.explore_policies:
                if slot["env_idx"] in env_ids and rng.random() < sched(frac):
                    slot["explore_with"] = pol
                    pol.reset()
                    break

    step = 0
    updates_owed = 0.0
    update_count = 0
    while step < config.total_steps:
        batch_states = np.stack([s["state"] for s in sessions]).astype(np.float32)
        with torch.no_grad():
            acts = actor(torch.as_tensor(batch_states)).numpy()
        sigma = exploration_sigma(step, config.total_steps)
        for w, slot in enumerate(sessions):
            if step >= config.total_steps:
                break
            if step < config.warmup_steps:
                a = rng.uniform(-1.0, 1.0, size=ACTION_DIM)
            elif slot["explore_with"] is not None:
                state_obj, _ = slot["ms"].session.observe(slot["ms"].theta_prev)
                a = params_to_unit(slot["explore_with"].params_for(state_obj).as_array())
            else:
                a = np.clip(acts[w] + rng.normal(0.0, sigma, size=ACTION_DIM), -1.0, 1.0)
            theta = ParamSet.from_array(params_from_unit(a))
            next_state, r, terminal, info = slot["ms"].meta_step(theta)
            buffer.add(Transition(slot["state"], a, r, next_state, terminal))
            step += 1
            updates_owed += config.updates_per_step
            if terminal:
                pick_env(slot)
            else:
                slot["state"] = next_state
            if progress and step % 1000 == 0:
                progress(step, sigma)

        while updates_owed >= 1.0 and buffer.size >= config.batch:
            updates_owed -= 1.0
            s, a, r, ns, term = buffer.sample(config.batch, rng)
            with torch.no_grad():
                noise = torch.clamp(
                    torch.randn_like(a) * config.target_noise,
                    -config.target_noise_clip,
                    config.target_noise_clip,
                )
                na = torch.clamp(actor_t(ns) + noise, -1.0, 1.0)
                tq = torch.min(q1_t(torch.cat([ns, na], 1)), q2_t(torch.cat([ns, na], 1))).squeeze(1)
                target = r + config.reward.gamma * (1.0 - term) * tq
            sa = torch.cat([s, a], 1)
            critic_loss = F.mse_loss(q1(sa).squeeze(1), target) + F.mse_loss(q2(sa).squeeze(1), target)
            critic_opt.zero_grad()
            critic_loss.backward()
            critic_opt.step()

            update_count += 1
            if update_count % config.policy_delay == 0:
                actor_loss = -q1(torch.cat([s, actor(s)], 1)).mean()
                actor_opt.zero_grad()
                actor_loss.backward()
                actor_opt.step()
                for net, net_t in ((actor, actor_t), (q1, q1_t), (q2, q2_t)):
                    with torch.no_grad():
                        for p, pt in zip(net.parameters(), net_t.parameters()):
                            pt.mul_(1 - config.tau).add_(config.tau * p)

    actor.eval()
    return TD3Policy(actor)
