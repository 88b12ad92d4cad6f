"""Trial running, benchmark statistics with per-environment significance
counting, and the cycle-of-learning loop."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .blackbox import OptBudget
from .changepoint import Demonstration, Segmentation
from .contexts import featurize_state
from .feedback import DiscreteFeedbackPolicy, FeedbackSample, FeedbackStore, train_predictor
from .library import InterventionRecord, LibraryPolicy, ParameterLibrary, learn_appld, learn_appli
from .session import NavSession
from .types import TICK, TOP_SPEED, EnvSpec, ParamSet, PlannerState, Pose, VelocityCommand

BARN_CAP_TICKS = 500  # 50 s
BARN_FAIL_SCORE = 70.0  # 50 s + 20 s penalty
PHYSICAL_CAP_TICKS = 2000  # 200 s
PHYSICAL_FAIL_SCORE = 200.0
STUCK_WINDOW_TICKS = 100
STUCK_DISPLACEMENT = 0.1
SIGNIFICANCE = 0.05


class StaticPolicy:
    """Constant parameter set; the classical baseline."""

    cadence_ticks = 1

    def __init__(self, params: ParamSet | None = None):
        self.params = params if params is not None else ParamSet.default()

    def params_for(self, x: PlannerState) -> ParamSet:
        return self.params

    def reset(self) -> None:
        pass


@dataclass
class TrialResult:
    traversal_time: float  # protocol-scored seconds
    outcome: str  # Success | Timeout | Collision | Stuck
    raw_ticks: int
    trajectory: np.ndarray  # (T, 3) poses

    @property
    def success(self) -> bool:
        return self.outcome == "Success"


def _jittered_start(env: EnvSpec, seed: int | None) -> Pose | None:
    """Benchmark trials perturb the start pose slightly so repeated trials in
    a deterministic simulator are not literally identical."""
    if seed is None:
        return None
    rng = np.random.default_rng(seed)
    s = env.start_pose
    return Pose(s.x + rng.uniform(-0.05, 0.05), s.y + rng.uniform(-0.05, 0.05), s.heading + rng.uniform(-0.1, 0.1))


def run_trial(env: EnvSpec, policy, protocol: str = "barn", seed: int | None = None) -> TrialResult:
    """Tick the simulator at 10 Hz under the policy until goal, collision, or
    the protocol cap; failures scored per protocol (70 s BARN, 200 s
    physical-course)."""
    if protocol not in ("barn", "physical"):
        raise ValueError("protocol must be 'barn' or 'physical'")
    cap = BARN_CAP_TICKS if protocol == "barn" else PHYSICAL_CAP_TICKS
    fail = BARN_FAIL_SCORE if protocol == "barn" else PHYSICAL_FAIL_SCORE

    session = NavSession(env)
    start = _jittered_start(env, seed)
    if start is not None and not session.world.in_collision(start):
        session.reset(start)
    policy.reset()
    theta = ParamSet.default()
    traj = [session.world.pose.as_array()]
    needs_prev = getattr(policy, "needs_prev_params", False)

    for t in range(cap):
        if t % policy.cadence_ticks == 0:
            state, _ = session.observe(theta)
            theta = policy.params_for(state, theta) if needs_prev else policy.params_for(state)
        ti = session.tick(theta)
        traj.append(ti.pose.as_array())
        if ti.at_goal:
            return TrialResult((t + 1) * TICK, "Success", t + 1, np.array(traj))
        if ti.collided:
            return TrialResult(fail, "Collision", t + 1, np.array(traj))
        if protocol == "physical" and t + 1 >= STUCK_WINDOW_TICKS:
            recent = np.array(traj[-STUCK_WINDOW_TICKS - 1 :])
            if np.hypot(*(recent[-1][:2] - recent[0][:2])) < STUCK_DISPLACEMENT:
                return TrialResult(fail, "Stuck", t + 1, np.array(traj))
    return TrialResult(fail, "Timeout", cap, np.array(traj))


def welch_t_test(a, b) -> float:
    """Two-sided Welch's t-test p-value with Welch-Satterthwaite degrees of
    freedom."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("both samples need at least 2 values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        return 1.0 if a.mean() == b.mean() else 0.0
    se2 = va / len(a) + vb / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2**2 / (va**2 / (len(a) ** 2 * (len(a) - 1)) + vb**2 / (len(b) ** 2 * (len(b) - 1)))
    return float(2.0 * sps.t.sf(abs(t), df))


@dataclass
class BenchmarkStats:
    env_ids: list[int]
    policy_mean: list[float]
    policy_std: list[float]
    baseline_mean: list[float]
    baseline_std: list[float]
    p_values: list[float]
    trials_per_env: int

    @property
    def overall_policy_mean(self) -> float:
        return float(np.mean(self.policy_mean))

    @property
    def overall_baseline_mean(self) -> float:
        return float(np.mean(self.baseline_mean))

    @property
    def improvement(self) -> float:
        return self.overall_baseline_mean - self.overall_policy_mean

    @property
    def improvement_pct(self) -> float:
        return 100.0 * self.improvement / self.overall_baseline_mean

    def significant_counts(self, alpha: float = SIGNIFICANCE) -> tuple[int, int]:
        """(# envs policy significantly better, # envs baseline significantly better)."""
        better = worse = 0
        for pm, bm, p in zip(self.policy_mean, self.baseline_mean, self.p_values):
            if p < alpha:
                if pm < bm:
                    better += 1
                elif bm < pm:
                    worse += 1
        return better, worse

    def to_json(self) -> dict:
        better, worse = self.significant_counts()
        return {
            "per_env": [
                {
                    "env": e,
                    "policy_mean": pm,
                    "policy_std": ps,
                    "baseline_mean": bm,
                    "baseline_std": bs,
                    "p_value": p,
                }
                for e, pm, ps, bm, bs, p in zip(
                    self.env_ids, self.policy_mean, self.policy_std, self.baseline_mean, self.baseline_std, self.p_values
                )
            ],
            "overall": {
                "policy_mean": self.overall_policy_mean,
                "baseline_mean": self.overall_baseline_mean,
                "improvement": self.improvement,
                "improvement_pct": self.improvement_pct,
                "significant_policy_better": better,
                "significant_baseline_better": worse,
                "trials_per_env": self.trials_per_env,
            },
        }

    def to_csv(self) -> str:
        lines = ["env,policy_mean,policy_std,baseline_mean,baseline_std,p_value"]
        for row in self.to_json()["per_env"]:
            lines.append(
                f'{row["env"]},{row["policy_mean"]:.3f},{row["policy_std"]:.3f},'
                f'{row["baseline_mean"]:.3f},{row["baseline_std"]:.3f},{row["p_value"]:.6g}'
            )
        return "\n".join(lines) + "\n"


def trial_times(env: EnvSpec, policy, trials: int, protocol: str = "barn", seed: int = 0) -> np.ndarray:
    return np.array(
        [run_trial(env, policy, protocol, seed=seed * 100_003 + k).traversal_time for k in range(trials)]
    )


def benchmark(policy, envs: list[EnvSpec], trials_per_env: int, baseline, protocol: str = "barn", seed: int = 0) -> BenchmarkStats:
    """Per-environment means, relative improvement, and Welch-test verdicts
    for a policy against a baseline."""
    if trials_per_env < 2:
        raise ValueError("need at least 2 trials per environment")
    stats = BenchmarkStats([], [], [], [], [], [], trials_per_env)
    for i, env in enumerate(envs):
        a = trial_times(env, policy, trials_per_env, protocol, seed + i)
        b = trial_times(env, baseline, trials_per_env, protocol, seed + i)
        stats.env_ids.append(env.seed)
        stats.policy_mean.append(float(a.mean()))
        stats.policy_std.append(float(a.std(ddof=1)))
        stats.baseline_mean.append(float(b.mean()))
        stats.baseline_std.append(float(b.std(ddof=1)))
        stats.p_values.append(welch_t_test(a, b))
    return stats


# ---------------------------------------------------------------------------
# Scripted interactors: oracle stand-ins for the human in headless tests.
# ---------------------------------------------------------------------------

NARROW_RANGE = 0.8  # a beam shorter than this sees a nearby surface
NARROW_FRACTION = 0.72  # enter the narrow regime only when most of the scan
# is short: a tight channel surrounds the robot on both sides, while a wall,
# doorway, or medium corridor shortens at most ~two thirds of the beams, so
# the high threshold keeps doorway transits in the open regime
NARROW_EXIT_FRACTION = 0.45  # leave the narrow regime only once the scan is
# clearly open again; the hysteresis band stops the regime (and with it the
# global plan) from flapping at bend pockets where the share dips below the
# entry threshold


def planted_params_open() -> ParamSet:
    return ParamSet(2.0, 1.57, 8, 20, 0.1, 0.5, 1.0, 0.15)


def planted_params_narrow() -> ParamSet:
    return ParamSet(0.4, 3.14, 10, 40, 0.1, 0.75, 1.0, 0.26)


class OracleDemonstrator:
    """Drives the planner with planted per-region parameters, yielding a
    demonstration whose contexts are known by construction."""

    def __init__(self, open_params: ParamSet | None = None, narrow_params: ParamSet | None = None):
        self.open_params = open_params or planted_params_open()
        self.narrow_params = narrow_params or planted_params_narrow()
        self._in_narrow = False

    def reset(self) -> None:
        self._in_narrow = False

    def region_params(self, state: PlannerState) -> ParamSet:
        short = float(np.mean(state.scan.ranges < NARROW_RANGE))
        if self._in_narrow:
            self._in_narrow = short > NARROW_EXIT_FRACTION
        else:
            self._in_narrow = short >= NARROW_FRACTION
        return self.narrow_params if self._in_narrow else self.open_params

    def demonstrate(self, env: EnvSpec, cap_ticks: int = PHYSICAL_CAP_TICKS) -> tuple[Demonstration, np.ndarray]:
        """Returns the demonstration and the per-sample planted labels
        (1 = narrow, 2 = open, by first appearance order)."""
        session = NavSession(env)
        self.reset()
        samples, labels = [], []
        seen: dict[str, int] = {}
        for t in range(cap_ticks):
            theta = ParamSet.default()
            state, _ = session.observe(theta)
            theta = self.region_params(state)
            key = "open" if theta is self.open_params else "narrow"
            if key not in seen:
                seen[key] = len(seen) + 1
            out = session.plan(state, theta)
            samples.append((state, out.command, t * TICK))
            labels.append(seen[key])
            session.world.step(out.command, TICK)
            if session.world.at_goal():
                break
        return Demonstration(samples=samples), np.array(labels)


class OracleIntervener:
    """Takes over when the deployed policy starts recovery behavior, rewinds
    to where the trouble began, and teleoperates with planted parameters."""

    def __init__(self, min_length: int = 30, max_interventions: int = 3):
        self.min_length = min_length
        self.max_interventions = max_interventions
        self.demonstrator = OracleDemonstrator()

    def observe_and_intervene(self, env: EnvSpec, policy, cap_ticks: int = PHYSICAL_CAP_TICKS) -> list[InterventionRecord]:
        session = NavSession(env)
        policy.reset()
        theta = ParamSet.default()
        needs_prev = getattr(policy, "needs_prev_params", False)
        records: list[InterventionRecord] = []
        pose_history: list[Pose] = [session.world.pose]
        trouble_start: int | None = None
        t = 0
        while t < cap_ticks and len(records) < self.max_interventions:
            if t % policy.cadence_ticks == 0:
                state, _ = session.observe(theta)
                theta = policy.params_for(state, theta) if needs_prev else policy.params_for(state)
            ti = session.tick(theta)
            pose_history.append(ti.pose)
            t += 1
            if ti.recovery and trouble_start is None:
                trouble_start = max(0, t - 10)
            if trouble_start is not None and (t - trouble_start) >= 10:
                # Type A: the planner failed outright; rewind and demonstrate.
                reset_pose = pose_history[trouble_start]
                session.reset(reset_pose)
                samples = []
                for k in range(self.min_length * 2):
                    state, _ = session.observe(ParamSet.default())
                    planted = self.demonstrator.region_params(state)
                    out = session.plan(state, planted)
                    samples.append((state, out.command))
                    session.world.step(out.command, TICK)
                    if session.world.at_goal():
                        break
                if len(samples) >= self.min_length:
                    records.append(InterventionRecord(kind="A", reset_pose=reset_pose, samples=samples))
                trouble_start = None
                pose_history = [session.world.pose]
                t += len(samples)
            if ti.at_goal or ti.collided:
                break
        return records


class OracleEvaluator:
    """Emits e = 1 when the robot moves at at least 80% of the feasible speed
    with at least 0.3 m of clearance, else e = 0."""

    def feasible_speed(self, clearance: float) -> float:
        return min(TOP_SPEED, max(0.3, 2.0 * clearance))

    def evaluate(self, command: VelocityCommand, clearance: float) -> float:
        ok = clearance >= 0.3 and command.v >= 0.8 * self.feasible_speed(clearance)
        return 1.0 if ok else 0.0

    def collect(self, env: EnvSpec, policy, library: ParameterLibrary, cap_ticks: int = PHYSICAL_CAP_TICKS) -> FeedbackStore:
        """Watch one run per library entry, scoring every tick."""
        store = FeedbackStore(mode="discrete")
        indices = sorted(library.entries)
        for slot, idx in enumerate(indices):
            session = NavSession(env)
            theta = library[idx]
            for t in range(cap_ticks):
                state, scan = session.observe(theta)
                ti = session.tick(theta)
                e = self.evaluate(ti.command, scan.min_range())
                store.append(FeedbackSample(featurize_state(state), np.zeros(1), slot, e, t))
                if ti.at_goal or ti.collided:
                    break
        return store


# ---------------------------------------------------------------------------
# Cycle-of-learning
# ---------------------------------------------------------------------------


@dataclass
class CycleConfig:
    bc_budget: int = 400
    retrain_steps: int = 20_000
    compare_trials: int = 10
    dissatisfaction_time: float = 30.0  # deployment counted unsatisfactory above this
    seed: int = 0


@dataclass
class CycleReport:
    pre_mean: float
    post_mean: float
    deployments: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"pre_mean": self.pre_mean, "post_mean": self.post_mean, "deployments": self.deployments}


def _mean_time(env: EnvSpec, policy, trials: int, seed: int) -> float:
    return float(trial_times(env, policy, trials, "barn", seed).mean())


def run_cycle(
    pi_r,
    envs: list[EnvSpec],
    deployments: list[tuple[EnvSpec, str]],
    config: CycleConfig = CycleConfig(),
) -> tuple[object, CycleReport, list]:
    """One full cycle: sequential deployments with scripted interactors, then
    simulated retraining of the reinforcement policy using the corrected
    policies for exploration where they win.

    ``deployments`` pairs an environment with an interaction modality
    ("demo", "intervene", or "feedback"). Returns (new pi_r, report, policy
    set)."""
    from .rl import TD3Config, train_td3

    policy_set: list = [pi_r]
    report = CycleReport(pre_mean=float(np.mean([_mean_time(e, pi_r, config.compare_trials, config.seed) for e in envs])), post_mean=0.0)

    for env, modality in deployments:
        deployed = policy_set[-1]
        before = _mean_time(env, deployed, config.compare_trials, config.seed)
        entry = {"env": env.seed, "modality": modality, "deployed_time": before, "corrected": False}
        if before > config.dissatisfaction_time:
            session = NavSession(env)
            budget = OptBudget(config.bc_budget, seed=config.seed)
            if modality == "demo":
                demo, _ = OracleDemonstrator().demonstrate(env)
                new_policy = learn_appld(demo, session.planner_action, budget)
            elif modality == "intervene":
                records = OracleIntervener().observe_and_intervene(env, deployed)
                new_policy = learn_appli(records, ParamSet.default(), session.planner_action, budget)
            elif modality == "feedback":
                base_lib = ParameterLibrary({1: planted_params_narrow(), 2: planted_params_open()})
                store = OracleEvaluator().collect(env, deployed, base_lib)
                predictor = train_predictor(store, epochs=100, seed=config.seed)
                new_policy = DiscreteFeedbackPolicy(base_lib, predictor)
            else:
                raise ValueError(f"unknown modality {modality}")
            after = _mean_time(env, new_policy, config.compare_trials, config.seed)
            entry.update({"corrected": True, "corrected_time": after})
            policy_set.append(new_policy)
        report.deployments.append(entry)

    # Simulated retraining: explore with each corrected policy where it beats
    # the reinforcement policy, with probability decaying linearly 1 -> 0.
    explore = []
    for pol in policy_set[1:]:
        win_envs = []
        for i, env in enumerate(envs):
            if _mean_time(env, pol, config.compare_trials, config.seed) < _mean_time(env, pi_r, config.compare_trials, config.seed):
                win_envs.append(i)
        if win_envs:
            explore.append((pol, lambda frac: max(0.0, 1.0 - frac), win_envs))

    cfg = TD3Config(total_steps=config.retrain_steps, workers=4, seed=config.seed, explore_policies=explore)
    new_pi_r = train_td3(envs, cfg, init_policy=pi_r)
    report.post_mean = float(np.mean([_mean_time(e, new_pi_r, config.compare_trials, config.seed) for e in envs]))
    return new_pi_r, report, policy_set
