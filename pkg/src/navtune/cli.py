"""Command-line entry points for every pipeline stage."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .types import ParamSet, EnvSpec


def _load_env(path: str) -> EnvSpec:
    return EnvSpec.from_json(json.loads(Path(path).read_text()))


def _load_envs(spec: str, count: int, difficulty: float, seed0: int) -> list[EnvSpec]:
    """Either a directory/file of env JSONs or ``count`` generated envs."""
    from .envgen import generate_env

    if spec:
        p = Path(spec)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        return [_load_env(str(f)) for f in files]
    return [generate_env(seed0 + i, difficulty) for i in range(count)]


def load_policy(path: str):
    """Load any saved parameter policy by sniffing its manifest."""
    from .library import LibraryPolicy
    from .rl import TD3Policy
    from .orchestrator import StaticPolicy

    p = Path(path)
    if p.suffix == ".pt" or p.with_suffix(p.suffix + ".json").exists() and "state_dim" in p.with_suffix(p.suffix + ".json").read_text():
        return TD3Policy.load(p)
    manifest = json.loads(p.read_text())
    if "library" in manifest:
        return LibraryPolicy.load(p)
    if "params" in manifest:
        return StaticPolicy(ParamSet.from_json(manifest["params"]))
    raise click.ClickException(f"unrecognized policy file {path}")


@click.group()
def main() -> None:
    """Adaptive planner-parameter learning toolkit."""


@main.command("gen-env")
@click.option("--seed", type=int, required=True)
@click.option("--difficulty", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def gen_env(seed: int, difficulty: float, out: str) -> None:
    """Generate a world and write its JSON spec."""
    from .envgen import generate_env

    env = generate_env(seed, difficulty)
    Path(out).write_text(json.dumps(env.to_json()))
    click.echo(f"wrote {out} ({env.grid.shape[0]}x{env.grid.shape[1]} cells, {env.grid.mean():.1%} occupied)")


@main.command("plan")
@click.option("--env", "env_path", type=click.Path(exists=True), required=True)
@click.option("--params", "params_path", type=click.Path(exists=True), default=None, help="ParamSet JSON; default tuning if omitted")
@click.option("--record", type=click.Path(), default=None, help="write the run's recording JSONL here")
@click.option("--protocol", type=click.Choice(["barn", "physical"]), default="barn", show_default=True)
def plan(env_path: str, params_path: str | None, record: str | None, protocol: str) -> None:
    """Run the planner with a static parameter set and report the trial."""
    from .orchestrator import StaticPolicy, run_trial
    from .recording import Recording

    env = _load_env(env_path)
    params = ParamSet.from_json(json.loads(Path(params_path).read_text())) if params_path else ParamSet.default()
    result = run_trial(env, StaticPolicy(params), protocol)
    click.echo(f"{result.outcome}: {result.traversal_time:.1f} s ({result.raw_ticks} ticks)")
    if record:
        rec = Recording()
        rec.append(0, "env", env=env.to_json())
        for t, pose in enumerate(result.trajectory):
            rec.append(t, "state", pose=list(map(float, pose)))
        rec.save(record)
        click.echo(f"wrote {record}")


@main.command("segment")
@click.option("--demo", "demo_path", type=click.Path(exists=True), required=True, help="recording JSONL of a demonstrate session")
@click.option("--out", type=click.Path(), required=True)
def segment_cmd(demo_path: str, out: str) -> None:
    """Changepoint-segment a recorded demonstration."""
    from .changepoint import detect_changepoints, extract_features
    from .recording import Recording, to_demonstration

    demo = to_demonstration(None, Recording.load(demo_path))
    seg = detect_changepoints(extract_features(demo))
    Path(out).write_text(json.dumps({"changepoints": list(seg.changepoints), "n": seg.n, "k": seg.k}))
    click.echo(f"{seg.k} context(s), changepoints at {list(seg.changepoints)}")


@main.command("tune")
@click.option("--demo-segment", "demo_path", type=click.Path(exists=True), required=True, help="recording JSONL holding one segment")
@click.option("--budget", type=int, default=200, show_default=True, help="objective evaluations")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def tune(demo_path: str, budget: int, seed: int, out: str | None) -> None:
    """Behavior-clone planner parameters to one demonstration segment."""
    from .blackbox import OptBudget, tune_segment
    from .recording import Recording, to_demonstration
    from .session import NavSession

    rec = Recording.load(demo_path)
    demo = to_demonstration(None, rec)
    session = NavSession(rec.env())
    theta, loss = tune_segment(demo, session.planner_action, OptBudget(budget, seed=seed))
    click.echo(f"loss {loss:.4f}  theta {json.dumps(theta.to_json())}")
    if out:
        Path(out).write_text(json.dumps(theta.to_json()))


@main.command("train-appld")
@click.option("--demo", "demo_path", type=click.Path(exists=True), required=True)
@click.option("--budget", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def train_appld_cmd(demo_path: str, budget: int, seed: int, out: str) -> None:
    """Full pipeline from one demonstration recording to a library policy."""
    from .blackbox import OptBudget
    from .library import learn_appld
    from .recording import Recording, to_demonstration
    from .session import NavSession

    rec = Recording.load(demo_path)
    policy = learn_appld(to_demonstration(None, rec), NavSession(rec.env()).planner_action, OptBudget(budget, seed=seed))
    policy.save(out)
    click.echo(f"learned {len(policy.library)} context(s) -> {out}")


@main.command("train-appli")
@click.option("--recording", "rec_path", type=click.Path(exists=True), required=True, help="intervene-session recording JSONL")
@click.option("--budget", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--no-gate", is_flag=True, help="ablation: disable the confidence gate")
@click.option("--out", type=click.Path(), required=True)
def train_appli_cmd(rec_path: str, budget: int, seed: int, no_gate: bool, out: str) -> None:
    """Learn a gated library policy from recorded interventions."""
    from .blackbox import OptBudget
    from .library import learn_appli
    from .recording import Recording, to_interventions
    from .session import NavSession

    rec = Recording.load(rec_path)
    records = to_interventions(None, rec)
    if not records:
        raise click.ClickException("recording contains no completed interventions")
    policy = learn_appli(
        records, ParamSet.default(), NavSession(rec.env()).planner_action, OptBudget(budget, seed=seed), gated=not no_gate
    )
    policy.save(out)
    click.echo(f"learned {len(policy.library) - 1} intervention context(s) -> {out}")


@main.command("train-apple")
@click.option("--recording", "rec_path", type=click.Path(exists=True), required=True, help="evaluate-session recording JSONL")
@click.option("--mode", type=click.Choice(["discrete", "continuous"]), default="discrete", show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def train_apple_cmd(rec_path: str, mode: str, epochs: int, seed: int) -> None:
    """Fit the feedback predictor from recorded evaluative feedback."""
    from .feedback import train_predictor
    from .recording import Recording, to_feedback_store

    store = to_feedback_store(None, Recording.load(rec_path), mode=mode)
    if len(store) == 0:
        raise click.ClickException("recording contains no feedback")
    train_predictor(store, epochs=epochs, seed=seed)
    click.echo(f"trained {mode} predictor on {len(store)} feedback sample(s)")


@main.command("train-applr")
@click.option("--envs", type=int, default=20, show_default=True, help="number of generated training envs")
@click.option("--steps", type=int, default=300_000, show_default=True)
@click.option("--workers", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--difficulty", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def train_applr_cmd(envs: int, steps: int, workers: int, seed: int, difficulty: float, out: str) -> None:
    """Train the reinforcement-learned parameter policy."""
    from .rl import TD3Config, train_td3

    env_list = _load_envs("", envs, difficulty, seed0=1000 + seed)
    t0 = time.time()

    def progress(step: int, sigma: float) -> None:
        click.echo(f"step {step}/{steps}  sigma {sigma:.3f}  {time.time() - t0:.0f} s", err=True)

    policy = train_td3(env_list, TD3Config(total_steps=steps, workers=workers, seed=seed), progress=progress)
    policy.save(out)
    click.echo(f"saved policy -> {out}")


@main.command("deploy")
@click.option("--policy", "policy_path", type=click.Path(exists=True), required=True)
@click.option("--env", "env_path", type=click.Path(exists=True), required=True)
@click.option("--protocol", type=click.Choice(["barn", "physical"]), default="barn", show_default=True)
def deploy(policy_path: str, env_path: str, protocol: str) -> None:
    """Run one trial of a saved policy."""
    from .orchestrator import run_trial

    result = run_trial(_load_env(env_path), load_policy(policy_path), protocol)
    click.echo(f"{result.outcome}: {result.traversal_time:.1f} s ({result.raw_ticks} ticks)")


@main.command("eval")
@click.option("--policy", "policy_path", type=click.Path(exists=True), required=True)
@click.option("--envs", "envs_spec", type=str, default="", help="env JSON file/dir; generated when omitted")
@click.option("--count", type=int, default=5, show_default=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--difficulty", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def eval_cmd(policy_path: str, envs_spec: str, count: int, trials: int, difficulty: float, seed: int) -> None:
    """Mean protocol-scored traversal time of a policy over environments."""
    from .orchestrator import trial_times

    policy = load_policy(policy_path)
    envs = _load_envs(envs_spec, count, difficulty, seed0=1000 + seed)
    means = [float(trial_times(e, policy, trials, "barn", seed + i).mean()) for i, e in enumerate(envs)]
    for e, m in zip(envs, means):
        click.echo(f"env {e.seed}: {m:.1f} s")
    click.echo(f"overall: {float(np.mean(means)):.1f} s")


@main.command("benchmark")
@click.option("--policy", "policy_path", type=click.Path(exists=True), required=True)
@click.option("--baseline", "baseline_path", type=click.Path(exists=True), default=None, help="baseline policy; default tuning if omitted")
@click.option("--envs", "envs_spec", type=str, default="", help="env JSON file/dir; generated when omitted")
@click.option("--count", type=int, default=10, show_default=True)
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--protocol", type=click.Choice(["barn", "physical"]), default="barn", show_default=True)
@click.option("--difficulty", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="JSON report path")
def benchmark_cmd(policy_path, baseline_path, envs_spec, count, trials, protocol, difficulty, seed, out) -> None:
    """Benchmark a policy against a baseline with per-env significance."""
    from .orchestrator import StaticPolicy, benchmark

    policy = load_policy(policy_path)
    baseline = load_policy(baseline_path) if baseline_path else StaticPolicy()
    envs = _load_envs(envs_spec, count, difficulty, seed0=1000 + seed)
    stats = benchmark(policy, envs, trials, baseline, protocol, seed)
    Path(out).write_text(json.dumps(stats.to_json(), indent=2))
    o = stats.to_json()["overall"]
    click.echo(
        f"policy {o['policy_mean']:.1f} s vs baseline {o['baseline_mean']:.1f} s "
        f"({o['improvement_pct']:+.1f}%), significant wins {o['significant_policy_better']}/{len(envs)}"
    )


@main.command("report")
@click.option("--benchmark", "bench_path", type=click.Path(exists=True), required=True, help="JSON written by `benchmark`")
@click.option("--csv", "csv_out", type=click.Path(), default=None)
@click.option("--json", "json_out", type=click.Path(), default=None)
def report(bench_path: str, csv_out: str | None, json_out: str | None) -> None:
    """Re-emit a benchmark report as per-env CSV and/or JSON summary."""
    data = json.loads(Path(bench_path).read_text())
    if json_out:
        Path(json_out).write_text(json.dumps(data, indent=2))
        click.echo(f"wrote {json_out}")
    if csv_out:
        lines = ["env,policy_mean,policy_std,baseline_mean,baseline_std,p_value"]
        for row in data["per_env"]:
            lines.append(
                f'{row["env"]},{row["policy_mean"]:.3f},{row["policy_std"]:.3f},'
                f'{row["baseline_mean"]:.3f},{row["baseline_std"]:.3f},{row["p_value"]:.6g}'
            )
        Path(csv_out).write_text("\n".join(lines) + "\n")
        click.echo(f"wrote {csv_out}")
    if not csv_out and not json_out:
        click.echo(json.dumps(data["overall"], indent=2))


@main.command("cycle")
@click.option("--policy", "policy_path", type=click.Path(exists=True), required=True, help="initial reinforcement policy checkpoint")
@click.option("--envs", type=int, default=10, show_default=True)
@click.option("--difficulty", type=float, default=0.5, show_default=True)
@click.option("--retrain-steps", type=int, default=20_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="cycle report JSON")
def cycle_cmd(policy_path: str, envs: int, difficulty: float, retrain_steps: int, seed: int, out: str) -> None:
    """One cycle of learning with scripted interactors over planted courses."""
    from . import courses
    from .orchestrator import CycleConfig, run_cycle
    from .rl import TD3Policy

    pi_r = TD3Policy.load(policy_path)
    env_list = _load_envs("", envs, difficulty, seed0=1000 + seed)
    deployments = [
        (courses.corridor_course(), "demo"),
        (courses.offset_door_course(), "intervene"),
        (courses.slalom_course(), "feedback"),
    ]
    cfg = CycleConfig(retrain_steps=retrain_steps, seed=seed)
    _, rep, _ = run_cycle(pi_r, env_list, deployments, cfg)
    Path(out).write_text(json.dumps(rep.to_json(), indent=2))
    click.echo(f"pre {rep.pre_mean:.1f} s -> post {rep.post_mean:.1f} s; report -> {out}")


@main.command("serve")
@click.option("--port", type=int, default=None, help="default: APPL_PORT env var or 8080")
@click.option("--tick-interval", type=float, default=0.1, show_default=True)
def serve(port: int | None, tick_interval: float) -> None:
    """Start the live interaction service."""
    from .service import main as serve_main

    serve_main(port=port, tick_interval=tick_interval)


@main.command("bench-kernels")
@click.option("--repeats", type=int, default=20, show_default=True)
def bench_kernels(repeats: int) -> None:
    """Time the compiled kernels against their plain-Python sources."""
    from . import kernels
    from .envgen import generate_env, distance_field
    from .planner import inflate

    env = generate_env(3, 0.7)
    occ = env.grid.view(np.uint8)
    dist = distance_field(env.grid, env.resolution)
    cm = inflate(env.grid, 0.3, env.resolution, dist)
    path = np.ascontiguousarray(np.column_stack([np.linspace(3, 3, 50), np.linspace(0.6, 5.4, 50)]))
    cases = {
        "raycast": (
            lambda f: f(occ, env.resolution, 3.0, 0.6, 1.57, 720, 2.0),
            kernels.raycast,
            kernels.raycast_py,
        ),
        "dwa_scores": (
            lambda f: f(dist, cm, env.resolution, 0.21, 3.0, 0.6, 1.57, 0.0, 1.0, -1.0, 1.0, 8, 20, 0.1, 0.75, 1.0, path, 3.0, 2.0, 0.1, 15),
            kernels.dwa_scores,
            kernels.dwa_scores_py,
        ),
        "dijkstra_grid": (
            lambda f: f(cm, 12, 60, 108, 60, env.resolution, 10.0),
            kernels.dijkstra_grid,
            kernels.dijkstra_grid_py,
        ),
    }
    if kernels.NUMBA_ENABLED:
        for name, (call, fast, _) in cases.items():
            call(fast)  # warm the JIT outside the timed region
    for name, (call, fast, slow) in cases.items():
        t0 = time.perf_counter()
        for _ in range(repeats):
            call(fast)
        t_fast = (time.perf_counter() - t0) / repeats
        t0 = time.perf_counter()
        for _ in range(repeats):
            call(slow)
        t_slow = (time.perf_counter() - t0) / repeats
        label = "numba" if kernels.NUMBA_ENABLED else "bound(pure)"
        click.echo(f"{name:14s} {label} {t_fast * 1e3:8.3f} ms   pure-python {t_slow * 1e3:8.3f} ms   x{t_slow / t_fast:.1f}")


if __name__ == "__main__":
    main()
