import json

import pytest
from click.testing import CliRunner

from navtune import courses
from navtune.cli import main
from navtune.recording import Recording
from navtune.session import NavSession
from navtune.types import TICK, EnvSpec, ParamSet, VelocityCommand


@pytest.fixture
def runner():
    return CliRunner()


def _demo_recording(path, n_ticks=40):
    """A small self-contained demonstrate recording with a speed change so
    segmentation has something to find."""
    env = courses.open_course()
    rec = Recording()
    rec.append(0, "env", env=env.to_json())
    session = NavSession(env)
    for t in range(n_ticks):
        v = 0.8 if t < n_ticks // 2 else 0.2
        rec.append(t, "command", v=v, omega=0.0)
        session.world.step(VelocityCommand(v, 0.0), TICK)
    rec.save(path)
    return env


def test_gen_env_roundtrip(runner, tmp_path):
    out = tmp_path / "env.json"
    res = runner.invoke(main, ["gen-env", "--seed", "3", "--out", str(out)])
    assert res.exit_code == 0, res.output
    env = EnvSpec.from_json(json.loads(out.read_text()))
    assert env.grid.any() and not env.grid.all()


def test_plan_reports_outcome(runner, tmp_path):
    envp = tmp_path / "env.json"
    envp.write_text(json.dumps(courses.open_course().to_json()))
    rec = tmp_path / "run.jsonl"
    res = runner.invoke(main, ["plan", "--env", str(envp), "--record", str(rec)])
    assert res.exit_code == 0, res.output
    assert any(w in res.output for w in ("Success", "Timeout", "Collision", "Stuck"))
    assert rec.exists() and Recording.load(rec).env() is not None


def test_segment_and_tune_and_train_appld(runner, tmp_path):
    demo = tmp_path / "demo.jsonl"
    _demo_recording(demo)
    seg_out = tmp_path / "seg.json"
    res = runner.invoke(main, ["segment", "--demo", str(demo), "--out", str(seg_out)])
    assert res.exit_code == 0, res.output
    seg = json.loads(seg_out.read_text())
    assert seg["n"] == 40 and seg["k"] >= 1

    theta_out = tmp_path / "theta.json"
    res = runner.invoke(main, ["tune", "--demo-segment", str(demo), "--budget", "30", "--out", str(theta_out)])
    assert res.exit_code == 0, res.output
    ParamSet.from_json(json.loads(theta_out.read_text()))  # validates bounds

    pol_out = tmp_path / "policy.json"
    res = runner.invoke(main, ["train-appld", "--demo", str(demo), "--budget", "30", "--out", str(pol_out)])
    assert res.exit_code == 0, res.output
    assert "library" in json.loads(pol_out.read_text())


def test_deploy_and_eval_static_policy(runner, tmp_path):
    envp = tmp_path / "env.json"
    envp.write_text(json.dumps(courses.open_course().to_json()))
    pol = tmp_path / "static.json"
    pol.write_text(json.dumps({"params": ParamSet.default().to_json()}))
    res = runner.invoke(main, ["deploy", "--policy", str(pol), "--env", str(envp)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(
        main,
        ["eval", "--policy", str(pol), "--envs", str(envp), "--count", "1", "--trials", "1"],
    )
    assert res.exit_code == 0, res.output
    assert "overall" in res.output


def test_train_appli_requires_interventions(runner, tmp_path):
    demo = tmp_path / "demo.jsonl"
    _demo_recording(demo)
    res = runner.invoke(
        main, ["train-appli", "--recording", str(demo), "--out", str(tmp_path / "x.json")]
    )
    assert res.exit_code != 0
    assert "no completed interventions" in res.output


def test_bench_kernels_smoke(runner):
    res = runner.invoke(main, ["bench-kernels", "--repeats", "1"])
    assert res.exit_code == 0, res.output
    for name in ("raycast", "dwa_scores", "dijkstra_grid"):
        assert name in res.output
