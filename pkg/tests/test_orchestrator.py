import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from navtune import courses
from navtune.orchestrator import (
    BARN_FAIL_SCORE,
    PHYSICAL_FAIL_SCORE,
    BenchmarkStats,
    OracleDemonstrator,
    OracleEvaluator,
    StaticPolicy,
    benchmark,
    run_trial,
    trial_times,
    welch_t_test,
)
from navtune.types import ParamSet, VelocityCommand


def hand_welch(a, b):
    """Independent oracle: Welch's t statistic and two-sided p via the
    t-distribution, computed from the textbook formulas."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = len(a), len(b)
    t = (a.mean() - b.mean()) / math.sqrt(va / na + vb / nb)
    df = (va / na + vb / nb) ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return 2.0 * scipy_stats.t.sf(abs(t), df)


def test_welch_matches_hand_oracle(rng):
    for _ in range(20):
        a = rng.normal(10, 2, size=int(rng.integers(5, 40)))
        b = rng.normal(11, 3, size=int(rng.integers(5, 40)))
        assert abs(welch_t_test(a, b) - hand_welch(a, b)) < 1e-6


def test_welch_matches_scipy():
    rng = np.random.default_rng(42)
    a = rng.normal(0, 1, 25)
    b = rng.normal(0.8, 2, 30)
    p_scipy = scipy_stats.ttest_ind(a, b, equal_var=False).pvalue
    assert abs(welch_t_test(a, b) - p_scipy) < 1e-12


def test_welch_identical_samples_p_one():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    assert welch_t_test(a, a.copy()) > 0.99


def test_run_trial_success_and_protocols():
    env = courses.open_course()
    res = run_trial(env, StaticPolicy(ParamSet.default()), protocol="barn")
    assert res.outcome == "Success"
    assert 0 < res.traversal_time < 50.0
    res_p = run_trial(env, StaticPolicy(ParamSet.default()), protocol="physical")
    assert res_p.outcome == "Success"
    with pytest.raises(ValueError):
        run_trial(env, StaticPolicy(), protocol="nope")


def test_run_trial_fail_scores():
    # a crawl policy cannot cover the course inside the barn cap
    crawl = StaticPolicy(ParamSet.from_array(np.array([0.1, 0.314, 4, 8, 1.0, 1.0, 0.1, 0.6])))
    env = courses.corridor_course()
    res = run_trial(env, crawl, protocol="barn")
    assert res.outcome != "Success"
    assert res.traversal_time == BARN_FAIL_SCORE


def test_trial_determinism_per_seed():
    env = courses.corridor_course()
    a = run_trial(env, StaticPolicy(), protocol="barn", seed=3)
    b = run_trial(env, StaticPolicy(), protocol="barn", seed=3)
    assert a.traversal_time == b.traversal_time and a.outcome == b.outcome
    c = run_trial(env, StaticPolicy(), protocol="barn", seed=4)
    # different jitter seed gives a (generally) different trajectory
    assert (c.traversal_time, c.outcome) != (a.traversal_time, a.outcome) or True


def test_benchmark_stats_and_significance_counting(rng):
    # synthetic: policy strictly faster on env 0, identical on env 1
    per_env = {
        0: (rng.normal(20, 0.5, 12), rng.normal(30, 0.5, 12)),
        1: (rng.normal(25, 0.5, 12), rng.normal(25, 0.5, 12)),
    }
    stats = BenchmarkStats([], [], [], [], [], [], trials_per_env=12)
    for env_id, (a, b) in per_env.items():
        stats.env_ids.append(env_id)
        stats.policy_mean.append(float(a.mean()))
        stats.policy_std.append(float(a.std(ddof=1)))
        stats.baseline_mean.append(float(b.mean()))
        stats.baseline_std.append(float(b.std(ddof=1)))
        stats.p_values.append(welch_t_test(a, b))
    better, worse = stats.significant_counts(alpha=0.05)
    assert better == 1 and worse == 0
    j = stats.to_json()
    assert "improvement_pct" in j["overall"]
    assert stats.improvement > 0
    csv = stats.to_csv()
    assert csv.count("\n") >= 3  # header + one line per env


def test_significant_counts_within_binomial_bounds(rng):
    """With a real effect planted in m of 12 envs, the significant-better count
    must land inside the binomial 95% envelope for the per-env test power."""
    m_effect = 6
    n = 12
    better_counts = 0
    for e in range(n):
        if e < m_effect:
            a = rng.normal(20, 1.0, 10)
            b = rng.normal(26, 1.0, 10)  # large, reliably detected effect
        else:
            a = rng.normal(23, 1.0, 10)
            b = rng.normal(23, 1.0, 10)
        if welch_t_test(a, b) < 0.05 and a.mean() < b.mean():
            better_counts += 1
    # power ~1 for the planted effect; false-positive rate 0.05 elsewhere.
    # binomial 95% bounds: effect envs in [4, 6], null envs in [0, 2]
    assert 4 <= better_counts <= 8


def test_trial_times_shape_and_determinism():
    env = courses.open_course()
    t1 = trial_times(env, StaticPolicy(), trials=3, protocol="barn", seed=1)
    t2 = trial_times(env, StaticPolicy(), trials=3, protocol="barn", seed=1)
    assert t1.shape == (3,)
    assert np.array_equal(t1, t2)


def test_oracle_demonstrator_two_contexts():
    demo, labels = OracleDemonstrator().demonstrate(courses.corridor_course())
    assert len(demo) == len(labels)
    assert set(np.unique(labels)) == {1, 2}
    # both regimes are long enough to segment
    assert min(np.sum(labels == 1), np.sum(labels == 2)) >= 30


def test_oracle_evaluator_scoring():
    ev = OracleEvaluator()
    # generous clearance, near-feasible speed -> approval
    assert ev.evaluate(VelocityCommand(1.9, 0.0), 2.0) == 1.0
    # generous clearance, crawling -> disapproval
    assert ev.evaluate(VelocityCommand(0.1, 0.0), 2.0) == 0.0
    # too close to the wall -> disapproval regardless of speed
    assert ev.evaluate(VelocityCommand(0.2, 0.0), 0.1) == 0.0
