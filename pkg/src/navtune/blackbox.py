"""CMA-ES box-constrained minimizer and the behavior-cloning objective used
to fit planner parameters to demonstrated actions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .changepoint import Demonstration
from .types import ParamSet, VelocityCommand, clip_params

# Action-dimension weights: linear velocity dominates traversal time, angular
# mismatch is weighted down.
DEFAULT_H = np.array([1.0, 0.25])
BC_SUBSAMPLE_LIMIT = 3000


class BadObjective(Exception):
    """Objective returned a non-finite value."""


@dataclass(frozen=True)
class OptBudget:
    max_evaluations: int
    population: int = 0  # 0 = use the default 4 + floor(3 ln n)
    seed: int = 0

    def __post_init__(self):
        if self.population and self.population < 4:
            raise ValueError("population must be at least 4")


def bc_loss(
    segment: Demonstration,
    theta: ParamSet,
    planner: Callable[[ParamSet, object, VelocityCommand], np.ndarray],
    h: np.ndarray = DEFAULT_H,
    rng: np.random.Generator | None = None,
) -> float:
    """Weighted squared mismatch between demonstrated actions and what the
    planner would do with parameters ``theta`` on the demonstrated states.

    Each sample is replayed with a fresh rollout context: the planner sees the
    previous *demonstrated* action as its current velocity. Demos longer than
    the subsample limit are thinned with a seeded uniform subsample.
    """
    if len(segment) == 0:
        raise ValueError("empty segment")
    if np.any(np.asarray(h) <= 0):
        raise ValueError("H diagonal must be strictly positive")
    samples = segment.samples
    indices = range(len(samples))
    if len(samples) > BC_SUBSAMPLE_LIMIT:
        r = rng if rng is not None else np.random.default_rng(0)
        indices = sorted(r.choice(len(samples), size=BC_SUBSAMPLE_LIMIT, replace=False))
    total = 0.0
    for i in indices:
        x, a, _ = samples[i]
        prev = samples[i - 1][1] if i > 0 else VelocityCommand(0.0, 0.0)
        pred = planner(theta, x, prev)
        diff = np.array([a.v, a.omega]) - np.asarray(pred)
        total += float(diff @ (np.asarray(h) * diff))
    return total


def minimize(
    objective: Callable[[np.ndarray], float],
    bounds: tuple[np.ndarray, np.ndarray],
    budget: OptBudget,
    integer_mask: np.ndarray | None = None,
    x0: np.ndarray | None = None,
    sigma0: float | None = None,
    scales: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """CMA-ES (rank-1 and rank-mu covariance update) over a finite box.

    Candidates are clipped to the box and integer dimensions rounded before
    each evaluation; the best-ever evaluated point is returned. Deterministic
    for a given budget seed. ``x0``/``sigma0`` override the default start
    (box center, 0.3 x mean side length); a tighter start keeps weakly
    identified dimensions near a trusted point. ``scales`` sets the initial
    per-dimension search scale (diagonal of the starting covariance), which
    matters when box side lengths differ by orders of magnitude.
    """
    low = np.asarray(bounds[0], dtype=np.float64)
    high = np.asarray(bounds[1], dtype=np.float64)
    if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high)) and np.all(high > low)):
        raise ValueError("bounds must be a finite, non-degenerate box")
    n = len(low)
    if integer_mask is None:
        integer_mask = np.zeros(n, dtype=bool)

    lam = budget.population or (4 + int(3 * math.log(n)))
    mu = lam // 2
    w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)

    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))

    rng = np.random.default_rng(budget.seed)
    mean = np.asarray(x0, dtype=np.float64).copy() if x0 is not None else (low + high) / 2.0
    if np.any(mean < low) or np.any(mean > high):
        raise ValueError("x0 must lie inside the bounds")
    sigma = float(sigma0) if sigma0 is not None else 0.3 * float(np.mean(high - low))
    if scales is not None:
        scales = np.asarray(scales, dtype=np.float64)
        if scales.shape != (n,) or np.any(scales <= 0):
            raise ValueError("scales must be positive, one per dimension")
        cov = np.diag(scales**2)
        if sigma0 is None:
            sigma = 1.0
    else:
        cov = np.eye(n)
    ps = np.zeros(n)
    pc = np.zeros(n)

    def repair(z: np.ndarray) -> np.ndarray:
        out = np.clip(z, low, high)
        out[integer_mask] = np.round(out[integer_mask])
        return out

    best_x = repair(mean.copy())
    best_f = objective(best_x)
    if not np.isfinite(best_f):
        raise BadObjective(f"objective returned {best_f}")
    evals = 1

    while evals < budget.max_evaluations:
        d_eig, b_eig = np.linalg.eigh(cov)
        d_eig = np.sqrt(np.maximum(d_eig, 1e-20))
        zs = rng.standard_normal((lam, n))
        ys = zs @ np.diag(d_eig) @ b_eig.T
        xs = mean + sigma * ys
        fs = np.empty(lam)
        for i in range(lam):
            cand = repair(xs[i])
            f_true = objective(cand)
            if not np.isfinite(f_true):
                raise BadObjective(f"objective returned {f_true}")
            evals += 1
            if f_true < best_f:
                best_f = f_true
                best_x = cand
            # ranking penalty keeps the mean from drifting out of the box,
            # where clipped fitness would otherwise look flat
            fs[i] = f_true + 100.0 * float(np.sum((xs[i] - np.clip(xs[i], low, high)) ** 2))
            if evals >= budget.max_evaluations:
                break
        order = np.argsort(fs)[:mu]
        y_w = w @ ys[order]
        mean = mean + sigma * y_w

        c_inv_sqrt = b_eig @ np.diag(1.0 / d_eig) @ b_eig.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (c_inv_sqrt @ y_w)
        hsig = float(np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * evals / lam)) / chi_n < 1.4 + 2 / (n + 1))
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_w
        rank_mu = sum(w[k] * np.outer(ys[order[k]], ys[order[k]]) for k in range(mu))
        cov = (
            (1 - c1 - cmu) * cov
            + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * cov)
            + cmu * rank_mu
        )
        cov = (cov + cov.T) / 2.0
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))
        sigma = min(sigma, float(np.max(high - low)))

    return best_x, best_f


def tune_segment(
    segment: Demonstration,
    planner: Callable[[ParamSet, object, VelocityCommand], np.ndarray],
    budget: OptBudget,
    h: np.ndarray = DEFAULT_H,
) -> tuple[ParamSet, float]:
    """Fit one ParamSet to one demonstration segment by CMA-ES on bc_loss.

    The search starts at the default parameters with a modest per-dimension
    scale: dimensions the demonstration constrains move to fit it, while
    weakly identified ones stay near the trusted default instead of drifting
    across the flat regions of the loss.
    """
    from .types import DEFAULT_PARAMS_VEC, PARAM_HIGH, PARAM_INTEGER, PARAM_LOW

    def objective(vec: np.ndarray) -> float:
        return bc_loss(segment, ParamSet.from_array(vec), planner, h, rng=np.random.default_rng(budget.seed))

    best, f = minimize(
        objective,
        (PARAM_LOW, PARAM_HIGH),
        budget,
        integer_mask=PARAM_INTEGER,
        x0=DEFAULT_PARAMS_VEC,
        scales=0.15 * (PARAM_HIGH - PARAM_LOW),
    )
    return ParamSet.from_array(clip_params(best)), f
