"""Segmenting a teleoperated demonstration into contexts.

Bayesian online changepoint detection with a Normal-Inverse-Gamma conjugate
model per feature dimension and a constant hazard; contexts are read off the
MAP run-length trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .types import PlannerState, VelocityCommand

HAZARD = 1.0 / 150.0
MIN_SEGMENT = 30
# NIG prior
MU0, KAPPA0, ALPHA0, BETA0 = 0.0, 1.0, 1.0, 1.0


@dataclass
class Demonstration:
    """Ordered (state, action, time) samples from one teleoperated run."""

    samples: list[tuple[PlannerState, VelocityCommand, float]]

    def __post_init__(self):
        ts = [t for _, _, t in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class Segmentation:
    """Changepoints as 1-based sample indices; segment k holds samples i with
    tau_{k-1} <= i < tau_k, tau_0 = 0 and tau_K = N + 1."""

    changepoints: tuple[int, ...]
    n: int

    def __post_init__(self):
        cps = tuple(sorted(self.changepoints))
        if any(not 1 <= c <= self.n for c in cps):
            raise ValueError("changepoints must lie in [1, N]")
        if len(set(cps)) != len(cps):
            raise ValueError("changepoints must be distinct")
        object.__setattr__(self, "changepoints", cps)

    @property
    def k(self) -> int:
        return len(self.changepoints) + 1

    def boundaries(self) -> list[tuple[int, int]]:
        """Half-open 1-based (lo, hi) index ranges per segment."""
        taus = (0,) + self.changepoints + (self.n + 1,)
        return [(max(taus[j], 1), taus[j + 1]) for j in range(self.k)]


def extract_features(demo: Demonstration) -> np.ndarray:
    """Per-sample (v, omega, min range, mean range), z-normalized over the demo."""
    if len(demo) < 2:
        raise ValueError("need at least 2 samples")
    feats = np.array(
        [
            [a.v, a.omega, x.scan.min_range(), float(np.mean(x.scan.ranges))]
            for x, a, _ in demo.samples
        ]
    )
    mu = feats.mean(axis=0)
    sd = feats.std(axis=0)
    sd[sd < 1e-12] = 1.0  # constant dimensions normalize to zero
    return (feats - mu) / sd


def detect_changepoints(
    features: np.ndarray,
    hazard: float = HAZARD,
    min_segment: int = MIN_SEGMENT,
) -> Segmentation:
    """Run-length posterior recursion; a changepoint is declared wherever the
    MAP run length resets. Dimensions are modeled independently and their
    predictive log-probabilities summed."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats[:, None]
    n, d = feats.shape
    if n < 2:
        raise ValueError("need at least 2 observations")

    log_r = np.array([0.0])  # log posterior over run lengths
    mu = np.full((1, d), MU0)
    kappa = np.full((1, d), KAPPA0)
    alpha = np.full((1, d), ALPHA0)
    beta = np.full((1, d), BETA0)
    log_h = np.log(hazard)
    log_1mh = np.log1p(-hazard)

    map_runs = np.empty(n, dtype=np.int64)
    for t in range(n):
        x = feats[t]
        df = 2.0 * alpha
        scale = np.sqrt(beta * (kappa + 1.0) / (alpha * kappa))
        log_pred = stats.t.logpdf(x[None, :], df, loc=mu, scale=scale).sum(axis=1)

        log_growth = log_r + log_pred + log_1mh
        log_cp = np.logaddexp.reduce(log_r + log_pred + log_h)
        log_r = np.concatenate([[log_cp], log_growth])
        log_r -= np.logaddexp.reduce(log_r)
        map_runs[t] = int(np.argmax(log_r))

        new_mu = (kappa * mu + x[None, :]) / (kappa + 1.0)
        new_beta = beta + kappa * (x[None, :] - mu) ** 2 / (2.0 * (kappa + 1.0))
        mu = np.vstack([np.full((1, d), MU0), new_mu])
        beta = np.vstack([np.full((1, d), BETA0), new_beta])
        kappa = np.vstack([np.full((1, d), KAPPA0), kappa + 1.0])
        alpha = np.vstack([np.full((1, d), ALPHA0), alpha + 0.5])

    raw: list[int] = []
    confirm = 5  # an outlier reset snaps back to the old run within a few samples
    for t in range(1, n):
        # a genuine reset collapses the MAP run and keeps tracking the new run
        if map_runs[t] < 0.5 * map_runs[t - 1]:
            ahead = min(t + confirm, n - 1)
            if map_runs[ahead] <= map_runs[t] + (ahead - t) + 2:
                raw.append(t - int(map_runs[t]) + 1)  # 1-based first index of new segment

    cps: list[int] = []
    last = 1
    for c in sorted(set(raw)):
        if c - last >= min_segment and (n + 1) - c >= min_segment:
            cps.append(c)
            last = c
    return Segmentation(changepoints=tuple(cps), n=n)


def segment(demo: Demonstration, seg: Segmentation) -> list[Demonstration]:
    """Split the demo along the segmentation's half-open 1-based ranges."""
    if seg.n != len(demo):
        raise ValueError("segmentation length mismatch")
    parts = []
    for lo, hi in seg.boundaries():
        parts.append(Demonstration(samples=demo.samples[lo - 1 : hi - 1]))
    return parts


def segment_labels(seg: Segmentation) -> np.ndarray:
    """Per-sample 1-based context label implied by the segmentation."""
    labels = np.empty(seg.n, dtype=np.int64)
    for k, (lo, hi) in enumerate(seg.boundaries(), start=1):
        labels[lo - 1 : hi - 1] = k
    return labels
