"""Learning from evaluative feedback: the feedback predictor, the discrete
argmax policy over a parameter library, and the entropy-regularized
continuous policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .contexts import featurize_state
from .library import ParameterLibrary
from .types import ParamSet, PlannerState, params_from_unit, params_to_unit

HIDDEN = 256
BATCH = 64
LR = 3e-4
FEEDBACK_LATENCY_TICKS = 5  # humans react late; credit the state 0.5 s back


class Rejected(Exception):
    """Malformed feedback value for the store's mode."""


class NoData(Exception):
    """Training requested on an empty feedback store."""


@dataclass(frozen=True)
class FeedbackSample:
    features: np.ndarray
    theta: np.ndarray  # normalized [-1, 1] parameter vector (continuous) or one slot (discrete)
    theta_index: int  # library index for discrete mode, -1 otherwise
    e: float
    tick: int


@dataclass
class FeedbackStore:
    """Append-only feedback dataset.

    ``observe`` records the (features, theta) active at each tick;
    ``ingest`` binds a human signal to the state a fixed latency earlier.
    """

    mode: str  # "discrete" | "continuous"
    latency: int = FEEDBACK_LATENCY_TICKS
    samples: list[FeedbackSample] = field(default_factory=list)
    _history: dict[int, tuple[np.ndarray, np.ndarray, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("discrete", "continuous"):
            raise ValueError("mode must be 'discrete' or 'continuous'")

    def observe(self, tick: int, features: np.ndarray, theta_unit: np.ndarray, theta_index: int = -1) -> None:
        self._history[tick] = (np.asarray(features, dtype=np.float64), np.asarray(theta_unit, dtype=np.float64), theta_index)

    def _check(self, e: float) -> float:
        e = float(e)
        if self.mode == "discrete" and e not in (0.0, 1.0):
            raise Rejected(f"discrete feedback must be 0 or 1, got {e}")
        if self.mode == "continuous" and not 0.0 <= e <= 1.0:
            raise Rejected(f"continuous feedback must lie in [0, 1], got {e}")
        return e

    def ingest(self, tick: int, e: float) -> None:
        e = self._check(e)
        bound = tick - self.latency
        if bound not in self._history:
            raise Rejected(f"no observed state at tick {bound}")
        feats, theta, idx = self._history[bound]
        self.samples.append(FeedbackSample(feats, theta, idx, e, bound))

    def append(self, sample: FeedbackSample) -> None:
        self._check(sample.e)
        self.samples.append(sample)

    def __len__(self) -> int:
        return len(self.samples)


def _net(in_dim: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_dim, HIDDEN),
        nn.ReLU(),
        nn.Linear(HIDDEN, HIDDEN),
        nn.ReLU(),
        nn.Linear(HIDDEN, out_dim),
    )


class DiscretePredictor:
    """Per-library-entry feedback head, trained only on the entry in effect
    when each feedback arrived (value-network style)."""

    def __init__(self, net: nn.Sequential, k: int):
        self.net = net
        self.k = k

    def predict(self, feats: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return torch.sigmoid(self.net(torch.as_tensor(np.atleast_2d(feats), dtype=torch.float32))).numpy()


class ContinuousPredictor:
    """Feedback regressor over (features, normalized theta)."""

    def __init__(self, net: nn.Sequential, dim: int):
        self.net = net
        self.dim = dim

    def predict(self, feats: np.ndarray, theta_unit: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            inp = torch.as_tensor(
                np.concatenate([np.atleast_2d(feats), np.atleast_2d(theta_unit)], axis=1), dtype=torch.float32
            )
            return self.net(inp).squeeze(-1).numpy()


def train_predictor(store: FeedbackStore, epochs: int = 200, seed: int = 0):
    """Fit the feedback predictor: binary cross entropy for discrete
    feedback, mean squared error for continuous."""
    if len(store) == 0:
        raise NoData("empty feedback store")
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed)
    feats = torch.as_tensor(np.stack([s.features for s in store.samples]), dtype=torch.float32)
    es = torch.as_tensor([s.e for s in store.samples], dtype=torch.float32)

    if store.mode == "discrete":
        k = max(s.theta_index for s in store.samples) + 1
        idx = torch.as_tensor([s.theta_index for s in store.samples])
        net = _net(feats.shape[1], k)
        opt = torch.optim.Adam(net.parameters(), lr=LR)
        for _ in range(epochs):
            order = torch.randperm(len(feats), generator=gen)
            for i in range(0, len(feats), BATCH):
                b = order[i : i + BATCH]
                opt.zero_grad()
                logits = net(feats[b]).gather(1, idx[b, None]).squeeze(1)
                F.binary_cross_entropy_with_logits(logits, es[b]).backward()
                opt.step()
        net.eval()
        return DiscretePredictor(net, k)

    thetas = torch.as_tensor(np.stack([s.theta for s in store.samples]), dtype=torch.float32)
    net = _net(feats.shape[1] + thetas.shape[1], 1)
    opt = torch.optim.Adam(net.parameters(), lr=LR)
    inp = torch.cat([feats, thetas], dim=1)
    for _ in range(epochs):
        order = torch.randperm(len(inp), generator=gen)
        for i in range(0, len(inp), BATCH):
            b = order[i : i + BATCH]
            opt.zero_grad()
            F.mse_loss(net(inp[b]).squeeze(1), es[b]).backward()
            opt.step()
    net.eval()
    return ContinuousPredictor(net, thetas.shape[1])


def discrete_policy(x_features: np.ndarray, library: ParameterLibrary, predictor: DiscretePredictor) -> ParamSet:
    """Pick the library entry with the highest predicted feedback; ties break
    toward the lowest index for determinism."""
    preds = predictor.predict(x_features)[0]
    indices = sorted(library.entries)
    best = max(range(len(indices)), key=lambda i: (preds[i], -i))
    return library[indices[best]]


class DiscreteFeedbackPolicy:
    """Deployable wrapper: argmax-expected-feedback over a parameter library."""

    cadence_ticks = 1

    def __init__(self, library: ParameterLibrary, predictor: DiscretePredictor):
        if predictor.k != len(library):
            raise ValueError("predictor heads must match library size")
        self.library = library
        self.predictor = predictor

    def reset(self) -> None:
        pass

    def params_for(self, x: PlannerState) -> ParamSet:
        return discrete_policy(featurize_state(x)[None, :], self.library, self.predictor)


class ContinuousPolicy:
    """Squashed-Gaussian policy over the normalized parameter box, with the
    SAC-style automatically tuned entropy temperature."""

    cadence_ticks = 1

    def __init__(self, in_dim: int, dim: int, seed: int = 0):
        torch.manual_seed(seed)
        self.net = _net(in_dim, 2 * dim)
        self.dim = dim
        self.log_alpha = torch.full((1,), math.log(0.2), requires_grad=True)
        self.target_entropy = -float(dim)

    def _dist(self, feats: torch.Tensor):
        out = self.net(feats)
        mu, log_std = out[:, : self.dim], out[:, self.dim :].clamp(-5.0, 2.0)
        return mu, log_std

    def sample(self, feats: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Reparameterized sample in [-1, 1]^dim with its tanh-corrected
        log-probability."""
        mu, log_std = self._dist(feats)
        std = log_std.exp()
        eps = torch.randn_like(mu)
        pre = mu + std * eps
        act = torch.tanh(pre)
        logp = (-0.5 * ((eps) ** 2) - log_std - 0.5 * math.log(2 * math.pi)).sum(dim=1)
        logp = logp - torch.log(1 - act**2 + 1e-6).sum(dim=1)
        return act, logp

    def mean_action(self, feats: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            mu, _ = self._dist(torch.as_tensor(np.atleast_2d(feats), dtype=torch.float32))
        return torch.tanh(mu).numpy()

    def std(self, feats: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            _, log_std = self._dist(torch.as_tensor(np.atleast_2d(feats), dtype=torch.float32))
        return log_std.exp().numpy()

    def params_for(self, x: PlannerState) -> ParamSet:
        unit = self.mean_action(featurize_state(x)[None, :])[0]
        return ParamSet.from_array(params_from_unit(unit))

    def reset(self) -> None:
        pass


def train_continuous(
    store: FeedbackStore,
    critic_epochs: int = 200,
    actor_steps: int = 2000,
    seed: int = 0,
) -> tuple[ContinuousPredictor, ContinuousPolicy]:
    """Alternating critic fit and entropy-regularized actor update.

    The critic regresses collected feedback; the actor minimizes
    -F(x, theta) + alpha * log pi(theta|x), with alpha stepped toward the
    target entropy -dim as in soft actor-critic.
    """
    if len(store) == 0:
        raise NoData("empty feedback store")
    predictor = train_predictor(store, epochs=critic_epochs, seed=seed)
    torch.manual_seed(seed + 1)
    feats = torch.as_tensor(np.stack([s.features for s in store.samples]), dtype=torch.float32)
    policy = ContinuousPolicy(feats.shape[1], predictor.dim, seed=seed)
    actor_opt = torch.optim.Adam(policy.net.parameters(), lr=LR)
    alpha_opt = torch.optim.Adam([policy.log_alpha], lr=LR)
    gen = torch.Generator().manual_seed(seed + 2)

    for _ in range(actor_steps):
        b = torch.randint(0, len(feats), (BATCH,), generator=gen)
        xb = feats[b]
        act, logp = policy.sample(xb)
        q = predictor.net(torch.cat([xb, act], dim=1)).squeeze(1)
        alpha = policy.log_alpha.exp().detach()
        actor_loss = (-q + alpha * logp).mean()
        actor_opt.zero_grad()
        actor_loss.backward()
        actor_opt.step()

        alpha_loss = -(policy.log_alpha.exp() * (logp.detach() + policy.target_entropy)).mean()
        alpha_opt.zero_grad()
        alpha_loss.backward()
        alpha_opt.step()

    return predictor, policy
