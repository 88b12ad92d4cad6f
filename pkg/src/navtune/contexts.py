"""Context classification: softmax and evidential classifiers, the
confidence gate, and the sliding-window mode filter."""

from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .types import PlannerState, SCAN_MAX_RANGE

HIDDEN = 128
EPOCHS = 200
BATCH = 64
LR = 1e-3
KL_ANNEAL_EPOCHS = 50
DEFAULT_EPS_U = 0.8
DEFAULT_WINDOW = 10  # 1 s of history at 10 Hz


def featurize_state(x: PlannerState) -> np.ndarray:
    """721-dim feature: scan ranges normalized by the cap, then the relative
    local-goal angle divided by pi."""
    return np.concatenate([x.scan.ranges / SCAN_MAX_RANGE, [x.goal_angle() / math.pi]])


@dataclass
class ContextDataset:
    """(features, 1-based labels) pairs; at least one sample per label."""

    features: np.ndarray  # (N, F)
    labels: np.ndarray  # (N,) ints in [1, K]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.features) != len(self.labels):
            raise ValueError("features/labels length mismatch")
        k = int(self.labels.max())
        present = set(np.unique(self.labels))
        if present != set(range(1, k + 1)):
            raise ValueError(f"labels must cover 1..K contiguously, got {sorted(present)}")

    @property
    def k(self) -> int:
        return int(self.labels.max())


def _mlp(in_dim: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_dim, HIDDEN),
        nn.ReLU(),
        nn.Linear(HIDDEN, HIDDEN),
        nn.ReLU(),
        nn.Linear(HIDDEN, out_dim),
    )


class SoftmaxClassifier:
    """Cross-entropy context classifier; predicts 1-based labels."""

    def __init__(self, net: nn.Sequential, k: int, in_dim: int):
        self.net = net
        self.k = k
        self.in_dim = in_dim

    def scores(self, feats: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.net(torch.as_tensor(np.atleast_2d(feats), dtype=torch.float32)).numpy()

    def predict(self, feats: np.ndarray) -> np.ndarray:
        return self.scores(feats).argmax(axis=1) + 1

    def save(self, path: str | Path) -> None:
        _save_model(self, path, kind="softmax")

    @staticmethod
    def load(path: str | Path) -> "SoftmaxClassifier":
        return _load_model(path)


class EvidentialClassifier:
    """Dirichlet-evidence classifier emitting (label, uncertainty u in (0, 1]).

    Evidence is the softplus head scaled by a training-support kernel: a
    feed-forward net extrapolates ever-growing activations far from the data,
    which would drive u toward 0 exactly where confidence should vanish.
    Attenuating evidence by distance to the nearest class centroid (measured
    in per-class mean radii) restores u -> 1 off-distribution while leaving
    in-distribution predictions untouched.  The kernel is symmetric in the
    class labels, so u stays invariant under label permutation.
    """

    SUPPORT_FREE_RADII = 3.0  # no attenuation within this many class radii
    SUPPORT_FALLOFF = 3.0  # gaussian falloff scale beyond that, in radii

    def __init__(
        self,
        net: nn.Sequential,
        k: int,
        in_dim: int,
        centroids: np.ndarray | None = None,
        radii: np.ndarray | None = None,
    ):
        self.net = net
        self.k = k
        self.in_dim = in_dim
        self.centroids = None if centroids is None else np.asarray(centroids, dtype=np.float64)
        self.radii = None if radii is None else np.asarray(radii, dtype=np.float64)

    def _support(self, feats: np.ndarray) -> np.ndarray:
        """Training-support factor in (0, 1]: 1 near the data, -> 0 far away."""
        if self.centroids is None:
            return np.ones(len(feats))
        d = np.linalg.norm(feats[:, None, :] - self.centroids[None, :, :], axis=2)
        nearest = (d / self.radii[None, :]).min(axis=1)
        excess = np.maximum(0.0, nearest - self.SUPPORT_FREE_RADII)
        return np.exp(-0.5 * (excess / self.SUPPORT_FALLOFF) ** 2)

    def alphas(self, feats: np.ndarray) -> np.ndarray:
        feats = np.atleast_2d(feats)
        with torch.no_grad():
            ev = F.softplus(self.net(torch.as_tensor(feats, dtype=torch.float32))).numpy()
        return ev * self._support(feats)[:, None] + 1.0

    def predict(self, feats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (1-based labels, uncertainties u = K / sum(alpha))."""
        a = self.alphas(feats)
        return a.argmax(axis=1) + 1, self.k / a.sum(axis=1)

    def save(self, path: str | Path) -> None:
        _save_model(self, path, kind="evidential")

    @staticmethod
    def load(path: str | Path) -> "EvidentialClassifier":
        return _load_model(path)


def _save_model(model, path: str | Path, kind: str) -> None:
    path = Path(path)
    torch.save(model.net.state_dict(), path)
    manifest = {"kind": kind, "k": model.k, "in_dim": model.in_dim, "hidden": HIDDEN}
    if getattr(model, "centroids", None) is not None:
        manifest["centroids"] = model.centroids.tolist()
        manifest["radii"] = model.radii.tolist()
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(manifest))


def _load_model(path: str | Path):
    path = Path(path)
    manifest = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    net = _mlp(manifest["in_dim"], manifest["k"])
    net.load_state_dict(torch.load(path, weights_only=True))
    net.eval()
    if manifest["kind"] == "softmax":
        return SoftmaxClassifier(net, manifest["k"], manifest["in_dim"])
    centroids = manifest.get("centroids")
    radii = manifest.get("radii")
    return EvidentialClassifier(
        net,
        manifest["k"],
        manifest["in_dim"],
        centroids=None if centroids is None else np.array(centroids),
        radii=None if radii is None else np.array(radii),
    )


def _batches(n: int, gen: torch.Generator):
    order = torch.randperm(n, generator=gen)
    for i in range(0, n, BATCH):
        yield order[i : i + BATCH]


def train_softmax(dataset: ContextDataset, epochs: int = EPOCHS, seed: int = 0) -> SoftmaxClassifier:
    if dataset.k < 2:
        raise ValueError("softmax training needs K >= 2")
    gen = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    net = _mlp(dataset.features.shape[1], dataset.k)
    opt = torch.optim.Adam(net.parameters(), lr=LR)
    xs = torch.as_tensor(dataset.features, dtype=torch.float32)
    ys = torch.as_tensor(dataset.labels - 1)
    for _ in range(epochs):
        for idx in _batches(len(xs), gen):
            opt.zero_grad()
            loss = F.cross_entropy(net(xs[idx]), ys[idx])
            loss.backward()
            opt.step()
    net.eval()
    return SoftmaxClassifier(net, dataset.k, dataset.features.shape[1])


def _edl_loss(alpha: torch.Tensor, y_onehot: torch.Tensor, kl_weight: float) -> torch.Tensor:
    """Expected-MSE evidential loss with KL-to-uniform regularizer."""
    s = alpha.sum(dim=1, keepdim=True)
    p = alpha / s
    err = ((y_onehot - p) ** 2).sum(dim=1)
    var = (p * (1 - p) / (s + 1)).sum(dim=1)
    loss = err + var
    # KL(Dir(alpha_tilde) || Dir(1)) on the misleading evidence
    at = y_onehot + (1 - y_onehot) * alpha
    st = at.sum(dim=1, keepdim=True)
    k = alpha.shape[1]
    kl = (
        torch.lgamma(st.squeeze(1))
        - torch.lgamma(torch.tensor(float(k)))
        - torch.lgamma(at).sum(dim=1)
        + ((at - 1) * (torch.digamma(at) - torch.digamma(st))).sum(dim=1)
    )
    return (loss + kl_weight * kl).mean()


def train_evidential(dataset: ContextDataset, epochs: int = EPOCHS, seed: int = 0) -> EvidentialClassifier:
    if dataset.k < 1:
        raise ValueError("need at least one context")
    gen = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    k = dataset.k
    net = _mlp(dataset.features.shape[1], k)
    opt = torch.optim.Adam(net.parameters(), lr=LR)
    xs = torch.as_tensor(dataset.features, dtype=torch.float32)
    ys = F.one_hot(torch.as_tensor(dataset.labels - 1), num_classes=k).float()
    for epoch in range(epochs):
        kl_w = min(1.0, epoch / KL_ANNEAL_EPOCHS)
        for idx in _batches(len(xs), gen):
            opt.zero_grad()
            alpha = F.softplus(net(xs[idx])) + 1.0
            loss = _edl_loss(alpha, ys[idx], kl_w)
            loss.backward()
            opt.step()
    net.eval()
    centroids = np.stack(
        [dataset.features[dataset.labels == c].mean(axis=0) for c in range(1, k + 1)]
    )
    radii = np.array(
        [
            max(
                1e-9,
                float(
                    np.mean(
                        np.linalg.norm(
                            dataset.features[dataset.labels == c] - centroids[c - 1], axis=1
                        )
                    )
                ),
            )
            for c in range(1, k + 1)
        ]
    )
    return EvidentialClassifier(net, k, dataset.features.shape[1], centroids, radii)


def gate(label: int, u: float, eps_u: float) -> int:
    """Confidence gate: the predicted context when u >= eps_u, else the
    default context 0."""
    if not 0.0 < eps_u <= 1.0:
        raise ValueError("eps_u must lie in (0, 1]")
    return int(label) if u >= eps_u else 0


class PredictionWindow:
    """Ring of the last p gated predictions acting as a mode filter.

    Ties break toward the most recently pushed tied label, favoring
    responsiveness. During warm-up the mode is over the entries seen so far.
    """

    def __init__(self, p: int = DEFAULT_WINDOW):
        if p < 1:
            raise ValueError("window length must be >= 1")
        self.p = p
        self._ring: deque[int] = deque(maxlen=p)

    def push(self, label: int) -> int:
        self._ring.append(int(label))
        counts = Counter(self._ring)
        top = max(counts.values())
        tied = {c for c, n in counts.items() if n == top}
        for label in reversed(self._ring):
            if label in tied:
                return label
        raise AssertionError("unreachable")

    def reset(self) -> None:
        self._ring.clear()
