"""Library-based parameter policies learned from a full demonstration or
from a handful of corrective interventions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .blackbox import OptBudget, tune_segment
from .changepoint import (
    Demonstration,
    Segmentation,
    detect_changepoints,
    extract_features,
    segment,
    segment_labels,
)
from .contexts import (
    DEFAULT_EPS_U,
    DEFAULT_WINDOW,
    ContextDataset,
    EvidentialClassifier,
    PredictionWindow,
    SoftmaxClassifier,
    featurize_state,
    gate,
    train_evidential,
    train_softmax,
)
from .types import ParamSet, PlannerState, Pose, VelocityCommand


@dataclass
class ParameterLibrary:
    """Finite map from context index to ParamSet; index 0, when present,
    holds the default parameters."""

    entries: dict[int, ParamSet]

    def __post_init__(self):
        idx = sorted(self.entries)
        lo = idx[0]
        if lo not in (0, 1) or idx != list(range(lo, lo + len(idx))):
            raise ValueError(f"library indices must be contiguous from 0 or 1, got {idx}")

    def __getitem__(self, c: int) -> ParamSet:
        return self.entries[c]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> list[dict]:
        return [{"context": c, "params": p.to_json()} for c, p in sorted(self.entries.items())]

    @staticmethod
    def from_json(rows: list[dict]) -> "ParameterLibrary":
        return ParameterLibrary({int(r["context"]): ParamSet.from_json(r["params"]) for r in rows})


@dataclass
class InterventionRecord:
    """One human takeover: its kind tag, the rewound start pose, and the
    teleoperated (state, action) samples."""

    kind: str  # "A" (failure) or "B" (suboptimal); metadata only for learning
    reset_pose: Pose
    samples: list[tuple[PlannerState, VelocityCommand]]

    def __post_init__(self):
        if self.kind not in ("A", "B"):
            raise ValueError("intervention kind must be 'A' or 'B'")

    def as_demo(self) -> Demonstration:
        from .types import TICK

        return Demonstration(samples=[(x, a, i * TICK) for i, (x, a) in enumerate(self.samples)])


class LibraryPolicy:
    """Parameter policy: featurize, classify, optionally gate, mode-filter,
    then look the context up in the library. Queried every tick."""

    cadence_ticks = 1

    def __init__(
        self,
        library: ParameterLibrary,
        classifier: SoftmaxClassifier | EvidentialClassifier | None,
        gated: bool,
        eps_u: float = DEFAULT_EPS_U,
        window: int = DEFAULT_WINDOW,
    ):
        if classifier is not None and classifier.k != len(library) - (0 in library.entries):
            raise ValueError("classifier K must match the number of learned contexts")
        self.library = library
        self.classifier = classifier
        self.gated = gated
        self.eps_u = eps_u
        self.window = PredictionWindow(window)

    def reset(self) -> None:
        self.window.reset()

    def raw_context(self, x: PlannerState) -> int:
        if self.classifier is None:
            return min(self.library.entries)
        feats = featurize_state(x)
        if isinstance(self.classifier, EvidentialClassifier):
            labels, us = self.classifier.predict(feats)
            c = int(labels[0])
            if self.gated:
                c = gate(c, float(us[0]), self.eps_u)
            return c
        return int(self.classifier.predict(feats)[0])

    def params_for(self, x: PlannerState) -> ParamSet:
        c = self.window.push(self.raw_context(x))
        return self.library[c]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        manifest = {
            "library": self.library.to_json(),
            "gated": self.gated,
            "eps_u": self.eps_u,
            "window": self.window.p,
            "classifier": None,
        }
        if self.classifier is not None:
            model_path = path.with_suffix(".model.pt")
            self.classifier.save(model_path)
            manifest["classifier"] = model_path.name
        path.write_text(json.dumps(manifest))

    @staticmethod
    def load(path: str | Path) -> "LibraryPolicy":
        path = Path(path)
        manifest = json.loads(path.read_text())
        classifier = None
        if manifest["classifier"]:
            from .contexts import _load_model

            classifier = _load_model(path.parent / manifest["classifier"])
        return LibraryPolicy(
            ParameterLibrary.from_json(manifest["library"]),
            classifier,
            manifest["gated"],
            manifest["eps_u"],
            manifest["window"],
        )


def state_features(states: list[PlannerState]) -> np.ndarray:
    return np.stack([featurize_state(x) for x in states])


def learn_appld(
    demo: Demonstration,
    planner: Callable[[ParamSet, PlannerState, VelocityCommand], np.ndarray],
    budget: OptBudget,
    segmentation: Segmentation | None = None,
    classifier_epochs: int = 100,
) -> LibraryPolicy:
    """Full-demonstration pipeline: segment, train a softmax context
    classifier on the induced labels, then fit one ParamSet per segment by
    behavior cloning. Manual segment boundaries may be supplied to bypass
    detection."""
    if segmentation is None:
        segmentation = detect_changepoints(extract_features(demo))
    labels = segment_labels(segmentation)
    parts = segment(demo, segmentation)

    entries = {}
    for k, part in enumerate(parts, start=1):
        theta, _ = tune_segment(part, planner, budget)
        entries[k] = theta

    classifier = None
    if segmentation.k >= 2:
        ds = ContextDataset(state_features([x for x, _, _ in demo.samples]), labels)
        classifier = train_softmax(ds, epochs=classifier_epochs, seed=budget.seed)
    return LibraryPolicy(ParameterLibrary(entries), classifier, gated=False)


def learn_appli(
    interventions: list[InterventionRecord],
    default_params: ParamSet,
    planner: Callable[[ParamSet, PlannerState, VelocityCommand], np.ndarray],
    budget: OptBudget,
    eps_u: float = DEFAULT_EPS_U,
    gated: bool = True,
    classifier_epochs: int = 100,
) -> LibraryPolicy:
    """Intervention pipeline: evidential classifier over the intervention
    contexts, one behavior-cloned ParamSet per intervention, and the default
    parameters at index 0 behind the confidence gate."""
    entries = {0: default_params}
    if not interventions:
        return LibraryPolicy(ParameterLibrary(entries), None, gated=gated, eps_u=eps_u)

    states, labels = [], []
    for i, rec in enumerate(interventions, start=1):
        theta, _ = tune_segment(rec.as_demo(), planner, budget)
        entries[i] = theta
        states.extend(x for x, _ in rec.samples)
        labels.extend([i] * len(rec.samples))

    ds = ContextDataset(state_features(states), np.array(labels))
    classifier = train_evidential(ds, epochs=classifier_epochs, seed=budget.seed)
    return LibraryPolicy(ParameterLibrary(entries), classifier, gated=gated, eps_u=eps_u)


def policy_step(policy: LibraryPolicy, x: PlannerState) -> ParamSet:
    """One deployment-loop query of a library policy."""
    return policy.params_for(x)
