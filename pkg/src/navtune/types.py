"""Core value types shared across the simulator, planner, and learners."""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

# Control runs at 10 Hz; all durations in the codebase are integer ticks.
TICK = 0.1
SCAN_BEAMS = 720
SCAN_MAX_RANGE = 2.0
ROBOT_RADIUS = 0.21
TOP_SPEED = 2.0

PARAM_NAMES = (
    "max_vel_x",
    "max_vel_theta",
    "vx_samples",
    "vtheta_samples",
    "occdist_scale",
    "pdist_scale",
    "gdist_scale",
    "inflation_radius",
)
PARAM_LOW = np.array([0.1, 0.314, 4, 8, 0.1, 0.1, 0.1, 0.1])
PARAM_HIGH = np.array([2.0, 3.14, 12, 40, 1.0, 1.0, 1.0, 0.6])
# Fields that are sample counts; continuous policies round these at the edge.
PARAM_INTEGER = np.array([False, False, True, True, False, False, False, False])

DEFAULT_PARAMS_VEC = np.array([0.5, 1.57, 6, 20, 0.1, 0.75, 1.0, 0.3])


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"pose components must be finite: ({self.x}, {self.y}, {self.heading})")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"command components must be finite: ({self.v}, {self.omega})")
        if abs(self.v) > TOP_SPEED + 1e-9:
            raise ValueError(f"|v|={abs(self.v)} exceeds platform top speed {TOP_SPEED}")


@dataclass(frozen=True)
class Scan:
    """One full 360-degree sweep: 720 evenly spaced beams, ranges in (0, 2] m."""

    ranges: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=np.float64)
        if r.shape != (SCAN_BEAMS,):
            raise ValueError(f"scan must have exactly {SCAN_BEAMS} beams, got {r.shape}")
        object.__setattr__(self, "ranges", r)

    def min_range(self) -> float:
        return float(np.min(self.ranges))


def min_obstacle_distance(scan: Scan) -> float:
    """Minimal value among the scan's beams."""
    return scan.min_range()


@dataclass(frozen=True)
class ParamSet:
    """One point in the planner's 8-dimensional parameter space."""

    max_vel_x: float
    max_vel_theta: float
    vx_samples: int
    vtheta_samples: int
    occdist_scale: float
    pdist_scale: float
    gdist_scale: float
    inflation_radius: float

    def __post_init__(self):
        vec = self.as_array()
        if np.any(vec < PARAM_LOW - 1e-9) or np.any(vec > PARAM_HIGH + 1e-9):
            raise ValueError(f"parameters out of bounds: {vec}")
        object.__setattr__(self, "vx_samples", int(round(self.vx_samples)))
        object.__setattr__(self, "vtheta_samples", int(round(self.vtheta_samples)))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=np.float64)

    def to_json(self) -> dict:
        d = asdict(self)
        d["vx_samples"] = int(d["vx_samples"])
        d["vtheta_samples"] = int(d["vtheta_samples"])
        return d

    @staticmethod
    def from_array(vec: np.ndarray) -> "ParamSet":
        vec = clip_params(np.asarray(vec, dtype=np.float64))
        kwargs = dict(zip(PARAM_NAMES, vec))
        kwargs["vx_samples"] = int(round(kwargs["vx_samples"]))
        kwargs["vtheta_samples"] = int(round(kwargs["vtheta_samples"]))
        return ParamSet(**kwargs)

    @staticmethod
    def from_json(d: dict) -> "ParamSet":
        return ParamSet(**{n: d[n] for n in PARAM_NAMES})

    @staticmethod
    def default() -> "ParamSet":
        return ParamSet.from_array(DEFAULT_PARAMS_VEC)


def clip_params(vec: np.ndarray) -> np.ndarray:
    """Clip a raw parameter vector into the bounding box, rounding integer fields."""
    out = np.clip(vec, PARAM_LOW, PARAM_HIGH)
    out[PARAM_INTEGER] = np.round(out[PARAM_INTEGER])
    return out


def params_to_unit(vec: np.ndarray) -> np.ndarray:
    """Map a parameter vector into [-1, 1]^8."""
    return 2.0 * (vec - PARAM_LOW) / (PARAM_HIGH - PARAM_LOW) - 1.0


def params_from_unit(unit: np.ndarray) -> np.ndarray:
    """Inverse of :func:`params_to_unit`, with clipping and integer rounding."""
    vec = PARAM_LOW + (np.clip(unit, -1.0, 1.0) + 1.0) / 2.0 * (PARAM_HIGH - PARAM_LOW)
    return clip_params(vec)


@dataclass(frozen=True)
class EnvSpec:
    """A generated 2D world: occupancy grid plus fixed start and goal."""

    grid: np.ndarray  # bool, True = occupied
    resolution: float
    start_pose: Pose
    goal: tuple[float, float]
    seed: int
    difficulty: float

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=bool)
        if g.shape[0] < 16 or g.shape[1] < 16:
            raise ValueError("grid must be at least 16x16")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "grid", g)

    @property
    def height_m(self) -> float:
        return self.grid.shape[0] * self.resolution

    @property
    def width_m(self) -> float:
        return self.grid.shape[1] * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(y / self.resolution), int(x / self.resolution)

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width_m and 0.0 <= y < self.height_m

    def to_json(self) -> dict:
        packed = np.packbits(self.grid.astype(np.uint8), axis=None)
        return {
            "bitmap": base64.b64encode(packed.tobytes()).decode("ascii"),
            "shape": list(self.grid.shape),
            "resolution": self.resolution,
            "start": [self.start_pose.x, self.start_pose.y, self.start_pose.heading],
            "goal": list(self.goal),
            "seed": self.seed,
            "difficulty": self.difficulty,
        }

    @staticmethod
    def from_json(d: dict) -> "EnvSpec":
        shape = tuple(d["shape"])
        raw = np.frombuffer(base64.b64decode(d["bitmap"]), dtype=np.uint8)
        grid = np.unpackbits(raw)[: shape[0] * shape[1]].reshape(shape).astype(bool)
        sx, sy, sh = d["start"]
        return EnvSpec(
            grid=grid,
            resolution=d["resolution"],
            start_pose=Pose(sx, sy, sh),
            goal=tuple(d["goal"]),
            seed=d["seed"],
            difficulty=d["difficulty"],
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f)

    @staticmethod
    def load(path) -> "EnvSpec":
        with open(path) as f:
            return EnvSpec.from_json(json.load(f))


@dataclass
class PlannerState:
    """Everything the local planner sees at one tick."""

    scan: Scan
    pose: Pose
    global_goal: tuple[float, float]
    local_goal: tuple[float, float]
    global_path: np.ndarray  # (P, 2) points in meters

    def goal_angle(self) -> float:
        """Relative bearing of the local goal, in (-pi, pi]."""
        dx = self.local_goal[0] - self.pose.x
        dy = self.local_goal[1] - self.pose.y
        return normalize_angle(math.atan2(dy, dx) - self.pose.heading)


@dataclass
class PlannerOutput:
    command: VelocityCommand
    recovery: bool = False
    sample_scores: np.ndarray | None = None  # (n, 3) rows of (v, omega, cost)


class InvalidPose(Exception):
    """Robot pose lies inside an occupied cell."""


class NoPath(Exception):
    """Start and goal are not connected through free space."""
