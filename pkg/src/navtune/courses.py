"""Hand-built planted courses with known context structure.

The procedural generator produces organic clutter; these courses instead
plant exact geometry (open halls, narrow doors, walls) so tests and demos
know the ground-truth contexts and difficulty by construction.
"""

from __future__ import annotations

import numpy as np

from .types import EnvSpec, Pose

CELLS = 120
RESOLUTION = 0.05  # 6 m x 6 m world


def _blank() -> np.ndarray:
    return np.zeros((CELLS, CELLS), dtype=bool)


def _wall(grid: np.ndarray, x0: float, y0: float, x1: float, y1: float) -> None:
    """Fill the axis-aligned rectangle [x0, x1] x [y0, y1] (meters)."""
    j0, j1 = int(x0 / RESOLUTION), int(np.ceil(x1 / RESOLUTION))
    i0, i1 = int(y0 / RESOLUTION), int(np.ceil(y1 / RESOLUTION))
    grid[max(i0, 0) : min(i1, CELLS), max(j0, 0) : min(j1, CELLS)] = True


def _spec(grid: np.ndarray, seed: int) -> EnvSpec:
    size = CELLS * RESOLUTION
    return EnvSpec(
        grid=grid,
        resolution=RESOLUTION,
        start_pose=Pose(size / 2, size * 0.1, np.pi / 2),
        goal=(size / 2, size * 0.9),
        seed=seed,
        difficulty=1.0,
    )


def corridor_course(gap: float = 0.7, seed: int = 9001) -> EnvSpec:
    """One open hall, then a narrow door of width ``gap`` mid-course, then
    open again. Two ground-truth contexts: open and narrow."""
    g = _blank()
    half = (6.0 - gap) / 2.0
    _wall(g, 0.0, 2.7, half, 3.3)
    _wall(g, 6.0 - half, 2.7, 6.0, 3.3)
    return _spec(g, seed)


def slalom_course(gap: float = 0.7, seed: int = 9002) -> EnvSpec:
    """Three staggered walls forcing alternating narrow passages; a longer
    mixed course with repeated context switches."""
    g = _blank()
    _wall(g, 0.0, 1.6, 6.0 - gap - 1.0, 2.0)
    _wall(g, gap + 1.0, 3.0, 6.0, 3.4)
    _wall(g, 0.0, 4.4, 6.0 - gap - 1.0, 4.8)
    return _spec(g, seed)


def door_course(gap: float = 0.5, seed: int = 9003) -> EnvSpec:
    """A single door barely wider than the robot; sloppy tuning clips the
    frame and triggers recovery, careful tuning threads it."""
    g = _blank()
    half = (6.0 - gap) / 2.0
    _wall(g, 0.0, 2.8, half, 3.2)
    _wall(g, 6.0 - half, 2.8, 6.0, 3.2)
    return _spec(g, seed)


def offset_door_course(gap: float = 0.6, cx: float = 1.0, seed: int = 9005) -> EnvSpec:
    """A narrow door displaced sideways from the start-goal line, forcing a
    detour and a tight aligned entry; poorly tuned parameters reliably end up
    in recovery at the frame, and the default tuning can fail outright at
    small gaps."""
    g = _blank()
    _wall(g, 0.0, 2.8, cx - gap / 2, 3.2)
    _wall(g, cx + gap / 2, 2.8, 6.0, 3.2)
    return _spec(g, seed)


def open_course(seed: int = 9004) -> EnvSpec:
    """Completely free hall; the trivial baseline world."""
    return _spec(_blank(), seed)


def two_regime_course(seed: int = 0, base_width: float = 0.50) -> EnvSpec:
    """A tall course with two regimes whose parameter needs conflict head-on.

    The first half is an open hall crossed by three thin walls, each pierced
    by a laterally offset door: threading the doors demands a small
    inflation radius (a generous one walls the frame off and strands the
    planner in recovery), and the hall rewards the saturated cruise speed.
    The second half is a tight six-bend staircase channel whose width sits
    one costmap cell above the robot's diameter: surviving the bends demands
    a generous inflation radius (a small one lets the path hug the corners
    into collision). No single parameter vector satisfies both halves, so a
    context-switching policy is the only tuning that traverses the whole
    course both fast and reliably. The seed jitters the geometry slightly."""
    rng = np.random.default_rng(seed)
    rows = 440  # 22 m tall, 6 m wide: a door hall, then a tight staircase
    g = np.zeros((rows, CELLS), dtype=bool)
    w = base_width + rng.uniform(0.0, 0.03)
    y0 = 12.2 + rng.uniform(-0.3, 0.3)
    step = 1.45 + rng.uniform(-0.1, 0.1)
    xs = [
        1.1 + rng.uniform(-0.15, 0.15),
        4.2 + rng.uniform(-0.15, 0.15),
        1.4 + rng.uniform(-0.15, 0.15),
        4.0 + rng.uniform(-0.15, 0.15),
    ]
    ys = [y0 + (i + 1) * step for i in range(3)]
    i0 = int(y0 / RESOLUTION)
    g[i0:rows, :] = True

    def wall(x0: float, ya: float, x1: float, yb: float) -> None:
        g[
            max(int(ya / RESOLUTION), 0) : min(int(np.ceil(yb / RESOLUTION)), rows),
            max(int(x0 / RESOLUTION), 0) : min(int(np.ceil(x1 / RESOLUTION)), CELLS),
        ] = True

    def carve(x0: float, ya: float, x1: float, yb: float) -> None:
        x0, x1 = min(x0, x1), max(x0, x1)
        j0, j1 = int(x0 / RESOLUTION), int(np.ceil(x1 / RESOLUTION))
        ia, ib = int(ya / RESOLUTION), int(np.ceil(yb / RESOLUTION))
        g[max(ia, 0) : min(ib, rows), max(j0, 0) : min(j1, CELLS)] = False

    carve(xs[0] - w / 2, y0, xs[0] + w / 2, ys[0] + w / 2)
    carve(xs[0] - w / 2, ys[0] - w / 2, xs[1] + w / 2, ys[0] + w / 2)
    carve(xs[1] - w / 2, ys[0] - w / 2, xs[1] + w / 2, ys[1] + w / 2)
    carve(xs[2] - w / 2, ys[1] - w / 2, xs[1] + w / 2, ys[1] + w / 2)
    carve(xs[2] - w / 2, ys[1] - w / 2, xs[2] + w / 2, ys[2] + w / 2)
    carve(xs[2] - w / 2, ys[2] - w / 2, xs[3] + w / 2, ys[2] + w / 2)
    carve(xs[3] - w / 2, ys[2] - w / 2, xs[3] + w / 2, ys[2] + 2.0)
    # pre-slot: a straight 0.6 m channel extending the staircase mouth into
    # the hall. It surrounds the robot tightly well before the first bend,
    # so a scan-driven regime switch fires with a straight run to spare; a
    # taper at its lip eases the entry.
    wall(xs[0] - 0.75, y0 - 1.2, xs[0] - 0.3, y0)
    wall(xs[0] + 0.3, y0 - 1.2, xs[0] + 0.75, y0)
    wall(xs[0] - 0.6, y0 - 1.6, xs[0] - 0.42, y0 - 1.2)
    wall(xs[0] + 0.42, y0 - 1.6, xs[0] + 0.6, y0 - 1.2)
    # hall door walls: thin cross-walls with offset doorways. The gaps are
    # generous for a small inflation radius but walled shut by a large one,
    # so hall driving pins the inflation choice just as firmly as the
    # staircase does — at the opposite value.
    for k, dy in enumerate((3.0, 5.2, 7.4)):
        gx = (2.4 if k % 2 == 0 else 3.6) + rng.uniform(-0.1, 0.1)
        gy = dy + rng.uniform(-0.2, 0.2)
        wall(0.0, gy, gx - 0.275, gy + 0.15)
        wall(gx + 0.275, gy, 6.0, gy + 0.15)
    return EnvSpec(
        grid=g,
        resolution=RESOLUTION,
        start_pose=Pose(3.0, 1.0, np.pi / 2),
        goal=(xs[3], ys[2] + 1.4),
        seed=seed,
        difficulty=1.0,
    )
