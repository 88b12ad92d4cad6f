"""Procedural generation of obstacle-course worlds via cellular automata."""

from __future__ import annotations

import math
from collections import deque

import numpy as np
from scipy import ndimage

from .types import EnvSpec, Pose, ROBOT_RADIUS

GRID_CELLS = 120
RESOLUTION = 0.05
CA_ITERATIONS = 5
CA_THRESHOLD = 5  # occupied next step iff >= 5 of 8 neighbors occupied
FILL_BASE = 0.15
FILL_SPAN = 0.25
CLEAR_RADIUS = 0.5  # disc cleared around start and goal, meters
CARVE_RADIUS = 0.30  # carved corridor half-width, meters


def distance_field(grid: np.ndarray, resolution: float) -> np.ndarray:
    """Euclidean distance (meters) from each cell center to the nearest occupied cell."""
    if not grid.any():
        return np.full(grid.shape, 1e9)
    return ndimage.distance_transform_edt(~grid) * resolution


def _smooth(grid: np.ndarray) -> np.ndarray:
    neighbors = ndimage.convolve(grid.astype(np.int8), np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=np.int8), mode="constant", cval=1)
    return neighbors >= CA_THRESHOLD


def _clear_disc(grid: np.ndarray, x: float, y: float, radius: float, resolution: float) -> None:
    h, w = grid.shape
    rr = int(math.ceil(radius / resolution))
    ci, cj = int(y / resolution), int(x / resolution)
    for i in range(max(1, ci - rr), min(h - 1, ci + rr + 1)):
        for j in range(max(1, cj - rr), min(w - 1, cj + rr + 1)):
            dy = (i + 0.5) * resolution - y
            dx = (j + 0.5) * resolution - x
            if dx * dx + dy * dy <= radius * radius:
                grid[i, j] = False


def traversable_mask(grid: np.ndarray, resolution: float) -> np.ndarray:
    """Cells the robot disc can occupy without overlapping an obstacle."""
    return distance_field(grid, resolution) > ROBOT_RADIUS


def _connected(mask: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    if not (mask[a] and mask[b]):
        return False
    labels, _ = ndimage.label(mask, structure=np.ones((3, 3)))
    return labels[a] == labels[b]


def _carve_path(grid: np.ndarray, resolution: float, a: tuple[int, int], b: tuple[int, int]) -> None:
    """Breadth-first route from a to b that prefers existing free space, then
    carve a corridor wide enough for the robot along it."""
    h, w = grid.shape
    cost = np.where(grid, 50.0, 1.0)
    dist = np.full((h, w), np.inf)
    prev = np.full((h, w, 2), -1, dtype=np.int32)
    import heapq

    dist[a] = 0.0
    pq = [(0.0, a)]
    while pq:
        d, (i, j) = heapq.heappop(pq)
        if (i, j) == b:
            break
        if d > dist[i, j]:
            continue
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                ni, nj = i + di, j + dj
                if 1 <= ni < h - 1 and 1 <= nj < w - 1:
                    nd = d + cost[ni, nj] * math.hypot(di, dj)
                    if nd < dist[ni, nj]:
                        dist[ni, nj] = nd
                        prev[ni, nj] = (i, j)
                        heapq.heappush(pq, (nd, (ni, nj)))
    node = b
    while node != a:
        _clear_disc(grid, (node[1] + 0.5) * resolution, (node[0] + 0.5) * resolution, CARVE_RADIUS, resolution)
        node = tuple(prev[node])


def generate_env(seed: int, difficulty: float, cells: int = GRID_CELLS, resolution: float = RESOLUTION) -> EnvSpec:
    """Generate a connected obstacle course; deterministic in (seed, difficulty).

    Random fill (probability scaling with difficulty) smoothed by cellular
    automata; start and goal sit on opposite sides and connectivity through
    robot-traversable free space is enforced by carving if needed.
    """
    if not 0.0 <= difficulty <= 1.0:
        raise ValueError("difficulty must lie in [0, 1]")
    rng = np.random.default_rng([int(seed), int(round(difficulty * 1_000_000))])
    fill = FILL_BASE + FILL_SPAN * difficulty
    grid = rng.random((cells, cells)) < fill
    for _ in range(CA_ITERATIONS):
        grid = _smooth(grid)
    grid[0, :] = grid[-1, :] = True
    grid[:, 0] = grid[:, -1] = True

    size = cells * resolution
    start = Pose(size / 2.0, size * 0.1, math.pi / 2.0)
    goal = (size / 2.0, size * 0.9)
    _clear_disc(grid, start.x, start.y, CLEAR_RADIUS, resolution)
    _clear_disc(grid, goal[0], goal[1], CLEAR_RADIUS, resolution)

    a = (int(start.y / resolution), int(start.x / resolution))
    b = (int(goal[1] / resolution), int(goal[0] / resolution))
    for _ in range(8):
        if _connected(traversable_mask(grid, resolution), a, b):
            break
        _carve_path(grid, resolution, a, b)
    else:
        raise RuntimeError("carving failed to connect start and goal")

    return EnvSpec(grid=grid, resolution=resolution, start_pose=start, goal=goal, seed=int(seed), difficulty=float(difficulty))


def shortest_free_path_cells(grid: np.ndarray, resolution: float, a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """8-connected shortest path over traversable cells (oracle-style helper)."""
    mask = traversable_mask(grid, resolution)
    h, w = mask.shape
    prev = {a: None}
    dq = deque([a])
    while dq:
        node = dq.popleft()
        if node == b:
            break
        i, j = node
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ni, nj = i + di, j + dj
                if 0 <= ni < h and 0 <= nj < w and mask[ni, nj] and (ni, nj) not in prev:
                    prev[(ni, nj)] = node
                    dq.append((ni, nj))
    if b not in prev:
        return []
    path = []
    node = b
    while node is not None:
        path.append(node)
        node = prev[node]
    return path[::-1]
