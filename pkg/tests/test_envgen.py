import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from navtune.envgen import (
    distance_field,
    generate_env,
    shortest_free_path_cells,
    traversable_mask,
)
from navtune.types import ROBOT_RADIUS


def test_distance_field_matches_brute_force(rng):
    grid = rng.random((20, 20)) < 0.15
    grid[0, 0] = True  # ensure at least one obstacle
    df = distance_field(grid, 0.05)
    occ = np.argwhere(grid)
    for i in range(0, 20, 3):
        for j in range(0, 20, 3):
            want = np.min(np.hypot(occ[:, 0] - i, occ[:, 1] - j)) * 0.05
            assert abs(df[i, j] - want) < 1e-9


def test_distance_field_no_obstacles():
    df = distance_field(np.zeros((10, 10), dtype=bool), 0.05)
    assert np.all(df >= 0.05 * 10)  # effectively infinite clearance


@settings(max_examples=15, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    difficulty=st.floats(0.0, 1.0),
)
def test_generated_envs_are_traversable(seed, difficulty):
    """Property: every generated world keeps a start-to-goal corridor wide
    enough for the robot."""
    env = generate_env(seed, difficulty)
    mask = traversable_mask(env.grid, env.resolution)
    si, sj = env.cell_of(env.start_pose.x, env.start_pose.y)
    gi, gj = env.cell_of(*env.goal)
    assert mask[si, sj] and mask[gi, gj]
    path = shortest_free_path_cells(env.grid, env.resolution, (si, sj), (gi, gj))
    assert path, "start and goal must stay connected through traversable space"
    df = distance_field(env.grid, env.resolution)
    for ci, cj in path:
        assert df[ci, cj] >= ROBOT_RADIUS


def test_generation_deterministic():
    a = generate_env(123, 0.7)
    b = generate_env(123, 0.7)
    assert np.array_equal(a.grid, b.grid)
    assert a.start_pose == b.start_pose and a.goal == b.goal


def test_difficulty_monotone_in_expectation():
    """Higher difficulty fills more of the world, averaged over seeds."""
    easy = np.mean([generate_env(s, 0.0).grid.mean() for s in range(8)])
    hard = np.mean([generate_env(s, 1.0).grid.mean() for s in range(8)])
    assert hard > easy


def test_generate_env_rejects_bad_difficulty():
    with pytest.raises(ValueError):
        generate_env(0, 1.5)
