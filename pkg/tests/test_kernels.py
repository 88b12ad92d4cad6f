"""The jitted kernels and their pure-Python sources must agree exactly."""

import numpy as np

from navtune import kernels


def test_flags_consistent():
    assert kernels.NUMBA_ENABLED == (not kernels.PURE_NUMPY)


def _random_grid(rng, h=40, w=40, p=0.12):
    g = rng.random((h, w)) < p
    g[20, 20] = False
    return g.astype(np.uint8)


def test_raycast_jit_matches_python_source(rng):
    occ = _random_grid(rng)
    args = (occ, 0.05, 1.0, 1.0, 0.3, 180, 2.0)
    assert np.array_equal(kernels.raycast(*args), kernels.raycast_py(*args))


def test_arc_step_jit_matches_python_source(rng):
    for _ in range(50):
        args = tuple(rng.uniform(-2, 2, size=5)) + (0.1,)
        assert kernels.arc_step(*args) == kernels.arc_step_py(*args)


def test_dwa_scores_jit_matches_python_source(rng):
    from navtune.envgen import distance_field
    from navtune.planner import inflate

    grid = _random_grid(rng).astype(bool)
    dist = distance_field(grid, 0.05)
    cm = inflate(grid, 0.3, 0.05, dist)
    path = np.column_stack([np.linspace(0.2, 1.8, 30), np.full(30, 1.0)])
    args = (
        dist, cm, 0.05, 0.21,
        1.0, 1.0, 0.3,
        0.0, 0.5, -0.3, 0.3,
        6, 20, 0.1, 0.75, 1.0,
        path, 1.8, 1.0, 0.1, 15,
    )
    got = kernels.dwa_scores(*args)
    want = kernels.dwa_scores_py(*args)
    for g, w in zip(got, want):
        assert np.array_equal(g, w)


def test_dijkstra_jit_matches_python_source(rng):
    from navtune.planner import inflate

    grid = _random_grid(rng).astype(bool)
    cm = np.ascontiguousarray(inflate(grid, 0.2, 0.05), dtype=np.float64)
    got = kernels.dijkstra_grid(cm, 20, 20, 2, 2, 0.05, 10.0)
    want = kernels.dijkstra_grid_py(cm, 20, 20, 2, 2, 0.05, 10.0)
    assert got[0] == want[0]
    assert got[2] == want[2]
    assert np.array_equal(got[1], want[1])
