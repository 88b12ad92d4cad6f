"""Hot numeric inner loops.

Every kernel exists in two flavors: the plain-Python/numpy source (``*_py``)
and, when numba is available and ``NAVTUNE_PURE_NUMPY`` is unset, an
``@njit``-compiled version bound to the bare name. Both share one source so
the fallback cannot drift. ``navtune bench-kernels`` times the two paths
against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

PURE_NUMPY = os.environ.get("NAVTUNE_PURE_NUMPY", "") not in ("", "0")

if not PURE_NUMPY:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        PURE_NUMPY = True

NUMBA_ENABLED = not PURE_NUMPY


def _jit(fn):
    if NUMBA_ENABLED:
        return njit(cache=True)(fn)
    return fn


def raycast_py(occ, resolution, x, y, heading, n_beams, max_range):
    """Cast ``n_beams`` evenly spaced rays from (x, y) over a full circle.

    DDA traversal of the occupancy grid; ranges capped at ``max_range``.
    A reading of exactly ``max_range`` means "no hit within range".
    """
    h, w = occ.shape
    ranges = np.empty(n_beams, dtype=np.float64)
    step = resolution * 0.5
    n_steps = int(max_range / step) + 1
    for b in range(n_beams):
        ang = heading + 2.0 * math.pi * b / n_beams
        dx = math.cos(ang) * step
        dy = math.sin(ang) * step
        px = x
        py = y
        r = max_range
        for s in range(1, n_steps + 1):
            px += dx
            py += dy
            ci = int(py / resolution)
            cj = int(px / resolution)
            if ci < 0 or ci >= h or cj < 0 or cj >= w or occ[ci, cj]:
                r = min(s * step, max_range)
                break
        ranges[b] = r
    return ranges


def arc_step_py(x, y, heading, v, omega, dt):
    """Exact unicycle arc integration for one interval of length dt."""
    if abs(omega) < 1e-9:
        return x + v * math.cos(heading) * dt, y + v * math.sin(heading) * dt, heading
    nh = heading + omega * dt
    r = v / omega
    return x + r * (math.sin(nh) - math.sin(heading)), y - r * (math.cos(nh) - math.cos(heading)), nh


def dwa_scores_py(
    dist_field,
    cost_field,
    resolution,
    robot_radius,
    px,
    py,
    heading,
    v_lo,
    v_hi,
    w_lo,
    w_hi,
    vx_samples,
    vtheta_samples,
    occdist_scale,
    pdist_scale,
    gdist_scale,
    path,
    gx,
    gy,
    dt,
    horizon_ticks,
):
    """Score the full dynamic-window sample grid.

    Returns (commands (n,2), costs (n,), collided (n,) uint8). Cost terms:
    worst inflated-costmap value met along the rollout, end-point distance to
    the global path, and end-point distance to the local goal, weighted by the
    three scale parameters. A rollout whose footprint disc touches an occupied
    cell (distance field below the robot radius) is marked collided.
    """
    h, w = dist_field.shape
    n = vx_samples * vtheta_samples
    commands = np.empty((n, 2), dtype=np.float64)
    costs = np.empty(n, dtype=np.float64)
    collided = np.zeros(n, dtype=np.uint8)
    n_path = path.shape[0]
    k = 0
    for i in range(vx_samples):
        if vx_samples > 1:
            v = v_lo + (v_hi - v_lo) * i / (vx_samples - 1)
        else:
            v = 0.5 * (v_lo + v_hi)
        for j in range(vtheta_samples):
            if vtheta_samples > 1:
                omega = w_lo + (w_hi - w_lo) * j / (vtheta_samples - 1)
            else:
                omega = 0.5 * (w_lo + w_hi)
            commands[k, 0] = v
            commands[k, 1] = omega
            x = px
            y = py
            th = heading
            worst = 0.0
            hit = False
            for t in range(horizon_ticks):
                # arc integration, inlined so the jitted kernel stays self-contained
                if abs(omega) < 1e-9:
                    x += v * math.cos(th) * dt
                    y += v * math.sin(th) * dt
                else:
                    nh = th + omega * dt
                    r = v / omega
                    x += r * (math.sin(nh) - math.sin(th))
                    y -= r * (math.cos(nh) - math.cos(th))
                    th = nh
                ci = int(y / resolution)
                cj = int(x / resolution)
                if ci < 0 or ci >= h or cj < 0 or cj >= w:
                    hit = True
                    break
                if dist_field[ci, cj] < robot_radius:
                    hit = True
                    break
                c = cost_field[ci, cj]
                if c > worst:
                    worst = c
            if hit:
                collided[k] = 1
                costs[k] = np.inf
            else:
                best_pd = 1e18
                for p in range(n_path):
                    d = math.hypot(path[p, 0] - x, path[p, 1] - y)
                    if d < best_pd:
                        best_pd = d
                gd = math.hypot(gx - x, gy - y)
                costs[k] = occdist_scale * worst + pdist_scale * best_pd + gdist_scale * gd
            k += 1
    return commands, costs, collided


def dijkstra_grid_py(costmap, si, sj, gi, gj, resolution, lethal):
    """8-connected Dijkstra over a costmap; step cost is step length times
    (1 + target cell cost), cells at or above ``lethal`` are impassable.

    Returns (dist to goal, flat predecessor array, goal reached flag). The
    predecessor array maps flat cell index -> flat index of the previous cell
    on the cheapest path from (si, sj), or -1.
    """
    h, w = costmap.shape
    n = h * w
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    # binary min-heap on (key, flat index); each cell enters at most 8 times
    cap = 8 * n + 8
    hk = np.empty(cap, dtype=np.float64)
    hv = np.empty(cap, dtype=np.int64)
    hn = 0
    start = si * w + sj
    goal = gi * w + gj
    dist[start] = 0.0
    hk[0] = 0.0
    hv[0] = start
    hn = 1
    reached = False
    while hn > 0:
        d = hk[0]
        node = hv[0]
        hn -= 1
        hk[0] = hk[hn]
        hv[0] = hv[hn]
        # sift down
        pos = 0
        while True:
            l = 2 * pos + 1
            if l >= hn:
                break
            sm = l
            rt = l + 1
            if rt < hn and hk[rt] < hk[l]:
                sm = rt
            if hk[sm] >= hk[pos]:
                break
            hk[pos], hk[sm] = hk[sm], hk[pos]
            hv[pos], hv[sm] = hv[sm], hv[pos]
            pos = sm
        if node == goal:
            reached = True
            break
        if d > dist[node]:
            continue
        i = node // w
        j = node % w
        for di in range(-1, 2):
            for dj in range(-1, 2):
                if di == 0 and dj == 0:
                    continue
                ni = i + di
                nj = j + dj
                if ni < 0 or ni >= h or nj < 0 or nj >= w:
                    continue
                c = costmap[ni, nj]
                if c >= lethal:
                    continue
                nd = d + math.hypot(di, dj) * resolution * (1.0 + c)
                flat = ni * w + nj
                if nd < dist[flat]:
                    dist[flat] = nd
                    prev[flat] = node
                    # sift up
                    pos = hn
                    hk[pos] = nd
                    hv[pos] = flat
                    hn += 1
                    while pos > 0:
                        par = (pos - 1) // 2
                        if hk[par] <= hk[pos]:
                            break
                        hk[pos], hk[par] = hk[par], hk[pos]
                        hv[pos], hv[par] = hv[par], hv[pos]
                        pos = par
    return dist[goal], prev, reached


raycast = _jit(raycast_py)
arc_step = _jit(arc_step_py)
dwa_scores = _jit(dwa_scores_py)
dijkstra_grid = _jit(dijkstra_grid_py)
