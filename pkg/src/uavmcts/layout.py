"""Hover-point layouts and the initial placement of ground users."""

from __future__ import annotations

import math

import numpy as np

from .config import WorldConfig


def grid_shape(k: int) -> tuple[int, int]:
    """Most-square (rows, cols) factorisation of ``k`` with rows <= cols."""
    rows = int(math.isqrt(k))
    while k % rows:
        rows -= 1
    return rows, k // rows


def _grid(k: int, size: float) -> np.ndarray:
    rows, cols = grid_shape(k)
    xs = (np.arange(cols) + 0.5) * size / cols
    ys = (np.arange(rows) + 0.5) * size / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def hover_layout(config: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    """(K, 3) hover positions for the configured layout."""
    k, r = config.num_hover_points, config.region_size
    if config.hover_layout == "grid2d":
        xy = _grid(k, r)
        return np.column_stack([xy, np.full(k, config.altitude)])
    if config.hover_layout == "uniform2d":
        xy = rng.uniform(0.0, r, size=(k, 2))
        return np.column_stack([xy, np.full(k, config.altitude)])
    planes = config.plane_heights
    per_plane = k // len(planes)
    xy = _grid(per_plane, r)
    return np.vstack([np.column_stack([xy, np.full(per_plane, h)]) for h in planes])


def initial_users(config: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    """Two evenly spaced rows at y = R/3 and 2R/3.

    Each row is shifted by a random offset smaller than half its spacing, so
    the spacing stays equal while positions differ between seeds.
    """
    n, r = config.num_users, config.region_size
    rows = [(n + 1) // 2, n // 2]
    out = []
    for row, count in enumerate(rows):
        if count == 0:
            continue
        spacing = r / count
        shift = rng.uniform(-0.5, 0.5) * spacing
        xs = (np.arange(count) + 0.5) * spacing + shift
        ys = np.full(count, r * (row + 1) / 3.0)
        out.append(np.column_stack([xs, ys, np.zeros(count)]))
    return np.vstack(out)
