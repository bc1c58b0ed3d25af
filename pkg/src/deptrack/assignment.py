"""Cost matrices and optimal rectangular assignment.

The solver is the shortest-augmenting-path form of the Hungarian method with
row/column potentials, O(n^2 m) for n <= m. Rows are inserted in index order
and every argmin scan keeps the first (lowest) column on ties, so equal-cost
optima resolve toward the lowest row index, then the lowest column index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import BBox, boxes_to_array, iou_matrix


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)

    def total(self, cost) -> float:
        cost = np.asarray(cost, dtype=float)
        return float(sum(cost[r, c] for r, c in self.pairs))


def _solve_wide(cost: list[list[float]], n: int, m: int) -> list[int]:
    # returns col -> row (1-based rows, 0 = free), cols 1-based; requires n <= m
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    cols = range(1, m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = cost[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in cols:
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return p


def hungarian(cost) -> Assignment:
    """Minimum-cost matching of size min(M, N) on an M x N matrix."""
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {c.shape}")
    n_rows, n_cols = c.shape
    if not np.isfinite(c).all():
        raise ValueError("cost matrix contains non-finite entries")
    if n_rows == 0 or n_cols == 0:
        return Assignment([], list(range(n_rows)), list(range(n_cols)))

    if n_rows <= n_cols:
        p = _solve_wide(c.tolist(), n_rows, n_cols)
        pairs = sorted((p[j] - 1, j - 1) for j in range(1, n_cols + 1) if p[j])
    else:
        p = _solve_wide(c.T.tolist(), n_cols, n_rows)
        pairs = sorted((j - 1, p[j] - 1) for j in range(1, n_rows + 1) if p[j])
    rows = {r for r, _ in pairs}
    cols = {k for _, k in pairs}
    return Assignment(
        pairs,
        [r for r in range(n_rows) if r not in rows],
        [k for k in range(n_cols) if k not in cols],
    )


def iou_cost(tracks: Sequence[BBox] | np.ndarray, dets: Sequence[BBox] | np.ndarray) -> np.ndarray:
    """1 - IoU for every (track, detection) pair. Accepts BBox lists or tlwh arrays."""
    a = tracks if isinstance(tracks, np.ndarray) else boxes_to_array(tracks)
    b = dets if isinstance(dets, np.ndarray) else boxes_to_array(dets)
    return 1.0 - iou_matrix(a, b)


def depth_distance(track_depths, det_depths, eta: float = 1.0) -> np.ndarray:
    """eta * |P_t - P_d|, clamped to [0, 1].

    NaN entries (depth unknown) contribute zero distance.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    t = np.asarray(track_depths, dtype=float).reshape(-1, 1)
    d = np.asarray(det_depths, dtype=float).reshape(1, -1)
    out = eta * np.abs(t - d)
    out = np.where(np.isnan(out), 0.0, out)
    return np.clip(out, 0.0, 1.0)


def fuse_cost(c, d, lam: float, gamma: float) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if c.shape != d.shape:
        raise ValueError(f"shape mismatch: {c.shape} vs {d.shape}")
    if lam < 0 or gamma < 0:
        raise ValueError("fusion weights must be non-negative")
    return lam * c + gamma * d


def gate(a: Assignment, cost, threshold: float) -> Assignment:
    """Reject pairs whose cost exceeds ``threshold`` (a pair at the threshold is kept)."""
    cost = np.asarray(cost, dtype=float)
    kept, rows, cols = [], list(a.unmatched_rows), list(a.unmatched_cols)
    for r, c in a.pairs:
        if cost[r, c] <= threshold:
            kept.append((r, c))
        else:
            rows.append(r)
            cols.append(c)
    return Assignment(kept, sorted(rows), sorted(cols))
