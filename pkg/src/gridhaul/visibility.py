"""Oracle line-of-sight model over the occupancy grid.

A cell is visible from an agent pose iff:
  * its center lies within ``view_range`` of the pose,
  * the bearing to its center lies within +-fov/2 of the heading, or the
    center is within NEAR_RADIUS of the pose (the cell under the agent),
  * no sample point, spaced SAMPLE_STEP meters along the segment from the
    pose to the cell center, lands in a blocked cell other than the
    segment's own start or end cell.

The sampled-segment rule is the visibility definition, not an
approximation knob: tests reimplement exactly this rule independently.
"""

from __future__ import annotations

import math

import numpy as np

from .world import CELL_SIZE, Cell, Pose

SAMPLE_STEP = 0.02
NEAR_RADIUS = 0.75 * CELL_SIZE


def _disk_offsets(view_range: float) -> np.ndarray:
    """Candidate cell offsets whose center can fall within range of any pose
    in the central cell."""
    reach = int(math.ceil((view_range + CELL_SIZE) / CELL_SIZE)) + 1
    span = np.arange(-reach, reach + 1)
    dx, dy = np.meshgrid(span, span, indexing="ij")
    dist = np.hypot(dx, dy) * CELL_SIZE
    keep = dist <= view_range + 1.5 * CELL_SIZE
    return np.stack([dx[keep], dy[keep]], axis=1)


class VisibilityEngine:
    """Vectorized visible-cell queries against a fixed blocked grid."""

    def __init__(self, blocked: np.ndarray):
        self.blocked = np.asarray(blocked, dtype=bool)
        self.width, self.height = self.blocked.shape
        self._offsets_cache: dict[float, np.ndarray] = {}

    def _offsets(self, view_range: float) -> np.ndarray:
        if view_range not in self._offsets_cache:
            self._offsets_cache[view_range] = _disk_offsets(view_range)
        return self._offsets_cache[view_range]

    def visible_cells(self, pose: Pose, heading: float, fov: float,
                      view_range: float) -> tuple[np.ndarray, np.ndarray]:
        """Return (cells, occupied): an (M, 2) int array of visible cells in
        a deterministic scan order and their blocked flags."""
        px, py = pose
        start = (int(math.floor(px / CELL_SIZE)), int(math.floor(py / CELL_SIZE)))
        cells = self._offsets(view_range) + np.array(start)
        inb = ((cells[:, 0] >= 0) & (cells[:, 0] < self.width)
               & (cells[:, 1] >= 0) & (cells[:, 1] < self.height))
        cells = cells[inb]

        centers = (cells + 0.5) * CELL_SIZE
        vx = centers[:, 0] - px
        vy = centers[:, 1] - py
        dist = np.hypot(vx, vy)
        near = dist <= NEAR_RADIUS
        in_range = dist <= view_range + 1e-9
        bearing = np.degrees(np.arctan2(vy, vx))
        diff = (bearing - heading + 180.0) % 360.0 - 180.0
        in_fov = np.abs(diff) <= fov / 2.0 + 1e-9
        candidate = in_range & (in_fov | near)
        cells = cells[candidate]
        if len(cells) == 0:
            return cells.astype(np.int64), np.zeros(0, dtype=bool)
        vx, vy, dist = vx[candidate], vy[candidate], dist[candidate]

        safe = np.where(dist > 1e-12, dist, 1.0)
        ux, uy = vx / safe, vy / safe
        n_samples = int(math.ceil((view_range + CELL_SIZE) / SAMPLE_STEP))
        ts = (np.arange(1, n_samples + 1) * SAMPLE_STEP)[None, :]
        on_segment = ts < dist[:, None]
        sx = np.floor((px + ux[:, None] * ts) / CELL_SIZE).astype(np.int64)
        sy = np.floor((py + uy[:, None] * ts) / CELL_SIZE).astype(np.int64)
        np.clip(sx, 0, self.width - 1, out=sx)
        np.clip(sy, 0, self.height - 1, out=sy)
        hits = self.blocked[sx, sy] & on_segment
        hits &= ~((sx == start[0]) & (sy == start[1]))
        hits &= ~((sx == cells[:, 0][:, None]) & (sy == cells[:, 1][:, None]))
        visible = ~hits.any(axis=1)

        cells = cells[visible].astype(np.int64)
        occupied = self.blocked[cells[:, 0], cells[:, 1]]
        return cells, occupied


def segment_cells(start: Pose, end: Pose) -> list[Cell]:
    """Cells touched by sample points along a segment, in travel order,
    using the same SAMPLE_STEP rule as visibility (endpoint included)."""
    sx, sy = start
    ex, ey = end
    length = math.hypot(ex - sx, ey - sy)
    cells: list[Cell] = []
    seen: set[Cell] = set()
    steps = int(math.floor(length / SAMPLE_STEP))
    points = [(sx + (ex - sx) * (i * SAMPLE_STEP) / length,
               sy + (ey - sy) * (i * SAMPLE_STEP) / length)
              for i in range(1, steps + 1)] if length > 0 else []
    points.append((ex, ey))
    for p in points:
        cell = (int(math.floor(p[0] / CELL_SIZE)), int(math.floor(p[1] / CELL_SIZE)))
        if cell not in seen:
            seen.add(cell)
            cells.append(cell)
    return cells
