"""Agent-side occupancy and semantic maps built from observations.

Both maps are square, agent-centric arrays: the agent's start cell sits at
the map center and scene cells are shifted by a fixed offset. Updates are
binary because perception is an oracle here; the two-channel probability
shape is kept so noisy sensor models can slot in later.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim import Observation
from .world import CELL_SIZE, Cell, GridHaulError, ObjectKind

TARGET_CHANNEL = 0
CONTAINER_CHANNEL = 1
GOAL_CHANNEL = 2


class OccupancyMap:
    """2 x N x N float map; channel 0 is occupied probability, channel 1 is
    explored probability. Starts all zeros."""

    def __init__(self, n: int, start_cell: Cell, scene_shape: tuple[int, int]):
        if scene_shape[0] > n or scene_shape[1] > n:
            raise GridHaulError(f"scene {scene_shape} exceeds the {n}x{n} agent map")
        self.n = n
        self.data = np.zeros((2, n, n), dtype=np.float64)
        self.offset = (n // 2 - start_cell[0], n // 2 - start_cell[1])
        self.scene_shape = scene_shape

    def to_map(self, cell: Cell) -> Cell:
        return cell[0] + self.offset[0], cell[1] + self.offset[1]

    def to_scene(self, cell: Cell) -> Cell:
        return cell[0] - self.offset[0], cell[1] - self.offset[1]

    def update(self, cells: np.ndarray, occupied: np.ndarray) -> None:
        """Mark visible cells explored and set their occupied value.

        Cells falling outside the map are ignored.
        """
        if len(cells) == 0:
            return
        mx = cells[:, 0] + self.offset[0]
        my = cells[:, 1] + self.offset[1]
        ok = (mx >= 0) & (mx < self.n) & (my >= 0) & (my < self.n)
        mx, my = mx[ok], my[ok]
        self.data[1, mx, my] = 1.0
        self.data[0, mx, my] = occupied[ok].astype(np.float64)

    def explored_count(self) -> int:
        return int((self.data[1] >= 0.5).sum())

    def blocked_map(self, threshold: float = 0.5) -> np.ndarray:
        """Blocked mask in map frame; unexplored cells read as free."""
        return self.data[0] >= threshold

    def blocked_scene(self, threshold: float = 0.5) -> np.ndarray:
        """Blocked mask cropped back to scene coordinates; scene cells the
        map does not cover read as free (unexplored)."""
        width, height = self.scene_shape
        out = np.zeros((width, height), dtype=bool)
        x0, y0 = self.offset
        sx0, sx1 = max(0, -x0), min(width, self.n - x0)
        sy0, sy1 = max(0, -y0), min(height, self.n - y0)
        if sx0 < sx1 and sy0 < sy1:
            out[sx0:sx1, sy0:sy1] = self.blocked_map(threshold)[
                sx0 + x0:sx1 + x0, sy0 + y0:sy1 + y0]
        return out


class SemanticMap:
    """3 x N x N binary map flagging targets, containers, and the goal."""

    def __init__(self, n: int, offset: Cell):
        self.n = n
        self.data = np.zeros((3, n, n), dtype=np.uint8)
        self.offset = offset

    def set_flag(self, channel: int, map_cell: Cell, value: bool) -> None:
        x, y = map_cell
        if 0 <= x < self.n and 0 <= y < self.n:
            self.data[channel, x, y] = 1 if value else 0


def frontier_cells(occupancy: OccupancyMap, threshold: float = 0.5) -> list[Cell]:
    """Explored free cells 4-adjacent to at least one unexplored cell,
    in map coordinates, deterministically ordered."""
    explored = occupancy.data[1] >= 0.5
    free = explored & (occupancy.data[0] < threshold)
    unexplored = ~explored
    neighbor_unexplored = np.zeros_like(unexplored)
    neighbor_unexplored[1:, :] |= unexplored[:-1, :]
    neighbor_unexplored[:-1, :] |= unexplored[1:, :]
    neighbor_unexplored[:, 1:] |= unexplored[:, :-1]
    neighbor_unexplored[:, :-1] |= unexplored[:, 1:]
    xs, ys = np.nonzero(free & neighbor_unexplored)
    return [(int(x), int(y)) for x, y in zip(xs, ys)]


@dataclass
class _Entry:
    channel: int
    cells: frozenset[Cell]  # scene frame


class AgentMapper:
    """Glues observations into the two maps and tracks known object sites.

    The goal channel flags cells of furniture matching the task's goal
    category; target/container channels track individual resting objects by
    id so pickups and deliveries clear stale flags.
    """

    def __init__(self, n: int, start_cell: Cell, scene_shape: tuple[int, int],
                 goal_category: str):
        self.occupancy = OccupancyMap(n, start_cell, scene_shape)
        self.semantic = SemanticMap(n, self.occupancy.offset)
        self.goal_category = goal_category
        self.entries: dict[int, _Entry] = {}
        self.done_ids: set[int] = set()
        self._cell_refs: dict[tuple[int, Cell], set[int]] = {}

    # -- flag bookkeeping ---------------------------------------------------

    def _add_entry(self, object_id: int, channel: int, cells: frozenset[Cell]) -> None:
        self.entries[object_id] = _Entry(channel, cells)
        for cell in cells:
            key = (channel, cell)
            refs = self._cell_refs.setdefault(key, set())
            refs.add(object_id)
            self.semantic.set_flag(channel, self.occupancy.to_map(cell), True)

    def _remove_entry(self, object_id: int) -> None:
        entry = self.entries.pop(object_id, None)
        if entry is None:
            return
        for cell in entry.cells:
            key = (entry.channel, cell)
            refs = self._cell_refs.get(key, set())
            refs.discard(object_id)
            if not refs:
                self._cell_refs.pop(key, None)
                self.semantic.set_flag(entry.channel, self.occupancy.to_map(cell), False)

    # -- integration ----------------------------------------------------------

    def integrate(self, obs: Observation) -> None:
        self.occupancy.update(obs.cells, obs.occupied)

        visible: set[Cell] = {(int(x), int(y)) for x, y in obs.cells}
        detected_at: dict[int, frozenset[Cell]] = {}
        for det in obs.detections:
            if det.object_id in self.done_ids:
                continue
            if det.kind is ObjectKind.TARGET:
                channel = TARGET_CHANNEL
            elif det.kind is ObjectKind.CONTAINER:
                channel = CONTAINER_CHANNEL
            elif det.kind is ObjectKind.FURNITURE and det.category == self.goal_category:
                channel = GOAL_CHANNEL
            else:
                continue
            detected_at[det.object_id] = frozenset(det.cells)
            old = self.entries.get(det.object_id)
            if channel == GOAL_CHANNEL:
                cells = detected_at[det.object_id]
                if old is not None:
                    cells = cells | old.cells  # footprint knowledge accumulates
                if old is None or cells != old.cells:
                    self._remove_entry(det.object_id)
                    self._add_entry(det.object_id, channel, cells)
            else:
                cells = detected_at[det.object_id]
                if old is None or old.cells != cells:
                    self._remove_entry(det.object_id)
                    self._add_entry(det.object_id, channel, cells)

        # Clear what the agent can rule out: objects it is holding, objects it
        # delivered, and movable flags at visible cells with nothing there.
        for oid in obs.held:
            self._remove_entry(oid)
        for oid in list(self.entries):
            entry = self.entries[oid]
            if entry.channel == GOAL_CHANNEL:
                continue
            if oid in detected_at:
                continue
            if any(c in visible for c in entry.cells):
                self._remove_entry(oid)

    def mark_done(self, object_ids) -> None:
        for oid in object_ids:
            self.done_ids.add(oid)
            self._remove_entry(oid)

    # -- queries ----------------------------------------------------------------

    def known_objects(self, channel: int) -> list[tuple[int, Cell]]:
        """(id, scene cell) pairs currently flagged on a channel, id order."""
        out = []
        for oid in sorted(self.entries):
            entry = self.entries[oid]
            if entry.channel == channel:
                out.append((oid, min(entry.cells)))
        return out

    def goal_cells(self) -> set[Cell]:
        cells: set[Cell] = set()
        for entry in self.entries.values():
            if entry.channel == GOAL_CHANNEL:
                cells |= set(entry.cells)
        return cells

    def frontier_scene_cells(self, threshold: float = 0.5) -> list[Cell]:
        return [self.occupancy.to_scene(c)
                for c in frontier_cells(self.occupancy, threshold)]

    def explored_free_scene_cells(self, threshold: float = 0.5) -> list[Cell]:
        explored = self.occupancy.data[1] >= 0.5
        free = explored & (self.occupancy.data[0] < threshold)
        xs, ys = np.nonzero(free)
        return [self.occupancy.to_scene((int(x), int(y))) for x, y in zip(xs, ys)]

    def estimated_zone_cells(self, r_goal: float) -> set[Cell]:
        """Free cells within r_goal of any known goal-furniture cell.

        Known goal cells are a subset of the true footprint, so this set is
        always a subset of the true goal zone.
        """
        known = self.goal_cells()
        blocked = self.occupancy.blocked_scene()
        width, height = self.occupancy.scene_shape
        radius = int(math.ceil(r_goal / CELL_SIZE))
        zone: set[Cell] = set()
        for gx, gy in known:
            for dx in range(-radius, radius + 1):
                for dy in range(-radius, radius + 1):
                    if math.hypot(dx, dy) * CELL_SIZE > r_goal + 1e-9:
                        continue
                    cell = (gx + dx, gy + dy)
                    if 0 <= cell[0] < width and 0 <= cell[1] < height \
                            and not blocked[cell]:
                        zone.add(cell)
        return zone

    def dump(self, out_dir: str | Path, prefix: str = "map") -> list[Path]:
        """Write each channel as a portable graymap plus a metadata sidecar."""
        from .render import write_pgm
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        channels = {
            f"{prefix}_occupied.pgm": self.occupancy.data[0],
            f"{prefix}_explored.pgm": self.occupancy.data[1],
            f"{prefix}_targets.pgm": self.semantic.data[0],
            f"{prefix}_containers.pgm": self.semantic.data[1],
            f"{prefix}_goal.pgm": self.semantic.data[2],
        }
        for name, channel in channels.items():
            path = out_dir / name
            write_pgm((np.asarray(channel, dtype=np.float64) * 255).astype(np.uint8), path)
            paths.append(path)
        meta = {
            "format": "tcmap/1",
            "n": self.occupancy.n,
            "offset": list(self.occupancy.offset),
            "scene_shape": list(self.occupancy.scene_shape),
            "goal_category": self.goal_category,
            "channels": sorted(channels),
        }
        meta_path = out_dir / f"{prefix}_meta.json"
        meta_path.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
        paths.append(meta_path)
        return paths
