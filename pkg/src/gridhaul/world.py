"""Ground-truth world model: terrain grid, rooms, objects, goal zone, agent state.

Coordinates are continuous (x, y) in meters. The grid discretizes the floor
into square cells of CELL_SIZE meters, indexed as (cx, cy) with half-open
extents [cx * CELL_SIZE, (cx + 1) * CELL_SIZE). Terrain arrays are indexed
``terrain[cx, cy]``. Headings are degrees in [0, 360), 0 along +x,
counterclockwise positive.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

CELL_SIZE = 0.25

Cell = tuple[int, int]
Pose = tuple[float, float]


class GridHaulError(Exception):
    """Base class for errors raised by this package."""


class OutOfBoundsError(GridHaulError):
    """A pose or cell lies outside the scene grid."""


class GenerationError(GridHaulError):
    """Procedural generation could not satisfy its constraints."""


class Terrain(IntEnum):
    FREE = 0
    OCCUPIED_HEAVY = 1
    OCCUPIED_LIGHT = 2
    FURNITURE = 3


class ObjectKind(str, Enum):
    TARGET = "target"
    CONTAINER = "container"
    FURNITURE = "furniture"
    CLUTTER = "clutter"


class MassClass(str, Enum):
    LIGHT = "light"
    HEAVY = "heavy"


GOAL_FURNITURE_CATEGORIES = ("sofa", "bench", "table", "coffee_table", "bed")
FILLER_FURNITURE_CATEGORIES = ("cabinet", "shelf", "dresser", "desk", "chair")
TARGET_CATEGORIES = ("vase", "bowl", "jug", "toy", "pillow")
CONTAINER_CATEGORY = "basket"

# Furniture footprints in cells (width, height) before orientation.
FURNITURE_FOOTPRINTS: dict[str, tuple[int, int]] = {
    "sofa": (2, 4),
    "bench": (1, 3),
    "table": (2, 3),
    "coffee_table": (2, 2),
    "bed": (3, 4),
    "cabinet": (1, 2),
    "shelf": (1, 3),
    "dresser": (1, 2),
    "desk": (1, 2),
    "chair": (1, 1),
}


def footprint_cell(pose: Pose) -> Cell:
    """Grid cell containing a continuous pose (half-open cell intervals)."""
    return int(math.floor(pose[0] / CELL_SIZE)), int(math.floor(pose[1] / CELL_SIZE))


def cell_center(cell: Cell) -> Pose:
    return (cell[0] + 0.5) * CELL_SIZE, (cell[1] + 0.5) * CELL_SIZE


@dataclass(frozen=True)
class RoomRegion:
    id: int
    cells: frozenset[Cell]


@dataclass
class SceneGrid:
    """Static house geometry: terrain tags plus the room partition."""

    width: int
    height: int
    terrain: np.ndarray  # (width, height) uint8 of Terrain values
    rooms: list[RoomRegion]
    doorways: list[Cell]
    cell_size: float = CELL_SIZE

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def contains_pose(self, pose: Pose) -> bool:
        return (0.0 <= pose[0] < self.width * self.cell_size
                and 0.0 <= pose[1] < self.height * self.cell_size)

    def footprint_cell(self, pose: Pose) -> Cell:
        if not self.contains_pose(pose):
            raise OutOfBoundsError(f"pose {pose} outside {self.width}x{self.height} grid")
        return footprint_cell(pose)

    def room_of(self, cell: Cell) -> int | None:
        for room in self.rooms:
            if cell in room.cells:
                return room.id
        return None


@dataclass
class ObjectInstance:
    """A placed object. Light objects occupy the single cell under their pose;
    furniture carries an explicit multi-cell footprint."""

    id: int
    category: str
    kind: ObjectKind
    pose: Pose
    mass_class: MassClass
    contained_in: int | None = None
    resting: bool = True
    cells: tuple[Cell, ...] | None = None  # furniture footprint only

    def footprint_cells(self) -> tuple[Cell, ...]:
        if self.cells is not None:
            return self.cells
        return (footprint_cell(self.pose),)

    def copy(self) -> "ObjectInstance":
        return replace(self)


@dataclass(frozen=True)
class GoalZone:
    furniture_id: int
    furniture_category: str
    zone_cells: frozenset[Cell]


@dataclass
class AgentState:
    pose: Pose
    heading: float
    arm_slots: list[int | None] = field(default_factory=lambda: [None, None])
    steps_charged: int = 0
    collided_last_action: bool = False

    @property
    def cell(self) -> Cell:
        return footprint_cell(self.pose)

    def held_ids(self) -> tuple[int, ...]:
        return tuple(i for i in self.arm_slots if i is not None)

    def free_slot(self) -> int | None:
        for i, slot in enumerate(self.arm_slots):
            if slot is None:
                return i
        return None


@dataclass(frozen=True)
class TaskSpec:
    """One task: category counts to transport, the goal furniture category,
    the interaction budget, and the placement seed."""

    required: dict[str, int]
    goal_category: str
    budget: int = 1000
    seed: int = 0

    @property
    def required_total(self) -> int:
        return sum(self.required.values())


@dataclass
class Scene:
    """A generated house: geometry plus its fixed furniture/clutter objects."""

    grid: SceneGrid
    objects: list[ObjectInstance]
    goal_furniture_id: int
    scene_id: str
    seed: int

    def object_by_id(self, object_id: int) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    @property
    def goal_category(self) -> str:
        return self.object_by_id(self.goal_furniture_id).category


def static_occupancy(grid: SceneGrid, objects: list[ObjectInstance]) -> np.ndarray:
    """Boolean (width, height) array: True where the cell blocks traversal.

    A cell blocks iff its terrain is not Free or a resting Heavy object
    covers it. Light objects never block.
    """
    blocked = np.asarray(grid.terrain) != Terrain.FREE
    blocked = blocked.copy()
    for obj in objects:
        if obj.resting and obj.mass_class is MassClass.HEAVY:
            for cell in obj.footprint_cells():
                if grid.in_bounds(cell):
                    blocked[cell] = True
    return blocked


def is_traversable(scene: Scene, cell: Cell) -> bool:
    if not scene.grid.in_bounds(cell):
        raise OutOfBoundsError(f"cell {cell} outside grid")
    if Terrain(scene.grid.terrain[cell]) is not Terrain.FREE:
        return False
    for obj in scene.objects:
        if obj.resting and obj.mass_class is MassClass.HEAVY and cell in obj.footprint_cells():
            return False
    return True


def ground_truth_occupancy(scene: Scene) -> np.ndarray:
    """Per-cell 1 where not traversable; the generator/test oracle view."""
    return static_occupancy(scene.grid, scene.objects).astype(np.uint8)


def reachable_cells(blocked: np.ndarray, start: Cell) -> set[Cell]:
    """4-connected flood fill over unblocked cells."""
    width, height = blocked.shape
    if blocked[start]:
        return set()
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < width and 0 <= ny < height and (nx, ny) not in seen \
                    and not blocked[nx, ny]:
                seen.add((nx, ny))
                queue.append((nx, ny))
    return seen


def compute_goal_zone(scene: Scene, r_goal: float = 1.0) -> GoalZone:
    """Cells whose center lies within r_goal of any goal-furniture footprint
    cell center."""
    furniture = scene.object_by_id(scene.goal_furniture_id)
    radius_cells = int(math.ceil(r_goal / CELL_SIZE))
    zone: set[Cell] = set()
    for fx, fy in furniture.footprint_cells():
        for dx in range(-radius_cells, radius_cells + 1):
            for dy in range(-radius_cells, radius_cells + 1):
                cell = (fx + dx, fy + dy)
                if not scene.grid.in_bounds(cell):
                    continue
                if math.hypot(dx, dy) * CELL_SIZE <= r_goal + 1e-9:
                    zone.add(cell)
    return GoalZone(furniture.id, furniture.category, frozenset(zone))


def validate_scene(scene: Scene, r_goal: float = 1.0) -> list[str]:
    """Check the structural invariants of a generated scene.

    Returns a list of problem descriptions; empty means valid.
    """
    problems: list[str] = []
    grid = scene.grid
    if np.asarray(grid.terrain).shape != (grid.width, grid.height):
        problems.append("terrain shape does not match width/height")
        return problems

    seen_cells: set[Cell] = set()
    for room in grid.rooms:
        overlap = seen_cells & set(room.cells)
        if overlap:
            problems.append(f"room {room.id} overlaps another room at {sorted(overlap)[:3]}")
        seen_cells |= set(room.cells)
    if not 6 <= len(grid.rooms) <= 8:
        problems.append(f"room count {len(grid.rooms)} outside [6, 8]")

    for cell in grid.doorways:
        if not grid.in_bounds(cell):
            problems.append(f"doorway {cell} out of bounds")
        elif Terrain(grid.terrain[cell]) is not Terrain.FREE:
            problems.append(f"doorway {cell} is not free terrain")

    # Every room must be reachable from every other through free cells.
    blocked = static_occupancy(grid, scene.objects)
    free_room_cells = [c for room in grid.rooms for c in sorted(room.cells) if not blocked[c]]
    if not free_room_cells:
        problems.append("no free room cells")
    else:
        reached = reachable_cells(blocked, free_room_cells[0])
        for room in grid.rooms:
            if not any(c in reached for c in room.cells):
                problems.append(f"room {room.id} unreachable")

    for room in grid.rooms:
        free = sum(1 for c in room.cells if not blocked[c])
        if free < 0.5 * len(room.cells):
            problems.append(f"room {room.id} less than half free")

    goal_objs = [o for o in scene.objects
                 if o.kind is ObjectKind.FURNITURE and o.category == scene.goal_category]
    if len(goal_objs) != 1:
        problems.append(f"goal category {scene.goal_category!r} has {len(goal_objs)} instances")
    zone = compute_goal_zone(scene, r_goal)
    if not zone.zone_cells:
        problems.append("goal zone empty")
    elif not any(not blocked[c] for c in zone.zone_cells):
        problems.append("goal zone has no free cell")

    for obj in scene.objects:
        if obj.kind is ObjectKind.FURNITURE and obj.mass_class is not MassClass.HEAVY:
            problems.append(f"furniture {obj.id} not heavy")
        if obj.kind in (ObjectKind.TARGET, ObjectKind.CONTAINER) and obj.mass_class is not MassClass.LIGHT:
            problems.append(f"{obj.kind.value} {obj.id} not light")
        if obj.contained_in is not None and obj.kind is not ObjectKind.TARGET:
            problems.append(f"non-target {obj.id} has contained_in set")
    return problems
