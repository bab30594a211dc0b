"""Procedural houses, object placement, and seeded task suites.

Floor plans come from binary-space partition of a walled rectangle into
6-8 rooms, with 2-3 cell wide doorways carved on a spanning tree of the
room-adjacency graph (plus a few extra doors for loops). Placement keeps
one global invariant throughout: all free cells stay 4-connected, which
makes every later placement reachable from any spawn by construction.

Everything here is a pure function of its seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .scene_io import Suite, SuiteTask, scene_content_id, scene_to_dict
from .world import (
    CELL_SIZE,
    CONTAINER_CATEGORY,
    FILLER_FURNITURE_CATEGORIES,
    FURNITURE_FOOTPRINTS,
    GOAL_FURNITURE_CATEGORIES,
    TARGET_CATEGORIES,
    Cell,
    GenerationError,
    MassClass,
    ObjectInstance,
    ObjectKind,
    Pose,
    RoomRegion,
    Scene,
    SceneGrid,
    TaskSpec,
    Terrain,
    cell_center,
    compute_goal_zone,
    footprint_cell,
    reachable_cells,
    static_occupancy,
    validate_scene,
)


def stable_hash(*parts) -> int:
    """Platform-stable 63-bit seed derived from the given parts."""
    payload = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little") % (2 ** 63)


@dataclass(frozen=True)
class HouseParams:
    width: int = 40
    height: int = 40
    min_rooms: int = 6
    max_rooms: int = 8
    min_room_side: int = 5   # interior cells
    door_width: int = 3
    extra_door_prob: float = 0.35
    max_attempts: int = 100


@dataclass(frozen=True)
class TaskParams:
    min_targets: int = 6
    max_targets: int = 8
    container_prob: float = 0.25
    budget: int = 1000
    r_goal: float = 1.0
    max_attempts: int = 100


@dataclass
class TaskInstance:
    """A fully placed task, ready to drive a World."""

    scene: Scene
    spec: TaskSpec
    objects: list[ObjectInstance] = field(default_factory=list)
    spawn_pose: Pose = (0.0, 0.0)
    spawn_heading: float = 0.0


@dataclass
class _Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    def cells(self) -> list[Cell]:
        return [(self.x + i, self.y + j) for i in range(self.w) for j in range(self.h)]


def _split_rects(rng: np.random.Generator, bounds: _Rect, n_rooms: int,
                 min_side: int) -> list[_Rect] | None:
    rects = [bounds]
    while len(rects) < n_rooms:
        candidates = [r for r in rects
                      if r.w >= 2 * min_side + 1 or r.h >= 2 * min_side + 1]
        if not candidates:
            return None
        rect = max(candidates, key=lambda r: (r.area, r.x, r.y))
        rects.remove(rect)
        split_wide = rect.w >= rect.h if rect.w >= 2 * min_side + 1 else False
        if rect.h < 2 * min_side + 1:
            split_wide = True
        if split_wide:
            cut = int(rng.integers(rect.x + min_side, rect.x + rect.w - min_side))
            rects.append(_Rect(rect.x, rect.y, cut - rect.x, rect.h))
            rects.append(_Rect(cut + 1, rect.y, rect.x + rect.w - cut - 1, rect.h))
        else:
            cut = int(rng.integers(rect.y + min_side, rect.y + rect.h - min_side))
            rects.append(_Rect(rect.x, rect.y, rect.w, cut - rect.y))
            rects.append(_Rect(rect.x, cut + 1, rect.w, rect.y + rect.h - cut - 1))
    rects.sort(key=lambda r: (r.y, r.x))
    return rects


def _door_candidates(terrain: np.ndarray, room_map: np.ndarray
                     ) -> dict[tuple[int, int], list[Cell]]:
    """Wall cells whose two opposite neighbours lie in different rooms."""
    width, height = terrain.shape
    pairs: dict[tuple[int, int], list[Cell]] = {}
    for x in range(1, width - 1):
        for y in range(1, height - 1):
            if terrain[x, y] != int(Terrain.OCCUPIED_HEAVY):
                continue
            for (ax, ay), (bx, by) in (((x - 1, y), (x + 1, y)), ((x, y - 1), (x, y + 1))):
                ra, rb = room_map[ax, ay], room_map[bx, by]
                if ra >= 0 and rb >= 0 and ra != rb:
                    key = (min(ra, rb), max(ra, rb))
                    pairs.setdefault(key, []).append((x, y))
    return pairs


def _carve_door(terrain: np.ndarray, room_map: np.ndarray, center: Cell,
                width_cells: int, doorways: list[Cell]) -> None:
    x, y = center
    horizontal_wall = room_map[x, y - 1] >= 0 or room_map[x, y + 1] >= 0
    span = range(-(width_cells // 2), width_cells - width_cells // 2)
    for d in span:
        cell = (x + d, y) if horizontal_wall else (x, y + d)
        cx, cy = cell
        if terrain[cx, cy] != int(Terrain.OCCUPIED_HEAVY):
            continue
        # Only widen along the shared wall: both opposite sides must be rooms.
        if horizontal_wall:
            ok = room_map[cx, cy - 1] >= 0 and room_map[cx, cy + 1] >= 0
        else:
            ok = room_map[cx - 1, cy] >= 0 and room_map[cx + 1, cy] >= 0
        if ok or cell == center:
            terrain[cx, cy] = int(Terrain.FREE)
            doorways.append(cell)


def _spanning_tree_doors(rng: np.random.Generator, terrain: np.ndarray,
                         room_map: np.ndarray, n_rooms: int,
                         params: HouseParams) -> list[Cell] | None:
    candidates = _door_candidates(terrain, room_map)
    edges = sorted(candidates)
    if not edges:
        return None
    order = list(rng.permutation(len(edges)))
    parent = list(range(n_rooms))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    doorways: list[Cell] = []
    joined = 0
    for idx in order:
        a, b = edges[idx]
        ra, rb = find(a), find(b)
        take_extra = rng.random() < params.extra_door_prob
        if ra == rb and not take_extra:
            continue
        cells = candidates[edges[idx]]
        door = cells[int(rng.integers(len(cells)))]
        _carve_door(terrain, room_map, door, params.door_width, doorways)
        if ra != rb:
            parent[ra] = rb
            joined += 1
    if joined != n_rooms - 1:
        return None
    return doorways


def _try_place_block(rng: np.random.Generator, terrain: np.ndarray,
                     room_map: np.ndarray, room: RoomRegion, size: tuple[int, int],
                     doorways: list[Cell], blocked_extra: set[Cell],
                     tries: int = 40) -> tuple[Cell, ...] | None:
    """Find a wall-adjacent rectangle of free room cells whose removal keeps
    all free cells 4-connected and the room at least half free."""
    width, height = terrain.shape
    room_cells = sorted(room.cells)
    door_buffer = set()
    for dx_, dy_ in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
        for d in doorways:
            door_buffer.add((d[0] + dx_, d[1] + dy_))
    for _ in range(tries):
        w, h = size if rng.random() < 0.5 else (size[1], size[0])
        anchor = room_cells[int(rng.integers(len(room_cells)))]
        cells = tuple((anchor[0] + i, anchor[1] + j) for i in range(w) for j in range(h))
        if any(not (0 <= cx < width and 0 <= cy < height) for cx, cy in cells):
            continue
        if any(c not in room.cells for c in cells):
            continue
        if any(terrain[c] != int(Terrain.FREE) or c in blocked_extra for c in cells):
            continue
        if any(c in door_buffer for c in cells):
            continue
        # wall adjacency: some cell of the block borders non-room terrain
        touches_wall = any(
            not (0 <= cx + dx < width and 0 <= cy + dy < height)
            or room_map[cx + dx, cy + dy] < 0
            for cx, cy in cells for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)))
        if not touches_wall:
            continue
        free_after = sum(
            1 for c in room.cells
            if terrain[c] == int(Terrain.FREE) and c not in blocked_extra and c not in cells)
        if free_after < 0.5 * len(room.cells):
            continue
        if not _stays_connected(terrain, set(cells) | blocked_extra):
            continue
        return cells
    return None


def _stays_connected(terrain: np.ndarray, extra_blocked: set[Cell]) -> bool:
    free = (terrain == int(Terrain.FREE))
    for c in extra_blocked:
        free[c] = False
    xs, ys = np.nonzero(free)
    if len(xs) == 0:
        return False
    blocked = ~free
    start = (int(xs[0]), int(ys[0]))
    return len(reachable_cells(blocked, start)) == int(free.sum())


def generate_house(seed: int, params: HouseParams | None = None) -> Scene:
    """Deterministically generate one valid house scene from a seed."""
    params = params or HouseParams()
    rng = np.random.default_rng(seed)
    last_error = "unknown"
    for _ in range(params.max_attempts):
        scene = _generate_once(rng, seed, params)
        if scene is None:
            last_error = "layout rejected"
            continue
        problems = validate_scene(scene)
        if problems:
            last_error = "; ".join(problems)
            continue
        return scene
    raise GenerationError(f"no valid house after {params.max_attempts} attempts: {last_error}")


def _generate_once(rng: np.random.Generator, seed: int,
                   params: HouseParams) -> Scene | None:
    width, height = params.width, params.height
    terrain = np.full((width, height), int(Terrain.FREE), dtype=np.uint8)
    terrain[0, :] = terrain[-1, :] = int(Terrain.OCCUPIED_HEAVY)
    terrain[:, 0] = terrain[:, -1] = int(Terrain.OCCUPIED_HEAVY)

    n_rooms = int(rng.integers(params.min_rooms, params.max_rooms + 1))
    rects = _split_rects(rng, _Rect(1, 1, width - 2, height - 2), n_rooms,
                         params.min_room_side)
    if rects is None:
        return None
    room_map = np.full((width, height), -1, dtype=np.int16)
    rooms = []
    for i, rect in enumerate(rects):
        for c in rect.cells():
            room_map[c] = i
        rooms.append(RoomRegion(i, frozenset(rect.cells())))
    # interior walls are everything not inside a room
    wall_mask = (room_map < 0)
    terrain[wall_mask] = int(Terrain.OCCUPIED_HEAVY)

    doorways = _spanning_tree_doors(rng, terrain, room_map, n_rooms, params)
    if doorways is None:
        return None

    objects: list[ObjectInstance] = []
    next_id = 1

    def add_block(category: str, kind: ObjectKind, cells: tuple[Cell, ...]) -> None:
        nonlocal next_id
        for c in cells:
            terrain[c] = int(Terrain.FURNITURE)
        anchor = cell_center(cells[0])
        xs = [cell_center(c)[0] for c in cells]
        ys = [cell_center(c)[1] for c in cells]
        pose = (sum(xs) / len(xs), sum(ys) / len(ys))
        objects.append(ObjectInstance(next_id, category, kind, pose,
                                      MassClass.HEAVY, cells=cells))
        next_id += 1

    # goal furniture: exactly one instance of one goal-set category per house
    goal_category = str(rng.choice(GOAL_FURNITURE_CATEGORIES))
    goal_room = rooms[int(rng.integers(len(rooms)))]
    goal_cells = _try_place_block(rng, terrain, room_map, goal_room,
                                  FURNITURE_FOOTPRINTS[goal_category], doorways, set())
    if goal_cells is None:
        return None
    add_block(goal_category, ObjectKind.FURNITURE, goal_cells)
    goal_furniture_id = objects[-1].id

    other_goal_cats = [c for c in GOAL_FURNITURE_CATEGORIES if c != goal_category]
    for room in rooms:
        n_pieces = int(rng.integers(1, 3))
        for _ in range(n_pieces):
            pool = list(FILLER_FURNITURE_CATEGORIES)
            if other_goal_cats and rng.random() < 0.3:
                pool = [other_goal_cats.pop(int(rng.integers(len(other_goal_cats))))]
            category = str(pool[int(rng.integers(len(pool)))])
            cells = _try_place_block(rng, terrain, room_map, room,
                                     FURNITURE_FOOTPRINTS[category], doorways, set(),
                                     tries=15)
            if cells is not None:
                add_block(category, ObjectKind.FURNITURE, cells)

    # sparse non-furniture obstacles: light terrain plus heavy clutter objects
    free_pool = sorted((int(x), int(y)) for x, y in zip(*np.nonzero(terrain == int(Terrain.FREE)))
                       if room_map[x, y] >= 0)
    doorway_buffer = {(d[0] + dx, d[1] + dy) for d in doorways
                      for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
    for _ in range(int(rng.integers(0, 4))):
        cell = free_pool[int(rng.integers(len(free_pool)))]
        if cell in doorway_buffer or not _stays_connected(terrain, {cell}):
            continue
        terrain[cell] = int(Terrain.OCCUPIED_LIGHT)
    for _ in range(int(rng.integers(0, 3))):
        cell = free_pool[int(rng.integers(len(free_pool)))]
        if (terrain[cell] != int(Terrain.FREE) or cell in doorway_buffer
                or not _stays_connected(terrain, {cell})):
            continue
        objects.append(ObjectInstance(next_id, "crate", ObjectKind.CLUTTER,
                                      cell_center(cell), MassClass.HEAVY,
                                      cells=(cell,)))
        next_id += 1
    for _ in range(int(rng.integers(0, 4))):
        cell = free_pool[int(rng.integers(len(free_pool)))]
        if terrain[cell] != int(Terrain.FREE):
            continue
        objects.append(ObjectInstance(next_id, "cushion", ObjectKind.CLUTTER,
                                      cell_center(cell), MassClass.LIGHT))
        next_id += 1

    grid = SceneGrid(width=width, height=height, terrain=terrain, rooms=rooms,
                     doorways=sorted(set(doorways)))
    scene = Scene(grid=grid, objects=objects, goal_furniture_id=goal_furniture_id,
                  scene_id="", seed=seed)
    scene.scene_id = scene_content_id(scene_to_dict(scene))
    return scene


def populate_task(scene: Scene, seed: int,
                  params: TaskParams | None = None) -> TaskInstance:
    """Place targets and containers, pick the agent spawn, and build the task
    spec. Every placement is checked reachable from the spawn."""
    params = params or TaskParams()
    rng = np.random.default_rng(seed)
    blocked = static_occupancy(scene.grid, scene.objects)
    zone = compute_goal_zone(scene, params.r_goal)
    house_cells = {c for o in scene.objects for c in o.footprint_cells()}

    for _ in range(params.max_attempts):
        instance = _populate_once(rng, scene, blocked, zone.zone_cells,
                                  house_cells, seed, params)
        if instance is not None:
            return instance
    raise GenerationError(f"no reachable placement after {params.max_attempts} attempts")


def _adjacent_to_obstacle(blocked: np.ndarray, cell: Cell) -> bool:
    width, height = blocked.shape
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            nx, ny = cell[0] + dx, cell[1] + dy
            if not (0 <= nx < width and 0 <= ny < height) or blocked[nx, ny]:
                return True
    return False


def _populate_once(rng: np.random.Generator, scene: Scene, blocked: np.ndarray,
                   zone_cells: frozenset[Cell], house_cells: set[Cell], seed: int,
                   params: TaskParams) -> TaskInstance | None:
    grid = scene.grid
    next_id = max(o.id for o in scene.objects) + 1 if scene.objects else 1
    used: set[Cell] = set(house_cells)
    objects: list[ObjectInstance] = []

    total = int(rng.integers(params.min_targets, params.max_targets + 1))
    picks = rng.integers(0, len(TARGET_CATEGORIES), size=total)
    required: dict[str, int] = {}
    for p in picks:
        cat = TARGET_CATEGORIES[int(p)]
        required[cat] = required.get(cat, 0) + 1
    required = {cat: required[cat] for cat in TARGET_CATEGORIES if cat in required}

    rooms = grid.rooms
    target_sites_by_room = []
    for room in rooms:
        sites = [c for c in sorted(room.cells)
                 if not blocked[c] and _adjacent_to_obstacle(blocked, c)]
        target_sites_by_room.append(sites)

    def place(category: str, kind: ObjectKind, sites: list[Cell]) -> ObjectInstance | None:
        nonlocal next_id
        open_sites = [c for c in sites if c not in used]
        if not open_sites:
            return None
        cell = open_sites[int(rng.integers(len(open_sites)))]
        used.add(cell)
        obj = ObjectInstance(next_id, category, kind, cell_center(cell), MassClass.LIGHT)
        next_id += 1
        objects.append(obj)
        return obj

    for cat, count in required.items():
        for _ in range(count):
            room_order = list(rng.permutation(len(rooms)))
            placed = None
            for ri in room_order:
                placed = place(cat, ObjectKind.TARGET, target_sites_by_room[ri])
                if placed is not None:
                    break
            if placed is None:
                return None

    # Independent 25% container roll per room.
    for room in rooms:
        if rng.random() >= params.container_prob:
            continue
        sites = [c for c in sorted(room.cells) if not blocked[c]]
        place(CONTAINER_CATEGORY, ObjectKind.CONTAINER, sites)

    spawn_sites = sorted((int(x), int(y)) for x, y in zip(*np.nonzero(~blocked))
                         if (int(x), int(y)) not in used
                         and grid.room_of((int(x), int(y))) is not None)
    if not spawn_sites:
        return None
    spawn_cell = spawn_sites[int(rng.integers(len(spawn_sites)))]
    spawn_pose = cell_center(spawn_cell)
    spawn_heading = float(rng.integers(0, 24)) * 15.0

    reached = reachable_cells(blocked, spawn_cell)
    for obj in objects:
        if footprint_cell(obj.pose) not in reached:
            return None
    if not any(c in reached for c in zone_cells if grid.in_bounds(c) and not blocked[c]):
        return None

    spec = TaskSpec(required=required, goal_category=scene.goal_category,
                    budget=params.budget, seed=seed)
    return TaskInstance(scene=scene, spec=spec, objects=objects,
                        spawn_pose=spawn_pose, spawn_heading=spawn_heading)


def build_suite(n_houses: int, tasks_per_house: int, split: str, master_seed: int,
                house_params: HouseParams | None = None,
                task_params: TaskParams | None = None) -> Suite:
    """Deterministic suite of houses x tasks; house seeds are disjoint across
    splits because the split name feeds the seed derivation."""
    if n_houses <= 0 or tasks_per_house <= 0:
        raise ValueError("counts must be positive")
    scenes: dict[str, Scene] = {}
    tasks: list[SuiteTask] = []
    for i in range(n_houses):
        house_id = f"{split}-h{i:03d}"
        scene = generate_house(stable_hash("house", split, master_seed, i), house_params)
        scenes[house_id] = scene
        for t in range(tasks_per_house):
            task_seed = stable_hash("task", split, master_seed, i, t)
            instance = populate_task(scene, task_seed, task_params)
            tasks.append(SuiteTask(
                task_id=f"{house_id}-t{t:03d}",
                house_id=house_id,
                scene_id=scene.scene_id,
                spec=instance.spec,
            ))
    return Suite(split=split, master_seed=master_seed, scenes=scenes, tasks=tasks)


def build_default_suites(master_seed: int) -> tuple[Suite, Suite]:
    """The benchmark's standard shape: 10 train houses x 100 tasks and
    5 test houses x 20 tasks."""
    train = build_suite(10, 100, "train", master_seed)
    test = build_suite(5, 20, "test", master_seed)
    return train, test
