"""Physics-lite action engine.

One World per episode: it owns the mutable object/agent state, charges the
interaction budget, and resolves the six challenge actions plus the
rotate-to navigation helper. Failures are reported through ActionStatus
values, never exceptions; exceptions are reserved for contract violations
(unknown ids, acting on a finished episode, malformed actions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .config import MOVE_STEP, TURN_STEP, SimConfig
from .pathfind import astar, next_aim
from .visibility import VisibilityEngine, segment_cells
from .world import (
    CELL_SIZE,
    AgentState,
    Cell,
    GoalZone,
    GridHaulError,
    MassClass,
    ObjectInstance,
    ObjectKind,
    Pose,
    Scene,
    TaskSpec,
    Terrain,
    cell_center,
    compute_goal_zone,
    footprint_cell,
    static_occupancy,
)


class EpisodeOver(GridHaulError):
    """An action was issued after the episode terminated."""


class UnknownObjectError(GridHaulError):
    """An action referenced an object id that does not exist."""


class ContractError(GridHaulError):
    """An agent emitted an action outside the six-action space."""


class ActionStatus(str, Enum):
    ONGOING = "ongoing"
    SUCCESS = "success"
    FAILED_TO_MOVE = "failed_to_move"
    FAILED_TO_TURN = "failed_to_turn"
    CANNOT_REACH = "cannot_reach"
    FAILED_TO_REACH = "failed_to_reach"
    FAILED_TO_GRASP = "failed_to_grasp"
    NOT_HOLDING = "not_holding"
    CLAMPED_CAMERA_ROTATION = "clamped_camera_rotation"  # reserved, never emitted
    FAILED_TO_BEND = "failed_to_bend"                    # reserved, never emitted
    COLLISION = "collision"
    TIPPING = "tipping"                                  # reserved, never emitted
    NOT_IN = "not_in"
    STILL_IN = "still_in"


# The agent-facing action space; rotate_to is a sim-level navigation helper
# composed of 15-degree turns and is not part of it.
ACTION_KINDS = ("move_forward", "rotate_left", "rotate_right",
                "go_to_grasp", "put_in_container", "drop")


@dataclass(frozen=True)
class Action:
    kind: str
    object_id: int | None = None


@dataclass(frozen=True)
class Detection:
    object_id: int
    category: str
    kind: ObjectKind
    pose: Pose
    cells: tuple[Cell, ...]


@dataclass(frozen=True)
class Observation:
    cells: np.ndarray      # (M, 2) visible cell coordinates
    occupied: np.ndarray   # (M,) blocked flag per visible cell
    detections: tuple[Detection, ...]
    pose: Pose
    heading: float
    held: tuple[int, ...]
    last_status: ActionStatus | None
    steps_charged: int

    @property
    def visible_cells(self) -> tuple[tuple[Cell, bool], ...]:
        pairs = [((int(x), int(y)), bool(o))
                 for (x, y), o in zip(self.cells, self.occupied)]
        return tuple(sorted(pairs))


@dataclass(frozen=True)
class SceneState:
    """Full ground-truth snapshot; for tests and oracles, never for agents."""

    objects: dict[int, ObjectInstance]
    agent_pose: Pose
    agent_heading: float
    arm_slots: tuple[int | None, int | None]
    steps_charged: int
    transported: frozenset[int]


@lru_cache(maxsize=4)
def _release_offsets(radius_cells: int) -> tuple[tuple[int, int], ...]:
    offsets = []
    for dx in range(-radius_cells, radius_cells + 1):
        for dy in range(-radius_cells, radius_cells + 1):
            if dx * dx + dy * dy <= radius_cells * radius_cells:
                offsets.append((dx, dy))
    offsets.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[1], o[0]))
    return tuple(offsets)


def _wrap_angle(delta: float) -> float:
    return (delta + 180.0) % 360.0 - 180.0


def _bearing(src: Pose, dst: Pose) -> float:
    return math.degrees(math.atan2(dst[1] - src[1], dst[0] - src[0])) % 360.0


class World:
    """Mutable episode state plus the action API."""

    def __init__(self, scene: Scene, spec: TaskSpec, task_objects: list[ObjectInstance],
                 spawn_pose: Pose, spawn_heading: float, config: SimConfig | None = None,
                 rng: np.random.Generator | None = None, recorder=None):
        self.scene = scene
        self.grid = scene.grid
        self.spec = spec
        self.config = config or SimConfig()
        self.rng = rng if rng is not None else np.random.default_rng(spec.seed)
        self.recorder = recorder
        self.objects: dict[int, ObjectInstance] = {}
        for obj in scene.objects + task_objects:
            if obj.id in self.objects:
                raise GridHaulError(f"duplicate object id {obj.id}")
            self.objects[obj.id] = obj.copy()
        self.agent = AgentState(pose=spawn_pose, heading=spawn_heading % 360.0)
        self.goal: GoalZone = compute_goal_zone(scene, self.config.r_goal)
        self.budget = spec.budget
        self.required_total = spec.required_total
        # Static occupancy: terrain plus resting heavy objects. Light objects
        # never block, and nothing in this engine moves a heavy one, so this
        # is constant for the whole episode.
        self.blocked = static_occupancy(scene.grid, list(self.objects.values()))
        self.vis = VisibilityEngine(self.blocked)
        self.last_status: ActionStatus | None = None
        # Optional callable returning the agent-estimated blocked grid in
        # scene coordinates; go_to_grasp navigates on it instead of ground
        # truth so unexplored obstacles can still cause collisions.
        self.nav_grid_provider = None
        self._transported_dirty = True
        self._transported: frozenset[int] = frozenset()
        self._last_collision_cell: Cell | None = None

    # -- episode bookkeeping -------------------------------------------------

    @property
    def steps_charged(self) -> int:
        return self.agent.steps_charged

    @property
    def done(self) -> bool:
        return (self.agent.steps_charged >= self.budget
                or self.transported_count() >= self.required_total)

    @property
    def terminal_reason(self) -> str:
        return "complete" if self.transported_count() >= self.required_total else "budget"

    def transported_ids(self) -> frozenset[int]:
        """Targets currently resting on a goal-zone cell."""
        if self._transported_dirty:
            zone = self.goal.zone_cells
            self._transported = frozenset(
                o.id for o in self.objects.values()
                if o.kind is ObjectKind.TARGET and o.resting
                and footprint_cell(o.pose) in zone)
            self._transported_dirty = False
        return self._transported

    def transported_count(self) -> int:
        """Transported targets counted against the per-category requirement."""
        by_cat: dict[str, int] = {}
        for oid in self.transported_ids():
            cat = self.objects[oid].category
            by_cat[cat] = by_cat.get(cat, 0) + 1
        return sum(min(n, self.spec.required.get(cat, 0)) for cat, n in by_cat.items())

    def _require_active(self) -> None:
        if self.done:
            raise EpisodeOver(f"episode finished ({self.terminal_reason})")

    def _charge(self) -> None:
        self.agent.steps_charged += 1

    def _record(self, name: str, status: ActionStatus, args: dict | None = None,
                internal: bool = False) -> None:
        if self.recorder is not None:
            self.recorder.record(
                step=self.agent.steps_charged, name=name, args=args or {},
                status=status.value, pose=self.agent.pose, heading=self.agent.heading,
                transported=self.transported_count(), internal=internal)

    # -- perception ----------------------------------------------------------

    def observe(self, fov: float | None = None, view_range: float | None = None) -> Observation:
        """Oracle ray-cast observation; charges no step."""
        fov = self.config.fov if fov is None else fov
        view_range = self.config.view_range if view_range is None else view_range
        cells, occupied = self.vis.visible_cells(self.agent.pose, self.agent.heading,
                                                 fov, view_range)
        mask = np.zeros_like(self.blocked)
        mask[cells[:, 0], cells[:, 1]] = True
        detections = []
        for oid in sorted(self.objects):
            obj = self.objects[oid]
            if not obj.resting:
                continue
            seen = tuple(c for c in obj.footprint_cells()
                         if self.grid.in_bounds(c) and mask[c])
            if seen:
                detections.append(Detection(obj.id, obj.category, obj.kind,
                                            obj.pose, seen))
        return Observation(cells=cells, occupied=occupied, detections=tuple(detections),
                           pose=self.agent.pose, heading=self.agent.heading,
                           held=self.agent.held_ids(), last_status=self.last_status,
                           steps_charged=self.agent.steps_charged)

    # -- action dispatch -----------------------------------------------------

    def execute(self, action: Action) -> ActionStatus:
        """Run one agent action from the six-action space."""
        if not isinstance(action, Action) or action.kind not in ACTION_KINDS:
            raise ContractError(f"action outside the six-action space: {action!r}")
        if action.kind == "go_to_grasp":
            if action.object_id is None:
                raise ContractError("go_to_grasp requires an object id")
            return self.go_to_grasp(action.object_id)
        handler = getattr(self, action.kind)
        return handler()

    # -- primitive actions ---------------------------------------------------

    def move_forward(self, _internal: bool = False) -> ActionStatus:
        self._require_active()
        self._charge()
        heading = math.radians(self.agent.heading)
        ux, uy = math.cos(heading), math.sin(heading)
        px, py = self.agent.pose
        target = (px + MOVE_STEP * ux, py + MOVE_STEP * uy)
        start_cell = self.agent.cell
        blocker = None
        heavy_hit = False
        for cell in segment_cells(self.agent.pose, target):
            if cell == start_cell:
                continue
            if not self.grid.in_bounds(cell):
                blocker, heavy_hit = cell, True
                break
            if self.blocked[cell]:
                blocker = cell
                heavy_hit = self.grid.terrain[cell] != int(Terrain.OCCUPIED_LIGHT)
                break
        if blocker is not None:
            self.agent.collided_last_action = True
            self._last_collision_cell = blocker
            if heavy_hit:
                self._shake_off_held_items()
            status = ActionStatus.COLLISION
        else:
            self.agent.pose = target
            self.agent.collided_last_action = False
            self._sync_held_poses()
            status = ActionStatus.SUCCESS
        self.last_status = status
        self._record("move_forward", status, internal=_internal)
        return status

    def rotate_left(self, _internal: bool = False) -> ActionStatus:
        return self._rotate_step(+TURN_STEP, "rotate_left", _internal)

    def rotate_right(self, _internal: bool = False) -> ActionStatus:
        return self._rotate_step(-TURN_STEP, "rotate_right", _internal)

    def _rotate_step(self, delta: float, name: str, internal: bool) -> ActionStatus:
        self._require_active()
        self._charge()
        self.agent.heading = (self.agent.heading + delta) % 360.0
        self.agent.collided_last_action = False
        self.last_status = ActionStatus.SUCCESS
        self._record(name, ActionStatus.SUCCESS, internal=internal)
        return ActionStatus.SUCCESS

    def rotate_to(self, target: Pose, _internal: bool = False) -> ActionStatus:
        """Turn toward a target pose in 15-degree ticks, one step each."""
        self._require_active()
        if not self.grid.contains_pose(target):
            raise GridHaulError(f"rotate_to target {target} out of bounds")
        dist = math.hypot(target[0] - self.agent.pose[0], target[1] - self.agent.pose[1])
        bearing = self.agent.heading if dist < 1e-9 else _bearing(self.agent.pose, target)
        delta = _wrap_angle(bearing - self.agent.heading)
        ticks = max(1, math.ceil(abs(delta) / TURN_STEP - 1e-9))
        sign = 1.0 if delta >= 0 else -1.0
        remaining = abs(delta)
        for _ in range(ticks):
            if self.done:
                self.last_status = ActionStatus.FAILED_TO_TURN
                self._record("rotate_to", ActionStatus.FAILED_TO_TURN, internal=_internal)
                return ActionStatus.FAILED_TO_TURN
            self._charge()
            step = min(TURN_STEP, remaining)
            self.agent.heading = (self.agent.heading + sign * step) % 360.0
            remaining -= step
        self.agent.heading = bearing % 360.0
        self.last_status = ActionStatus.SUCCESS
        self._record("rotate_to", ActionStatus.SUCCESS, internal=_internal)
        return ActionStatus.SUCCESS

    # -- interactive actions -------------------------------------------------

    def go_to_grasp(self, object_id: int) -> ActionStatus:
        """Move toward a visible light object and grasp it.

        Navigation runs on the agent-estimated map when a provider is wired
        (unexplored cells optimistic), falling back to an empty estimate, so
        collisions with unknown obstacles are possible en route.
        """
        self._require_active()
        obj = self.objects.get(object_id)
        if obj is None:
            raise UnknownObjectError(f"no object with id {object_id}")
        if obj.mass_class is not MassClass.LIGHT:
            raise GridHaulError(f"object {object_id} is not graspable (heavy)")
        held = self.agent.held_ids()
        if object_id in held:
            raise GridHaulError(f"object {object_id} is already held")
        if obj.contained_in is not None and obj.contained_in in held:
            raise GridHaulError(f"object {object_id} is inside a held container")

        observation = self.observe()
        if object_id not in {d.object_id for d in observation.detections}:
            self._charge()
            return self._finish_grasp(object_id, ActionStatus.FAILED_TO_REACH)
        if self.agent.free_slot() is None:
            self._charge()
            return self._finish_grasp(object_id, ActionStatus.FAILED_TO_GRASP)

        if self.nav_grid_provider is not None:
            nav_blocked = np.array(self.nav_grid_provider(), dtype=bool)
        else:
            nav_blocked = np.zeros_like(self.blocked)
        replans = 0
        while True:
            if self._within_reach(obj):
                return self._finish_grasp(object_id, self._grasp(obj))
            if self.done:
                return self._finish_grasp(object_id, ActionStatus.FAILED_TO_MOVE)
            goal_cell = footprint_cell(obj.pose)
            nav_blocked[goal_cell] = False  # light object cells stay approachable
            path = astar(nav_blocked, self.agent.cell, goal_cell)
            if path is None:
                if self.agent.steps_charged == observation.steps_charged:
                    self._charge()
                return self._finish_grasp(object_id, ActionStatus.FAILED_TO_MOVE)
            walked = self._walk(path, nav_blocked, reach_pose=obj.pose)
            if walked is ActionStatus.SUCCESS:
                continue  # reached or path exhausted; loop re-checks reach
            if walked is ActionStatus.COLLISION:
                replans += 1
                if replans > self.config.max_replans:
                    return self._finish_grasp(object_id, ActionStatus.FAILED_TO_MOVE)
                continue
            if walked is ActionStatus.CANNOT_REACH:
                return self._finish_grasp(object_id, ActionStatus.CANNOT_REACH)
            return self._finish_grasp(object_id, ActionStatus.FAILED_TO_MOVE)

    def _finish_grasp(self, object_id: int, status: ActionStatus) -> ActionStatus:
        self.last_status = status
        self._record("go_to_grasp", status, args={"object_id": object_id})
        return status

    def _within_reach(self, obj: ObjectInstance) -> bool:
        return math.hypot(obj.pose[0] - self.agent.pose[0],
                          obj.pose[1] - self.agent.pose[1]) <= self.config.r_reach

    def _grasp(self, obj: ObjectInstance) -> ActionStatus:
        self._charge()  # the arm motion itself
        slot = self.agent.free_slot()
        if slot is None:
            return ActionStatus.FAILED_TO_GRASP
        self.agent.arm_slots[slot] = obj.id
        obj.resting = False
        self._sync_held_poses()
        self._transported_dirty = True
        return ActionStatus.SUCCESS

    def _walk(self, path: list[Cell], nav_blocked: np.ndarray,
              reach_pose: Pose | None = None) -> ActionStatus:
        """Follow one planned path with rotate_to/move_forward primitives.

        Returns SUCCESS when the path is exhausted or reach_pose came within
        grasp radius, COLLISION when a heavy hit should trigger a replan
        (the blocking cell is stamped into nav_blocked), CANNOT_REACH when
        progress stalls.
        """
        idx = 0
        stall_budget = 3 * len(path) + 12
        while stall_budget > 0:
            if reach_pose is not None and math.hypot(
                    reach_pose[0] - self.agent.pose[0],
                    reach_pose[1] - self.agent.pose[1]) <= self.config.r_reach:
                return ActionStatus.SUCCESS
            if self.done:
                return ActionStatus.FAILED_TO_MOVE
            idx, aim = next_aim(self.agent.pose, path, idx, CELL_SIZE)
            aim_center = cell_center(aim)
            if (idx >= len(path) - 1
                    and math.hypot(aim_center[0] - self.agent.pose[0],
                                   aim_center[1] - self.agent.pose[1]) < 0.26):
                return ActionStatus.SUCCESS
            stall_budget -= 1
            diff = _wrap_angle(_bearing(self.agent.pose, aim_center) - self.agent.heading)
            if abs(diff) > 0.5:
                status = self.rotate_to(aim_center, _internal=True)
                if status is not ActionStatus.SUCCESS:
                    return ActionStatus.FAILED_TO_MOVE
                continue
            status = self.move_forward(_internal=True)
            if status is ActionStatus.COLLISION:
                if self._last_collision_cell is not None \
                        and self.grid.in_bounds(self._last_collision_cell):
                    nav_blocked[self._last_collision_cell] = True
                return ActionStatus.COLLISION
            if status is not ActionStatus.SUCCESS:
                return ActionStatus.FAILED_TO_MOVE
        return ActionStatus.CANNOT_REACH

    def put_in_container(self, _internal: bool = False) -> ActionStatus:
        self._require_active()
        self._charge()
        container = None
        target = None
        for oid in self.agent.held_ids():
            obj = self.objects[oid]
            if obj.kind is ObjectKind.CONTAINER and container is None:
                container = obj
            elif obj.kind is ObjectKind.TARGET and target is None:
                target = obj
        if container is None or target is None:
            status = ActionStatus.NOT_HOLDING
        elif len(self.contents_of(container.id)) >= self.config.c_cap:
            status = ActionStatus.NOT_IN
        else:
            target.contained_in = container.id
            target.resting = False
            slot = self.agent.arm_slots.index(target.id)
            self.agent.arm_slots[slot] = None
            self._sync_held_poses()
            status = ActionStatus.SUCCESS
        self.last_status = status
        self._record("put_in_container", status, internal=_internal)
        return status

    def drop(self, _internal: bool = False) -> ActionStatus:
        self._require_active()
        self._charge()
        held = self.agent.held_ids()
        if not held:
            self.last_status = ActionStatus.NOT_HOLDING
            self._record("drop", ActionStatus.NOT_HOLDING, internal=_internal)
            return ActionStatus.NOT_HOLDING
        status = ActionStatus.SUCCESS
        taken: set[Cell] = set()
        released: list[list] = []
        for slot, oid in enumerate(list(self.agent.arm_slots)):
            if oid is None:
                continue
            self.agent.arm_slots[slot] = None
            obj = self.objects[oid]
            cell = self._release(obj, self.agent.pose, taken)
            released.append([oid, cell[0], cell[1]])
            if obj.kind is ObjectKind.CONTAINER:
                for content in self.contents_of(oid):
                    if self.rng.random() < self.config.p_still_in:
                        # The pour failed for this item; it stays contained.
                        content.pose = obj.pose
                        status = ActionStatus.STILL_IN
                    else:
                        ccell = self._release(content, obj.pose, taken, min_ring=1)
                        released.append([content.id, ccell[0], ccell[1]])
        self._transported_dirty = True
        self.last_status = status
        self._record("drop", status, args={"released": released}, internal=_internal)
        return status

    # -- shared object mechanics ----------------------------------------------

    def contents_of(self, container_id: int) -> list[ObjectInstance]:
        return [self.objects[oid] for oid in sorted(self.objects)
                if self.objects[oid].contained_in == container_id]

    def _sync_held_poses(self) -> None:
        for oid in self.agent.held_ids():
            obj = self.objects[oid]
            obj.pose = self.agent.pose
            if obj.kind is ObjectKind.CONTAINER:
                for content in self.contents_of(oid):
                    content.pose = obj.pose

    def _release(self, obj: ObjectInstance, origin: Pose, taken: set[Cell],
                 min_ring: int = 0) -> Cell:
        """Rest an object on the nearest free cell around an origin pose."""
        ox, oy = footprint_cell(origin)
        chosen = None
        for dx, dy in _release_offsets(16):
            if dx * dx + dy * dy < min_ring * min_ring:
                continue
            cell = (ox + dx, oy + dy)
            if not self.grid.in_bounds(cell) or self.blocked[cell] or cell in taken:
                continue
            chosen = cell
            break
        if chosen is None:
            chosen = (ox, oy)
        taken.add(chosen)
        obj.contained_in = None
        obj.resting = True
        obj.pose = cell_center(chosen)
        self._transported_dirty = True
        return chosen

    def _shake_off_held_items(self) -> None:
        """On a heavy collision each held item falls with probability p_drop;
        a fallen container spills everything it carries next to it."""
        taken: set[Cell] = set()
        for slot, oid in enumerate(list(self.agent.arm_slots)):
            if oid is None:
                continue
            if self.rng.random() >= self.config.p_drop:
                continue
            self.agent.arm_slots[slot] = None
            obj = self.objects[oid]
            cell = self._release(obj, self.agent.pose, taken)
            if obj.kind is ObjectKind.CONTAINER:
                for content in self.contents_of(oid):
                    self._release(content, cell_center(cell), taken, min_ring=1)

    # -- oracle access ---------------------------------------------------------

    def snapshot(self) -> SceneState:
        return SceneState(
            objects={oid: obj.copy() for oid, obj in self.objects.items()},
            agent_pose=self.agent.pose,
            agent_heading=self.agent.heading,
            arm_slots=(self.agent.arm_slots[0], self.agent.arm_slots[1]),
            steps_charged=self.agent.steps_charged,
            transported=self.transported_ids(),
        )
