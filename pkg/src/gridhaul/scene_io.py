"""Scene and task-suite files.

Scenes are JSON documents tagged ``tcscene/1`` with run-length-encoded
terrain and room-membership rows. Suites are directories holding a
``suite.json`` manifest (tagged ``tcsuite/1``) plus one scene file per house
under ``scenes/``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .world import (
    CELL_SIZE,
    Cell,
    GridHaulError,
    MassClass,
    ObjectInstance,
    ObjectKind,
    RoomRegion,
    Scene,
    SceneGrid,
    TaskSpec,
    Terrain,
    validate_scene,
)

SCENE_FORMAT = "tcscene/1"
SUITE_FORMAT = "tcsuite/1"


class FormatError(GridHaulError):
    """A scene/suite/trace file does not match its declared format."""


def rle_encode(values: list[int]) -> str:
    """Encode a row of small integers as ``<count>x<value>`` tokens."""
    if not values:
        return ""
    tokens = []
    run_value = values[0]
    run_len = 1
    for v in values[1:]:
        if v == run_value:
            run_len += 1
        else:
            tokens.append(f"{run_len}x{run_value}")
            run_value, run_len = v, 1
    tokens.append(f"{run_len}x{run_value}")
    return " ".join(tokens)


def rle_decode(text: str) -> list[int]:
    values: list[int] = []
    for token in text.split():
        count_str, _, value_str = token.partition("x")
        values.extend([int(value_str)] * int(count_str))
    return values


def _room_map(grid: SceneGrid) -> np.ndarray:
    room_map = np.full((grid.width, grid.height), -1, dtype=np.int16)
    for room in grid.rooms:
        for cell in room.cells:
            room_map[cell] = room.id
    return room_map


def scene_to_dict(scene: Scene) -> dict:
    grid = scene.grid
    terrain = np.asarray(grid.terrain)
    room_map = _room_map(grid)
    objects = []
    for obj in sorted(scene.objects, key=lambda o: o.id):
        entry = {
            "id": obj.id,
            "category": obj.category,
            "kind": obj.kind.value,
            "pose": [obj.pose[0], obj.pose[1]],
            "mass_class": obj.mass_class.value,
        }
        if obj.cells is not None:
            entry["cells"] = [list(c) for c in obj.cells]
        objects.append(entry)
    doc = {
        "format": SCENE_FORMAT,
        "id": scene.scene_id,
        "seed": scene.seed,
        "width": grid.width,
        "height": grid.height,
        "cell_size": grid.cell_size,
        "terrain": [rle_encode([int(terrain[x, y]) for x in range(grid.width)])
                    for y in range(grid.height)],
        "rooms": [rle_encode([int(room_map[x, y]) for x in range(grid.width)])
                  for y in range(grid.height)],
        "doorways": [list(c) for c in grid.doorways],
        "objects": objects,
        "goal_furniture_id": scene.goal_furniture_id,
    }
    return doc


def scene_content_id(doc: dict) -> str:
    """Stable 12-hex content hash over everything except the id itself."""
    body = {k: v for k, v in doc.items() if k != "id"}
    payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def scene_from_dict(doc: dict) -> Scene:
    if doc.get("format") != SCENE_FORMAT:
        raise FormatError(f"expected {SCENE_FORMAT}, got {doc.get('format')!r}")
    width, height = doc["width"], doc["height"]
    terrain = np.zeros((width, height), dtype=np.uint8)
    room_map = np.full((width, height), -1, dtype=np.int16)
    for y, row in enumerate(doc["terrain"]):
        values = rle_decode(row)
        if len(values) != width:
            raise FormatError(f"terrain row {y} has {len(values)} cells, expected {width}")
        terrain[:, y] = values
    for y, row in enumerate(doc["rooms"]):
        values = rle_decode(row)
        if len(values) != width:
            raise FormatError(f"room row {y} has {len(values)} cells, expected {width}")
        room_map[:, y] = values
    room_ids = sorted(int(i) for i in np.unique(room_map) if i >= 0)
    rooms = [RoomRegion(i, frozenset((int(x), int(y))
                                     for x, y in zip(*np.nonzero(room_map == i))))
             for i in room_ids]
    grid = SceneGrid(
        width=width,
        height=height,
        terrain=terrain,
        rooms=rooms,
        doorways=[(int(x), int(y)) for x, y in doc["doorways"]],
        cell_size=doc.get("cell_size", CELL_SIZE),
    )
    objects = []
    for entry in doc["objects"]:
        cells = entry.get("cells")
        objects.append(ObjectInstance(
            id=int(entry["id"]),
            category=entry["category"],
            kind=ObjectKind(entry["kind"]),
            pose=(float(entry["pose"][0]), float(entry["pose"][1])),
            mass_class=MassClass(entry["mass_class"]),
            cells=tuple((int(x), int(y)) for x, y in cells) if cells else None,
        ))
    return Scene(
        grid=grid,
        objects=objects,
        goal_furniture_id=int(doc["goal_furniture_id"]),
        scene_id=doc["id"],
        seed=int(doc["seed"]),
    )


def save_scene(scene: Scene, path: str | Path) -> Path:
    doc = scene_to_dict(scene)
    doc["id"] = scene_content_id(doc)
    scene.scene_id = doc["id"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


def load_scene(path: str | Path) -> Scene:
    doc = json.loads(Path(path).read_text())
    return scene_from_dict(doc)


@dataclass(frozen=True)
class SuiteTask:
    task_id: str
    house_id: str
    scene_id: str
    spec: TaskSpec


@dataclass
class Suite:
    split: str
    master_seed: int
    scenes: dict[str, Scene]  # house_id -> scene
    tasks: list[SuiteTask]

    def scene_for(self, task: SuiteTask) -> Scene:
        return self.scenes[task.house_id]


def save_suite(suite: Suite, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "scenes").mkdir(parents=True, exist_ok=True)
    house_files = {}
    for house_id in sorted(suite.scenes):
        scene = suite.scenes[house_id]
        path = save_scene(scene, out_dir / "scenes" / f"{house_id}.json")
        house_files[house_id] = {"scene": f"scenes/{path.name}", "scene_id": scene.scene_id}
    manifest = {
        "format": SUITE_FORMAT,
        "split": suite.split,
        "master_seed": suite.master_seed,
        "houses": [{"house_id": h, **house_files[h]} for h in sorted(house_files)],
        "tasks": [
            {
                "task_id": t.task_id,
                "house_id": t.house_id,
                "scene_id": t.scene_id,
                "seed": t.spec.seed,
                "required": t.spec.required,
                "goal_category": t.spec.goal_category,
                "budget": t.spec.budget,
            }
            for t in suite.tasks
        ],
    }
    (out_dir / "suite.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return out_dir / "suite.json"


def load_suite(suite_dir: str | Path) -> Suite:
    suite_dir = Path(suite_dir)
    manifest = json.loads((suite_dir / "suite.json").read_text())
    if manifest.get("format") != SUITE_FORMAT:
        raise FormatError(f"expected {SUITE_FORMAT}, got {manifest.get('format')!r}")
    scenes = {}
    for house in manifest["houses"]:
        scenes[house["house_id"]] = load_scene(suite_dir / house["scene"])
    tasks = []
    for entry in manifest["tasks"]:
        tasks.append(SuiteTask(
            task_id=entry["task_id"],
            house_id=entry["house_id"],
            scene_id=entry["scene_id"],
            spec=TaskSpec(
                required={k: int(v) for k, v in entry["required"].items()},
                goal_category=entry["goal_category"],
                budget=int(entry["budget"]),
                seed=int(entry["seed"]),
            ),
        ))
    return Suite(split=manifest["split"], master_seed=int(manifest["master_seed"]),
                 scenes=scenes, tasks=tasks)


def validate_suite(suite_dir: str | Path) -> list[str]:
    """Schema and invariant checks; returns problems naming the offending record."""
    suite_dir = Path(suite_dir)
    problems: list[str] = []
    manifest_path = suite_dir / "suite.json"
    if not manifest_path.exists():
        return [f"{manifest_path}: missing suite.json"]
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        return [f"{manifest_path}: invalid JSON ({exc})"]
    if manifest.get("format") != SUITE_FORMAT:
        return [f"{manifest_path}: format {manifest.get('format')!r} != {SUITE_FORMAT}"]

    scenes: dict[str, Scene] = {}
    for house in manifest.get("houses", []):
        house_id = house.get("house_id", "?")
        scene_path = suite_dir / house.get("scene", "")
        try:
            scene = load_scene(scene_path)
        except (OSError, KeyError, ValueError, FormatError) as exc:
            problems.append(f"house {house_id}: cannot load scene {scene_path} ({exc})")
            continue
        doc = scene_to_dict(scene)
        if scene_content_id(doc) != scene.scene_id:
            problems.append(f"house {house_id}: scene id {scene.scene_id} does not match content")
        for issue in validate_scene(scene):
            problems.append(f"house {house_id}: {issue}")
        scenes[house_id] = scene

    for entry in manifest.get("tasks", []):
        task_id = entry.get("task_id", "?")
        required_keys = {"task_id", "house_id", "scene_id", "seed", "required",
                         "goal_category", "budget"}
        missing = required_keys - set(entry)
        if missing:
            problems.append(f"task {task_id}: missing fields {sorted(missing)}")
            continue
        if entry["house_id"] not in scenes:
            problems.append(f"task {task_id}: unknown house {entry['house_id']}")
            continue
        total = sum(int(v) for v in entry["required"].values())
        if not 6 <= total <= 8:
            problems.append(f"task {task_id}: required total {total} outside [6, 8]")
        if any(int(v) <= 0 for v in entry["required"].values()):
            problems.append(f"task {task_id}: non-positive required count")
        scene = scenes[entry["house_id"]]
        if entry["goal_category"] != scene.goal_category:
            problems.append(f"task {task_id}: goal category {entry['goal_category']!r} "
                            f"does not match scene goal {scene.goal_category!r}")
    return problems
