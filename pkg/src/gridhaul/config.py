"""Simulation and planner hyperparameters.

Config files are JSON objects using the short external key names
(``k``, ``R``, ``fov``, ``range``, ``r_reach``, ``C_cap``, ``p_drop``,
``N``, ``r_goal``, ``budget``). CLI flags override config-file values,
which override the defaults below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

# Paper-fixed action quanta; not configurable.
MOVE_STEP = 0.5
TURN_STEP = 15.0

_KEY_TO_FIELD = {
    "k": "replan_every",
    "R": "max_replans",
    "fov": "fov",
    "range": "view_range",
    "r_reach": "r_reach",
    "C_cap": "c_cap",
    "p_drop": "p_drop",
    "p_still_in": "p_still_in",
    "N": "map_n",
    "r_goal": "r_goal",
    "budget": "budget",
    "occ_threshold": "occ_threshold",
}


@dataclass(frozen=True)
class SimConfig:
    fov: float = 90.0           # field of view, degrees
    view_range: float = 3.0     # perception range, meters
    r_reach: float = 0.75       # grasp radius, meters
    c_cap: int = 3              # container capacity
    p_drop: float = 0.5         # per-item drop chance on heavy collision
    p_still_in: float = 0.0     # per-item chance a drop fails to pour an item out
    r_goal: float = 1.0         # goal-zone radius around the goal furniture, meters
    map_n: int = 128            # agent map side, cells
    occ_threshold: float = 0.5  # occupancy probability treated as blocked
    replan_every: int = 5       # primitives between low-level replans (k)
    max_replans: int = 5        # consecutive failed replans before aborting (R)
    budget: int = 1000          # interaction budget, charged steps

    def with_overrides(self, **kwargs) -> "SimConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self

    def to_dict(self) -> dict:
        return {key: getattr(self, field) for key, field in _KEY_TO_FIELD.items()}


def config_from_dict(data: dict, base: SimConfig | None = None) -> SimConfig:
    base = base or SimConfig()
    unknown = set(data) - set(_KEY_TO_FIELD)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return base.with_overrides(**{_KEY_TO_FIELD[k]: v for k, v in data.items()})


def load_config(path: str | Path, base: SimConfig | None = None) -> SimConfig:
    return config_from_dict(json.loads(Path(path).read_text()), base)
