"""8-connected grid shortest paths.

Straight moves cost 1, diagonal moves sqrt(2); a diagonal move is allowed
only when both adjacent orthogonal cells are free (no corner cutting).
The octile heuristic is admissible and consistent under this motion model,
and ties are broken by (f, h, linear cell index) so searches are fully
deterministic.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .world import Cell

SQRT2 = math.sqrt(2.0)

_NEIGHBORS = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
)


def octile(a: Cell, b: Cell) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def astar(blocked: np.ndarray, start: Cell, goal: Cell) -> list[Cell] | None:
    """Shortest path over cells not marked blocked, or None.

    ``blocked`` is a (width, height) boolean array; callers planning over an
    estimated map must already have mapped unexplored cells to False
    (optimistic planning). A blocked or unreachable goal yields None. The
    returned path includes both endpoints; start == goal gives [start].
    """
    width, height = blocked.shape
    sx, sy = start
    gx, gy = goal
    if not (0 <= sx < width and 0 <= sy < height and 0 <= gx < width and 0 <= gy < height):
        return None
    if blocked[start] or blocked[goal]:
        return None
    if start == goal:
        return [start]

    g_score = {start: 0.0}
    came_from: dict[Cell, Cell] = {}
    open_heap: list[tuple[float, float, int, Cell]] = []
    h0 = octile(start, goal)
    heapq.heappush(open_heap, (h0, h0, sx * height + sy, start))
    closed: set[Cell] = set()

    while open_heap:
        _, _, _, current = heapq.heappop(open_heap)
        if current == goal:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            path.reverse()
            return path
        if current in closed:
            continue
        closed.add(current)
        cx, cy = current
        base = g_score[current]
        for dx, dy, cost in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < width and 0 <= ny < height) or blocked[nx, ny]:
                continue
            if dx != 0 and dy != 0 and (blocked[cx + dx, cy] or blocked[cx, cy + dy]):
                continue
            tentative = base + cost
            neighbor = (nx, ny)
            if tentative < g_score.get(neighbor, math.inf) - 1e-12:
                g_score[neighbor] = tentative
                came_from[neighbor] = current
                h = octile(neighbor, goal)
                heapq.heappush(open_heap, (tentative + h, h, nx * height + ny, neighbor))
    return None


def next_aim(pose: tuple[float, float], path: list[Cell], idx: int,
             cell_size: float) -> tuple[int, Cell]:
    """Advance past reached waypoints, then aim down the current straight run
    so fixed-length moves land on path cells instead of overshooting corners."""
    n = len(path)

    def center(cell: Cell) -> tuple[float, float]:
        return (cell[0] + 0.5) * cell_size, (cell[1] + 0.5) * cell_size

    def dist(cell: Cell) -> float:
        cx, cy = center(cell)
        return math.hypot(cx - pose[0], cy - pose[1])

    while idx < n - 1 and dist(path[idx]) < 0.26:
        idx += 1
    j = idx
    if j + 1 < n:
        d = (path[j + 1][0] - path[j][0], path[j + 1][1] - path[j][1])
        while (j + 1 < n
               and (path[j + 1][0] - path[j][0], path[j + 1][1] - path[j][1]) == d
               and dist(path[j]) < 0.45):
            j += 1
    return idx, path[j]


def path_cost(path: list[Cell]) -> tuple[int, int]:
    """Exact cost of a path as (straight steps, diagonal steps)."""
    straight = diagonal = 0
    for a, b in zip(path, path[1:]):
        if a[0] != b[0] and a[1] != b[1]:
            diagonal += 1
        else:
            straight += 1
    return straight, diagonal


def path_cost_value(path: list[Cell]) -> float:
    straight, diagonal = path_cost(path)
    return straight + diagonal * SQRT2
