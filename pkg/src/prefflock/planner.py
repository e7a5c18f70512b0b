"""Grid-based global planner.

Obstacle footprints are inflated by a clearance margin onto an occupancy
grid; waypoint sequences are then found with 8-connected A* (octile
heuristic, diagonal cost sqrt(2)).  Ties in the open list break
deterministically on (f, h, row, col).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .world import Arena

SQRT2 = math.sqrt(2.0)

_NEIGHBORS = (
    (-1, -1, SQRT2), (-1, 0, 1.0), (-1, 1, SQRT2),
    (0, -1, 1.0), (0, 1, 1.0),
    (1, -1, SQRT2), (1, 0, 1.0), (1, 1, SQRT2),
)


@dataclass(frozen=True)
class GridMap:
    """Inflated occupancy grid over the arena ground plane."""

    cell_size: float
    occupancy: np.ndarray  # bool (rows=x cells, cols=y cells), True = blocked

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupancy.shape

    def cell_of(self, point_xy) -> tuple[int, int]:
        x, y = float(point_xy[0]), float(point_xy[1])
        return int(x // self.cell_size), int(y // self.cell_size)

    def center_of(self, cell: tuple[int, int]) -> np.ndarray:
        return (np.array(cell, dtype=float) + 0.5) * self.cell_size

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.shape[0] and 0 <= cell[1] < self.shape[1]

    def is_free(self, cell: tuple[int, int]) -> bool:
        return self.in_bounds(cell) and not self.occupancy[cell]


@dataclass(frozen=True)
class Path:
    """Ordered waypoints (meters) with total length."""

    waypoints: tuple
    cost: float


def build_grid(arena: Arena, inflation: float, cell_size: float) -> GridMap:
    """Rasterize obstacle footprints, blocking cells within ``inflation``."""
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if inflation < 0:
        raise ValueError("inflation must be nonnegative")
    nx = math.ceil(arena.width / cell_size)
    ny = math.ceil(arena.depth / cell_size)
    occupancy = np.zeros((nx, ny), dtype=bool)
    if arena.obstacles:
        xs = (np.arange(nx) + 0.5) * cell_size
        ys = (np.arange(ny) + 0.5) * cell_size
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        for ob in arena.obstacles:
            ex = np.maximum(np.abs(gx - ob.center[0]) - ob.half_extents[0], 0.0)
            ey = np.maximum(np.abs(gy - ob.center[1]) - ob.half_extents[1], 0.0)
            occupancy |= np.hypot(ex, ey) <= inflation
    return GridMap(cell_size=cell_size, occupancy=occupancy)


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def plan(grid: GridMap, start, goal) -> Path:
    """Minimal-cost 8-connected path between two ground points.

    Raises ValueError("invalid endpoint") when either endpoint maps to a
    blocked or out-of-bounds cell and ValueError("unreachable") when no path
    exists.
    """
    start_cell = grid.cell_of(start)
    goal_cell = grid.cell_of(goal)
    if not (grid.is_free(start_cell) and grid.is_free(goal_cell)):
        raise ValueError("invalid endpoint")
    if start_cell == goal_cell:
        return Path(waypoints=(grid.center_of(start_cell),), cost=0.0)

    g_score = {start_cell: 0.0}
    came_from: dict[tuple[int, int], tuple[int, int]] = {}
    h0 = _octile(start_cell, goal_cell)
    open_heap = [(h0, h0, start_cell[0], start_cell[1])]
    closed = set()

    while open_heap:
        _, _, row, col = heapq.heappop(open_heap)
        current = (row, col)
        if current in closed:
            continue
        if current == goal_cell:
            cells = [current]
            while cells[-1] in came_from:
                cells.append(came_from[cells[-1]])
            cells.reverse()
            waypoints = tuple(grid.center_of(c) for c in cells)
            return Path(waypoints=waypoints, cost=g_score[goal_cell] * grid.cell_size)
        closed.add(current)
        for dr, dc, step_cost in _NEIGHBORS:
            nxt = (row + dr, col + dc)
            if not grid.is_free(nxt) or nxt in closed:
                continue
            tentative = g_score[current] + step_cost
            if tentative < g_score.get(nxt, math.inf):
                g_score[nxt] = tentative
                came_from[nxt] = current
                h = _octile(nxt, goal_cell)
                heapq.heappush(open_heap, (tentative + h, h, nxt[0], nxt[1]))

    raise ValueError("unreachable")
