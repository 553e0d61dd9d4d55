"""Independent reference answers used to judge the planner.

The grid oracle runs Dijkstra on a fine occupancy lattice (8-connected,
diagonals blocked when either flanking orthogonal cell is occupied) built
from the same mesh, obstacle, and clearance inputs the planner sees.  It
shares no code with the planner beyond the low-level containment kernel.
"""

from __future__ import annotations

import heapq
import math
import random

from scenesim.geometry import NavMesh, ObstacleDisc, build_navmesh

SQRT2 = math.sqrt(2.0)


class GridOracle:
    def __init__(self, mesh: NavMesh, obstacles: list[ObstacleDisc],
                 clearance: float, cell: float = 0.05):
        xs = [p[0] for poly in mesh.polygons for p in poly]
        ys = [p[1] for poly in mesh.polygons for p in poly]
        self.cell = cell
        self.x0, self.y0 = min(xs), min(ys)
        self.nx = int(round((max(xs) - self.x0) / cell))
        self.ny = int(round((max(ys) - self.y0) / cell))
        self.free = {}
        for i in range(self.nx):
            for j in range(self.ny):
                x, y = self.center(i, j)
                if mesh.locate((x, y)) is None:
                    continue
                ok = True
                for d in obstacles:
                    dx, dy = x - d.center[0], y - d.center[1]
                    if math.sqrt(dx * dx + dy * dy) - d.radius < clearance:
                        ok = False
                        break
                if ok:
                    self.free[(i, j)] = True

    def center(self, i: int, j: int) -> tuple[float, float]:
        return (self.x0 + (i + 0.5) * self.cell, self.y0 + (j + 0.5) * self.cell)

    def free_cells(self) -> list[tuple[int, int]]:
        return sorted(self.free)

    def shortest(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        """Lattice path length between two free cells, or inf."""
        if a not in self.free or b not in self.free:
            return math.inf
        dist = {a: 0.0}
        heap = [(0.0, a)]
        done = set()
        while heap:
            d, cur = heapq.heappop(heap)
            if cur in done:
                continue
            if cur == b:
                return d
            done.add(cur)
            ci, cj = cur
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    nxt = (ci + di, cj + dj)
                    if nxt not in self.free:
                        continue
                    if di != 0 and dj != 0:
                        if (ci + di, cj) not in self.free or (ci, cj + dj) not in self.free:
                            continue
                        step = SQRT2 * self.cell
                    else:
                        step = self.cell
                    nd = d + step
                    if nd < dist.get(nxt, math.inf):
                        dist[nxt] = nd
                        heapq.heappush(heap, (nd, nxt))
        return math.inf


def random_cell_mesh(rng: random.Random, side: int = 5, keep_p: float = 0.75,
                     max_cells: int = 20) -> NavMesh:
    """Connected subset of a side x side grid of unit squares."""
    while True:
        cells = [
            (i, j)
            for i in range(side)
            for j in range(side)
            if rng.random() < keep_p
        ]
        if not cells:
            continue
        cellset = set(cells)
        seen = {cells[0]}
        stack = [cells[0]]
        while stack:
            ci, cj = stack.pop()
            for ni, nj in ((ci + 1, cj), (ci - 1, cj), (ci, cj + 1), (ci, cj - 1)):
                if (ni, nj) in cellset and (ni, nj) not in seen:
                    seen.add((ni, nj))
                    stack.append((ni, nj))
        comp = sorted(seen)[:max_cells]
        if len(comp) >= 4:
            polys = [
                [(float(i), float(j)), (float(i + 1), float(j)),
                 (float(i + 1), float(j + 1)), (float(i), float(j + 1))]
                for i, j in comp
            ]
            return build_navmesh(polys)


def random_discs(rng: random.Random, mesh: NavMesh, count: int) -> list[ObstacleDisc]:
    xs = [p[0] for poly in mesh.polygons for p in poly]
    ys = [p[1] for poly in mesh.polygons for p in poly]
    discs = []
    for _ in range(count):
        discs.append(
            ObstacleDisc(
                (rng.uniform(min(xs), max(xs)), rng.uniform(min(ys), max(ys))),
                rng.uniform(0.15, 0.4),
            )
        )
    return discs
