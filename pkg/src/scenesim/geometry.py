"""Walkable-space geometry: convex polygon mesh with portal adjacency.

The mesh is the substrate every moving pedestrian is planned on.  Polygons
are convex, counterclockwise, and pairwise interior-disjoint; two polygons
are adjacent iff they share an edge exactly (vertices matching within
1e-6 m), and each such shared edge is a portal of the pathfinding graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

Point2 = tuple[float, float]

# Portal endpoints must coincide to this tolerance to count as shared.
VERTEX_SNAP = 1e-6
# Upper bound imposed by the fixed-size interval buffer in the compiled
# segment cover test.
MAX_POLYGONS = 512


class MeshBuildError(ValueError):
    """Invalid polygon soup; carries the offending polygon index."""

    def __init__(self, message: str, polygon_index: int):
        super().__init__(f"polygon {polygon_index}: {message}")
        self.polygon_index = polygon_index


@dataclass(frozen=True)
class ObstacleDisc:
    center: Point2
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be > 0")


@dataclass(frozen=True)
class Portal:
    poly_a: int
    poly_b: int
    p: Point2
    q: Point2

    @property
    def midpoint(self) -> Point2:
        return ((self.p[0] + self.q[0]) * 0.5, (self.p[1] + self.q[1]) * 0.5)


@dataclass(frozen=True)
class Path:
    waypoints: tuple[Point2, ...]
    total_length: float


def _signed_area2(pts: list[Point2]) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s


def _validate_polygon(pts: list[Point2], index: int) -> None:
    if len(pts) < 3:
        raise MeshBuildError("needs at least 3 vertices", index)
    for x, y in pts:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MeshBuildError("non-finite vertex", index)
    if _signed_area2(pts) <= 0:
        raise MeshBuildError("clockwise winding (must be counterclockwise)", index)
    n = len(pts)
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        cx, cy = pts[(i + 2) % n]
        ux, uy = bx - ax, by - ay
        wx, wy = cx - bx, cy - by
        if math.hypot(ux, uy) < VERTEX_SNAP:
            raise MeshBuildError("repeated vertex", index)
        if ux * wy - uy * wx <= 1e-12:
            raise MeshBuildError("not strictly convex", index)


def _clip_convex(subject: list[Point2], clipper: list[Point2]) -> list[Point2]:
    """Sutherland-Hodgman intersection of two convex CCW polygons."""
    out = subject
    n = len(clipper)
    for i in range(n):
        if not out:
            return []
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        nxt: list[Point2] = []
        m = len(out)
        for j in range(m):
            px, py = out[j]
            qx, qy = out[(j + 1) % m]
            cp = ex * (py - ay) - ey * (px - ax)
            cq = ex * (qy - ay) - ey * (qx - ax)
            if cp >= 0:
                nxt.append((px, py))
            if (cp > 0 > cq) or (cp < 0 < cq):
                t = cp / (cp - cq)
                nxt.append((px + t * (qx - px), py + t * (qy - py)))
        out = nxt
    return out


def _overlap_area(a: list[Point2], b: list[Point2]) -> float:
    inter = _clip_convex(a, b)
    if len(inter) < 3:
        return 0.0
    return abs(_signed_area2(inter)) * 0.5


class NavMesh:
    """Immutable convex-cell mesh with portal adjacency and flat arrays for
    the geometry kernels."""

    def __init__(self, polygons: list[list[Point2]], portals: list[Portal]):
        self.polygons: tuple[tuple[Point2, ...], ...] = tuple(
            tuple((float(x), float(y)) for x, y in poly) for poly in polygons
        )
        self.portals: tuple[Portal, ...] = tuple(portals)
        self.neighbors: tuple[tuple[int, ...], ...] = self._adjacency()
        self.centroids: tuple[Point2, ...] = tuple(
            (sum(p[0] for p in poly) / len(poly), sum(p[1] for p in poly) / len(poly))
            for poly in self.polygons
        )
        offsets = [0]
        vx: list[float] = []
        vy: list[float] = []
        for poly in self.polygons:
            for x, y in poly:
                vx.append(x)
                vy.append(y)
            offsets.append(len(vx))
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self._vx = np.asarray(vx, dtype=np.float64)
        self._vy = np.asarray(vy, dtype=np.float64)

    def _adjacency(self) -> tuple[tuple[int, ...], ...]:
        nb: list[list[int]] = [[] for _ in self.polygons]
        for idx, portal in enumerate(self.portals):
            nb[portal.poly_a].append(idx)
            nb[portal.poly_b].append(idx)
        return tuple(tuple(v) for v in nb)

    def locate(self, p: Point2) -> int | None:
        """Lowest-index polygon containing p (boundary inclusive), or None."""
        k = kernels.point_in_mesh(self._offsets, self._vx, self._vy, p[0], p[1])
        return None if k < 0 else int(k)

    def contains_segment(self, a: Point2, b: Point2) -> bool:
        return bool(
            kernels.segment_in_mesh(self._offsets, self._vx, self._vy, a[0], a[1], b[0], b[1])
        )


def build_navmesh(polygons: list[list[Point2]]) -> NavMesh:
    """Validate a polygon soup and derive the portal graph.

    Portals are ordered by (min polygon index, max polygon index, edge
    endpoints) so mesh construction is reproducible from the same input.
    """
    if not polygons:
        raise ValueError("empty polygon list")
    if len(polygons) > MAX_POLYGONS:
        raise ValueError(f"more than {MAX_POLYGONS} polygons")
    polys = [[(float(x), float(y)) for x, y in poly] for poly in polygons]
    for idx, poly in enumerate(polys):
        _validate_polygon(poly, idx)

    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if _overlap_area(polys[i], polys[j]) > 1e-9:
                raise MeshBuildError(f"interior overlaps polygon {i}", j)

    def snap(p: Point2) -> tuple[float, float]:
        return (round(p[0], 6), round(p[1], 6))

    edges: dict[tuple, list[tuple[int, Point2, Point2]]] = {}
    for idx, poly in enumerate(polys):
        n = len(poly)
        for i in range(n):
            p, q = poly[i], poly[(i + 1) % n]
            key = tuple(sorted((snap(p), snap(q))))
            edges.setdefault(key, []).append((idx, p, q))

    portals: list[Portal] = []
    for key, owners in edges.items():
        if len(owners) > 2:
            raise MeshBuildError(
                f"edge {key} shared by {len(owners)} polygons", owners[-1][0]
            )
        if len(owners) == 2:
            (ia, pa, qa), (ib, _, _) = owners
            lo, hi = (ia, ib) if ia < ib else (ib, ia)
            p, q = (pa, qa) if pa <= qa else (qa, pa)
            portals.append(Portal(lo, hi, p, q))
    portals.sort(key=lambda t: (t.poly_a, t.poly_b, t.p, t.q))
    return NavMesh(polys, portals)


def segment_clear(
    mesh: NavMesh,
    a: Point2,
    b: Point2,
    obstacles: list[ObstacleDisc],
    clearance: float,
) -> bool:
    """True iff a->b stays inside the mesh and keeps at least ``clearance``
    from every obstacle disc surface (1e-6 m slack for float noise)."""
    if not mesh.contains_segment(a, b):
        return False
    if not obstacles:
        return True
    cx, cy, cr = flatten_discs(obstacles)
    gap = kernels.segment_min_gap_discs(a[0], a[1], b[0], b[1], cx, cy, cr, len(obstacles))
    return gap >= clearance - 1e-6


def flatten_discs(obstacles: list[ObstacleDisc]):
    n = len(obstacles)
    cx = np.empty(n, dtype=np.float64)
    cy = np.empty(n, dtype=np.float64)
    cr = np.empty(n, dtype=np.float64)
    for i, d in enumerate(obstacles):
        cx[i] = d.center[0]
        cy[i] = d.center[1]
        cr[i] = d.radius
    return cx, cy, cr
