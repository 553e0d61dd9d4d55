"""Point-to-point planning on a navmesh around disc obstacles.

A* over the portal graph picks a polygon corridor (edge cost measured
through portal midpoints, ties broken on lowest f, then g, then polygon
index), a funnel pass pulls the corridor taut, and obstacle discs crossed
by the taut path get detours spliced in: the path leaves toward a tangent
point, rounds the disc with an 8-segment arc, and rejoins at the opposite
tangent.  Arc points sit at rho / cos(step/2) so every chord still clears
the disc.  When tangent detours cannot be validated (walls, disc
clusters), a small graph over ring points of nearby discs is searched;
when that fails too, the portal nearest the offending disc is pruned and
A* reruns on the reduced graph.
"""

from __future__ import annotations

import heapq
import math

from . import kernels
from .geometry import NavMesh, ObstacleDisc, Path, Point2, flatten_discs

ARC_SEGMENTS = 8
RING_POINTS = 16
PASS_MARGIN = 1e-3
GAP_SLACK = 1e-6
MAX_REPAIR_PASSES = 40
MAX_PRUNE_RETRIES = 8
RING_DISC_CAP = 6
RIGHT_BIAS_RATIO = 0.9  # take the right-side detour only if this much shorter

TWO_PI = 2.0 * math.pi


class PathError(Exception):
    pass


class OutsideMeshError(PathError):
    pass


class UnreachableError(PathError):
    pass


class _RepairFailed(Exception):
    def __init__(self, disc_center: Point2):
        self.disc_center = disc_center


def _d(a: Point2, b: Point2) -> float:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    return math.sqrt(dx * dx + dy * dy)


def _cross(a: Point2, b: Point2, c: Point2) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _polyline_length(pts: list[Point2]) -> float:
    return sum(_d(pts[i], pts[i + 1]) for i in range(len(pts) - 1))


def _astar(mesh: NavMesh, start: Point2, goal: Point2, sp: int, gp: int,
           blocked: set[int]):
    """Corridor of polygon indices and the portal chain between them, or
    (None, None) when the portal graph does not connect start to goal."""
    if sp == gp:
        return [sp], []
    dist = {sp: 0.0}
    entry = {sp: start}
    came: dict[int, tuple[int, int]] = {}
    heap = [(_d(start, goal), 0.0, sp)]
    closed: set[int] = set()
    while heap:
        _f, g, poly = heapq.heappop(heap)
        if poly in closed:
            continue
        if poly == gp:
            chain: list[int] = []
            polys = [poly]
            cur = poly
            while cur != sp:
                prev, gi = came[cur]
                chain.append(gi)
                polys.append(prev)
                cur = prev
            chain.reverse()
            polys.reverse()
            return polys, chain
        closed.add(poly)
        ep = entry[poly]
        for gi in mesh.neighbors[poly]:
            if gi in blocked:
                continue
            portal = mesh.portals[gi]
            nxt = portal.poly_b if portal.poly_a == poly else portal.poly_a
            if nxt in closed:
                continue
            mid = portal.midpoint
            ng = g + _d(ep, mid)
            if ng < dist.get(nxt, math.inf):
                dist[nxt] = ng
                entry[nxt] = mid
                came[nxt] = (poly, gi)
                heapq.heappush(heap, (ng + _d(mid, goal), ng, nxt))
    return None, None


def _oriented_gates(mesh: NavMesh, polys: list[int], chain: list[int]):
    """Portal endpoints as (left, right) pairs relative to travel order."""
    gates: list[tuple[Point2, Point2]] = []
    for k, gi in enumerate(chain):
        portal = mesh.portals[gi]
        dx = mesh.centroids[polys[k + 1]][0] - mesh.centroids[polys[k]][0]
        dy = mesh.centroids[polys[k + 1]][1] - mesh.centroids[polys[k]][1]
        mx, my = portal.midpoint
        sp = dx * (portal.p[1] - my) - dy * (portal.p[0] - mx)
        sq = dx * (portal.q[1] - my) - dy * (portal.q[0] - mx)
        if sp >= sq:
            gates.append((portal.p, portal.q))
        else:
            gates.append((portal.q, portal.p))
    return gates


def _funnel(start: Point2, goal: Point2, gates) -> list[Point2]:
    pts = list(gates) + [(goal, goal)]
    path = [start]
    apex = pl = pr = start
    ai = li = ri = 0
    i = 0
    n = len(pts)
    while i < n:
        left, right = pts[i]
        if _cross(apex, pr, right) >= 0.0:
            if apex == pr or _cross(apex, pl, right) < 0.0:
                pr, ri = right, i
            else:
                path.append(pl)
                apex = pl
                ai = li
                pl = pr = apex
                li = ri = ai
                i = ai + 1
                continue
        if _cross(apex, pl, left) <= 0.0:
            if apex == pl or _cross(apex, pr, left) > 0.0:
                pl, li = left, i
            else:
                path.append(pr)
                apex = pr
                ai = ri
                pl = pr = apex
                li = ri = ai
                i = ai + 1
                continue
        i += 1
    path.append(goal)
    out = [path[0]]
    for p in path[1:]:
        if p != out[-1]:
            out.append(p)
    return out


def _entry_t(a: Point2, b: Point2, cx: float, cy: float, radius: float):
    """Parameter in [0, 1] where segment a->b first reaches the circle, or
    None if it stays outside."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    fx, fy = a[0] - cx, a[1] - cy
    alpha = dx * dx + dy * dy
    gamma = fx * fx + fy * fy - radius * radius
    if alpha == 0.0:
        return 0.0 if gamma < 0.0 else None
    beta = fx * dx + fy * dy
    disc = beta * beta - alpha * gamma
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    t0 = (-beta - root) / alpha
    t1 = (-beta + root) / alpha
    if t1 < 0.0 or t0 > 1.0:
        return None
    return max(t0, 0.0)


class _Field:
    """Obstacle set flattened once per query."""

    def __init__(self, obstacles: list[ObstacleDisc], clearance: float):
        self.obstacles = obstacles
        self.clearance = clearance
        self.n = len(obstacles)
        if self.n:
            self.cx, self.cy, self.cr = flatten_discs(obstacles)
        else:
            self.cx = self.cy = self.cr = None

    def segment_ok(self, mesh: NavMesh, a: Point2, b: Point2) -> bool:
        if not mesh.contains_segment(a, b):
            return False
        if not self.n:
            return True
        gap = kernels.segment_min_gap_discs(
            a[0], a[1], b[0], b[1], self.cx, self.cy, self.cr, self.n
        )
        return gap >= self.clearance - GAP_SLACK

    def point_gap(self, p: Point2) -> float:
        if not self.n:
            return math.inf
        return kernels.point_min_gap_discs(p[0], p[1], self.cx, self.cy, self.cr, self.n)

    def first_violation(self, wps: list[Point2]):
        """(segment index, disc index) of the earliest clearance violation."""
        if not self.n:
            return None
        thr = self.clearance - GAP_SLACK
        for si in range(len(wps) - 1):
            a, b = wps[si], wps[si + 1]
            gap = kernels.segment_min_gap_discs(
                a[0], a[1], b[0], b[1], self.cx, self.cy, self.cr, self.n
            )
            if gap < thr:
                best_t, best_i = None, None
                for di in range(self.n):
                    t = _entry_t(a, b, self.cx[di], self.cy[di], self.cr[di] + thr)
                    if t is not None and (best_t is None or t < best_t):
                        best_t, best_i = t, di
                if best_i is None:
                    best_i = 0
                return si, best_i
        return None


def _tangent_detour(a: Point2, b: Point2, cx: float, cy: float,
                    rho: float, side: int):
    """Arc polyline rounding the circle (center, rho) from the tangent off a
    to the tangent onto b.  side=-1 passes on the walker's left
    (clockwise), side=+1 on the right.  None if an anchor is too close."""
    da = _d(a, (cx, cy))
    db = _d(b, (cx, cy))
    if da <= rho or db <= rho:
        return None
    phi_a = math.atan2(a[1] - cy, a[0] - cx)
    phi_b = math.atan2(b[1] - cy, b[0] - cx)
    delta_a = math.acos(rho / da)
    delta_b = math.acos(rho / db)
    if side > 0:
        theta_a = phi_a + delta_a
        theta_b = phi_b - delta_b
        span = (theta_b - theta_a) % TWO_PI
    else:
        theta_a = phi_a - delta_a
        theta_b = phi_b + delta_b
        span = (theta_a - theta_b) % TWO_PI
    rho_out = rho / math.cos(span / (2.0 * ARC_SEGMENTS))
    pts = []
    for k in range(ARC_SEGMENTS + 1):
        th = theta_a + side * span * k / ARC_SEGMENTS
        pts.append((cx + rho_out * math.cos(th), cy + rho_out * math.sin(th)))
    return pts


def _ring(cx: float, cy: float, rho: float) -> list[Point2]:
    rho_out = rho / math.cos(math.pi / RING_POINTS)
    return [
        (cx + rho_out * math.cos(TWO_PI * k / RING_POINTS),
         cy + rho_out * math.sin(TWO_PI * k / RING_POINTS))
        for k in range(RING_POINTS)
    ]


def _seg_point_dist(a: Point2, b: Point2, p: Point2) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    den = dx * dx + dy * dy
    if den == 0.0:
        return _d(a, p)
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / den
    t = min(1.0, max(0.0, t))
    return _d((a[0] + t * dx, a[1] + t * dy), p)


def _ring_graph(mesh: NavMesh, field: _Field, a: Point2, b: Point2,
                focus_disc: int):
    """Shortest detour through ring points of discs near segment a->b.
    Returns the interior polyline (without a and b) or None."""
    scored = []
    for di, disc in enumerate(field.obstacles):
        gap = _seg_point_dist(a, b, disc.center) - disc.radius
        if gap <= field.clearance + 3.0 or di == focus_disc:
            scored.append((gap if di != focus_disc else -math.inf, di))
    scored.sort()
    keep = [di for _g, di in scored[:RING_DISC_CAP]]

    nodes = [a, b]
    for di in keep:
        disc = field.obstacles[di]
        rho = disc.radius + field.clearance + PASS_MARGIN
        for p in _ring(disc.center[0], disc.center[1], rho):
            if mesh.locate(p) is not None and field.point_gap(p) >= field.clearance - GAP_SLACK:
                nodes.append(p)
    n = len(nodes)
    if n < 3:
        return None

    edge_cache: dict[tuple[int, int], bool] = {}

    def ok(i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        hit = edge_cache.get(key)
        if hit is None:
            hit = field.segment_ok(mesh, nodes[key[0]], nodes[key[1]])
            edge_cache[key] = hit
        return hit

    dist = [math.inf] * n
    prev = [-1] * n
    dist[0] = 0.0
    heap = [(0.0, 0)]
    done = [False] * n
    while heap:
        dcur, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        if i == 1:
            break
        for j in range(n):
            if done[j] or not ok(i, j):
                continue
            nd = dcur + _d(nodes[i], nodes[j])
            if nd < dist[j]:
                dist[j] = nd
                prev[j] = i
                heapq.heappush(heap, (nd, j))
    if not done[1]:
        return None
    chain = []
    cur = 1
    while cur != 0:
        chain.append(cur)
        cur = prev[cur]
    chain.reverse()
    return [nodes[i] for i in chain[:-1]]


def _validate_candidate(mesh: NavMesh, field: _Field, a: Point2, b: Point2,
                        cand: list[Point2]) -> bool:
    pts = [a] + cand + [b]
    for i in range(len(pts) - 1):
        if not field.segment_ok(mesh, pts[i], pts[i + 1]):
            return False
    return True


def _fix_segment(mesh: NavMesh, field: _Field, wps: list[Point2],
                 si: int, di: int):
    """Splice a detour that clears disc di starting at segment si, widening
    the anchor pair when a neighbour waypoint is itself too close."""
    disc = field.obstacles[di]
    cx, cy = disc.center
    rho = disc.radius + field.clearance + PASS_MARGIN
    last = len(wps) - 1
    pairs = []
    for ii, jj in ((si, si + 1), (si - 1, si + 1), (si, si + 2), (si - 1, si + 2)):
        if 0 <= ii < jj <= last and (ii, jj) not in pairs:
            pairs.append((ii, jj))

    for ii, jj in pairs:
        a, b = wps[ii], wps[jj]
        picked = None
        left = _tangent_detour(a, b, cx, cy, rho, -1)
        if left is not None and _validate_candidate(mesh, field, a, b, left):
            picked = left
        right = _tangent_detour(a, b, cx, cy, rho, +1)
        if right is not None and _validate_candidate(mesh, field, a, b, right):
            if picked is None:
                picked = right
            else:
                len_l = _polyline_length([a] + left + [b])
                len_r = _polyline_length([a] + right + [b])
                if len_r < RIGHT_BIAS_RATIO * len_l:
                    picked = right
        if picked is not None:
            return wps[: ii + 1] + picked + wps[jj:]

    for ii, jj in pairs:
        cand = _ring_graph(mesh, field, wps[ii], wps[jj], di)
        if cand is not None:
            return wps[: ii + 1] + cand + wps[jj:]
    return None


def _repair(mesh: NavMesh, field: _Field, wps: list[Point2]) -> list[Point2]:
    for _ in range(MAX_REPAIR_PASSES):
        hit = field.first_violation(wps)
        if hit is None:
            return wps
        si, di = hit
        fixed = _fix_segment(mesh, field, wps, si, di)
        if fixed is None:
            raise _RepairFailed(field.obstacles[di].center)
        wps = fixed
    raise _RepairFailed(field.obstacles[di].center)


def find_path(mesh: NavMesh, start: Point2, goal: Point2,
              obstacles: list[ObstacleDisc] | tuple = (),
              clearance: float = 0.0) -> Path:
    """Shortest-effort walkable path from start to goal.

    Raises OutsideMeshError when an endpoint is not on the mesh and
    UnreachableError when obstacles or missing adjacency sever the goal.
    """
    start = (float(start[0]), float(start[1]))
    goal = (float(goal[0]), float(goal[1]))
    sp = mesh.locate(start)
    if sp is None:
        raise OutsideMeshError(f"start {start} outside mesh")
    gp = mesh.locate(goal)
    if gp is None:
        raise OutsideMeshError(f"goal {goal} outside mesh")

    field = _Field(list(obstacles), clearance)
    if field.point_gap(start) < clearance - GAP_SLACK:
        raise UnreachableError("start inside an obstacle disc")
    if field.point_gap(goal) < clearance - GAP_SLACK:
        raise UnreachableError("goal inside an obstacle disc")

    if start == goal:
        return Path((start,), 0.0)

    blocked: set[int] = set()
    for _attempt in range(MAX_PRUNE_RETRIES + 1):
        polys, chain = _astar(mesh, start, goal, sp, gp, blocked)
        if polys is None:
            raise UnreachableError("no corridor between start and goal")
        gates = _oriented_gates(mesh, polys, chain)
        wps = _funnel(start, goal, gates)
        try:
            wps = _repair(mesh, field, wps)
        except _RepairFailed as fail:
            if not chain:
                raise UnreachableError(
                    "obstacles block the goal within its polygon"
                ) from None
            fx, fy = fail.disc_center
            worst = min(
                chain,
                key=lambda gi: (_d(mesh.portals[gi].midpoint, (fx, fy)), gi),
            )
            blocked.add(worst)
            continue
        return Path(tuple(wps), _polyline_length(wps))
    raise UnreachableError("obstacles block every corridor to the goal")
