"""Pure-Python reference kernels for the per-tick hot loops.

The compiled extension (``_kernelsc``) implements the same functions with
identical arithmetic, term for term, so that both backends produce
bit-identical simulations.  Keep every expression here in the exact order
used by the .pyx twin.

Mesh layout shared by the geometry kernels: ``offsets`` has ``npoly + 1``
entries indexing into the flat vertex arrays ``vx``/``vy``; polygon ``k``
owns vertices ``offsets[k] .. offsets[k+1]-1`` in counterclockwise order.
"""

from __future__ import annotations

import math

BACKEND = "python"

# Boundary tolerance: a point within 1e-9 m outside an edge still counts as
# inside, so funnel paths that hug corners validate cleanly.
EDGE_EPS = 1e-9


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def point_in_mesh(offsets, vx, vy, x: float, y: float) -> int:
    """Index of the first (lowest) polygon containing (x, y), else -1.

    Boundary points count as inside, so shared edges resolve to the lower
    polygon index.
    """
    npoly = len(offsets) - 1
    for k in range(npoly):
        lo = offsets[k]
        hi = offsets[k + 1]
        inside = True
        j = hi - 1
        for i in range(lo, hi):
            x1 = vx[j]
            y1 = vy[j]
            x2 = vx[i]
            y2 = vy[i]
            ex = x2 - x1
            ey = y2 - y1
            cross = ex * (y - y1) - ey * (x - x1)
            elen = math.sqrt(ex * ex + ey * ey)
            if cross < -EDGE_EPS * elen:
                inside = False
                break
            j = i
        if inside:
            return k
    return -1


def segment_in_mesh(offsets, vx, vy, ax: float, ay: float, bx: float, by: float) -> bool:
    """True iff the whole segment a->b lies inside the union of polygons."""
    npoly = len(offsets) - 1
    intervals = []
    for k in range(npoly):
        lo = offsets[k]
        hi = offsets[k + 1]
        t0 = 0.0
        t1 = 1.0
        j = hi - 1
        empty = False
        for i in range(lo, hi):
            x1 = vx[j]
            y1 = vy[j]
            x2 = vx[i]
            y2 = vy[i]
            ex = x2 - x1
            ey = y2 - y1
            elen = math.sqrt(ex * ex + ey * ey)
            eps = EDGE_EPS * elen
            ca = ex * (ay - y1) - ey * (ax - x1)
            cb = ex * (by - y1) - ey * (bx - x1)
            if ca >= -eps and cb >= -eps:
                j = i
                continue
            if ca < -eps and cb < -eps:
                empty = True
                break
            ts = (-eps - ca) / (cb - ca)
            if ca < -eps:
                if ts > t0:
                    t0 = ts
            else:
                if ts < t1:
                    t1 = ts
            if t0 > t1:
                empty = True
                break
            j = i
        if not empty and t0 <= t1 + 1e-12:
            intervals.append((t0, t1))
    if not intervals:
        return False
    intervals.sort()
    covered = 0.0
    for t0, t1 in intervals:
        if t0 > covered + 1e-9:
            return False
        if t1 > covered:
            covered = t1
        if covered >= 1.0 - 1e-9:
            return True
    return covered >= 1.0 - 1e-9


def segment_min_gap_discs(ax, ay, bx, by, cx, cy, cr, n: int) -> float:
    """Min over discs of (distance from segment to disc center) - radius."""
    best = math.inf
    dx = bx - ax
    dy = by - ay
    dd = dx * dx + dy * dy
    for i in range(n):
        px = cx[i] - ax
        py = cy[i] - ay
        if dd > 0.0:
            t = (px * dx + py * dy) / dd
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        qx = px - t * dx
        qy = py - t * dy
        gap = math.sqrt(qx * qx + qy * qy) - cr[i]
        if gap < best:
            best = gap
    return best


def point_min_gap_discs(x, y, cx, cy, cr, n: int) -> float:
    best = math.inf
    for i in range(n):
        dx = cx[i] - x
        dy = cy[i] - y
        gap = math.sqrt(dx * dx + dy * dy) - cr[i]
        if gap < best:
            best = gap
    return best


def pair_contact_time(dx, dy, dvx, dvy, rsum: float, horizon: float) -> float:
    """Earliest t in [0, horizon] at which two constant-velocity discs with
    center offset (dx, dy), relative velocity (dvx, dvy) and radius sum
    ``rsum`` touch; -1.0 if none.  Already-overlapping pairs report 0."""
    c = dx * dx + dy * dy - rsum * rsum
    if c <= 0.0:
        return 0.0
    a = dvx * dvx + dvy * dvy
    b = dx * dvx + dy * dvy
    if a <= 0.0:
        return -1.0
    disc = b * b - a * c
    if disc < 0.0:
        return -1.0
    t = (-b - math.sqrt(disc)) / a
    if 0.0 < t <= horizon:
        return t
    return -1.0


def sweep_conflicts(px, py, vx, vy, rad, n_agents: int, n_total: int,
                    horizon: float, out_t, out_j) -> None:
    """For each agent i < n_agents, earliest swept-disc contact against every
    other entity (agents plus trailing non-agent entities such as the
    player).  Writes contact time into out_t[i] (-1 if none) and the other
    entity's index into out_j[i].  Ties prefer the lower index."""
    for i in range(n_agents):
        best_t = -1.0
        best_j = -1
        for j in range(n_total):
            if j == i:
                continue
            t = pair_contact_time(px[j] - px[i], py[j] - py[i],
                                  vx[j] - vx[i], vy[j] - vy[i],
                                  rad[i] + rad[j], horizon)
            if t >= 0.0 and (best_j < 0 or t < best_t):
                best_t = t
                best_j = j
        out_t[i] = best_t
        out_j[i] = best_j


def pair_min_stats(px, py, n_agents: int, plx: float, ply: float) -> tuple[float, float]:
    """(min agent-agent center distance, min agent-player center distance)."""
    best_aa = math.inf
    best_ap = math.inf
    for i in range(n_agents):
        dx = px[i] - plx
        dy = py[i] - ply
        d = math.sqrt(dx * dx + dy * dy)
        if d < best_ap:
            best_ap = d
        for j in range(i + 1, n_agents):
            ddx = px[j] - px[i]
            ddy = py[j] - py[i]
            d2 = math.sqrt(ddx * ddx + ddy * ddy)
            if d2 < best_aa:
                best_aa = d2
    return best_aa, best_ap


def integrate_steps(px, py, nx, ny, rad, n: int, plx: float, ply: float,
                    pr: float, out_ok) -> None:
    """Sequential collision-clamped integration in ascending index order.

    Agent i's step to (nx[i], ny[i]) is cancelled when it would bring its
    disc into overlap with any other agent (lower indices already moved)
    or the player disc.  px/py are updated in place; out_ok[i] records
    whether the step was taken.  Exact touching is allowed.
    """
    for i in range(n):
        cx = nx[i]
        cy = ny[i]
        ok = 1
        dxp = cx - plx
        dyp = cy - ply
        rs = rad[i] + pr
        if dxp * dxp + dyp * dyp < rs * rs:
            ok = 0
        if ok:
            for j in range(n):
                if j == i:
                    continue
                dx = cx - px[j]
                dy = cy - py[j]
                rs = rad[i] + rad[j]
                if dx * dx + dy * dy < rs * rs:
                    ok = 0
                    break
        if ok:
            px[i] = cx
            py[i] = cy
        out_ok[i] = ok
