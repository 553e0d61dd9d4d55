# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of kernels_py.  Same arithmetic, same order of operations,
so simulations are bit-identical across backends (see test_kernels)."""

from libc.math cimport sqrt, INFINITY

BACKEND = "compiled"

cdef double EDGE_EPS = 1e-9


def fnv1a64(const unsigned char[:] data):
    cdef unsigned long long h = 0xCBF29CE484222325ULL
    cdef Py_ssize_t i
    for i in range(data.shape[0]):
        h = (h ^ <unsigned long long>data[i]) * 0x100000001B3ULL
    return h


def point_in_mesh(const long long[:] offsets, const double[:] vx, const double[:] vy,
                  double x, double y):
    cdef Py_ssize_t npoly = offsets.shape[0] - 1
    cdef Py_ssize_t k, i, lo, hi, j
    cdef double x1, y1, x2, y2, ex, ey, cross, elen
    cdef bint inside
    for k in range(npoly):
        lo = <Py_ssize_t>offsets[k]
        hi = <Py_ssize_t>offsets[k + 1]
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
            elen = sqrt(ex * ex + ey * ey)
            if cross < -EDGE_EPS * elen:
                inside = False
                break
            j = i
        if inside:
            return k
    return -1


def segment_in_mesh(const long long[:] offsets, const double[:] vx, const double[:] vy,
                    double ax, double ay, double bx, double by):
    cdef Py_ssize_t npoly = offsets.shape[0] - 1
    cdef Py_ssize_t k, i, lo, hi, j, m, n_iv, p
    cdef double x1, y1, x2, y2, ex, ey, elen, eps, ca, cb, ts, t0, t1, covered
    cdef bint empty
    cdef double it0[512]
    cdef double it1[512]
    n_iv = 0
    for k in range(npoly):
        lo = <Py_ssize_t>offsets[k]
        hi = <Py_ssize_t>offsets[k + 1]
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
            elen = sqrt(ex * ex + ey * ey)
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
        if not empty and t0 <= t1 + 1e-12 and n_iv < 512:
            it0[n_iv] = t0
            it1[n_iv] = t1
            n_iv += 1
    if n_iv == 0:
        return False
    # insertion sort by (t0, t1); coverage is order-insensitive for ties
    for m in range(1, n_iv):
        t0 = it0[m]
        t1 = it1[m]
        p = m - 1
        while p >= 0 and (it0[p] > t0 or (it0[p] == t0 and it1[p] > t1)):
            it0[p + 1] = it0[p]
            it1[p + 1] = it1[p]
            p -= 1
        it0[p + 1] = t0
        it1[p + 1] = t1
    covered = 0.0
    for m in range(n_iv):
        if it0[m] > covered + 1e-9:
            return False
        if it1[m] > covered:
            covered = it1[m]
        if covered >= 1.0 - 1e-9:
            return True
    return covered >= 1.0 - 1e-9


def segment_min_gap_discs(double ax, double ay, double bx, double by,
                          const double[:] cx, const double[:] cy, const double[:] cr,
                          Py_ssize_t n):
    cdef double best = INFINITY
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double dd = dx * dx + dy * dy
    cdef double px, py, t, qx, qy, gap
    cdef Py_ssize_t i
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
        gap = sqrt(qx * qx + qy * qy) - cr[i]
        if gap < best:
            best = gap
    return best


def point_min_gap_discs(double x, double y,
                        const double[:] cx, const double[:] cy, const double[:] cr,
                        Py_ssize_t n):
    cdef double best = INFINITY
    cdef double dx, dy, gap
    cdef Py_ssize_t i
    for i in range(n):
        dx = cx[i] - x
        dy = cy[i] - y
        gap = sqrt(dx * dx + dy * dy) - cr[i]
        if gap < best:
            best = gap
    return best


cdef inline double _pair_contact_time(double dx, double dy, double dvx, double dvy,
                                      double rsum, double horizon):
    cdef double c = dx * dx + dy * dy - rsum * rsum
    cdef double a, b, disc, t
    if c <= 0.0:
        return 0.0
    a = dvx * dvx + dvy * dvy
    b = dx * dvx + dy * dvy
    if a <= 0.0:
        return -1.0
    disc = b * b - a * c
    if disc < 0.0:
        return -1.0
    t = (-b - sqrt(disc)) / a
    if 0.0 < t <= horizon:
        return t
    return -1.0


def pair_contact_time(double dx, double dy, double dvx, double dvy,
                      double rsum, double horizon):
    return _pair_contact_time(dx, dy, dvx, dvy, rsum, horizon)


def sweep_conflicts(const double[:] px, const double[:] py,
                    const double[:] vx, const double[:] vy, const double[:] rad,
                    Py_ssize_t n_agents, Py_ssize_t n_total, double horizon,
                    double[:] out_t, long long[:] out_j):
    cdef Py_ssize_t i, j
    cdef double best_t, t
    cdef long long best_j
    for i in range(n_agents):
        best_t = -1.0
        best_j = -1
        for j in range(n_total):
            if j == i:
                continue
            t = _pair_contact_time(px[j] - px[i], py[j] - py[i],
                                   vx[j] - vx[i], vy[j] - vy[i],
                                   rad[i] + rad[j], horizon)
            if t >= 0.0 and (best_j < 0 or t < best_t):
                best_t = t
                best_j = j
        out_t[i] = best_t
        out_j[i] = best_j


def pair_min_stats(const double[:] px, const double[:] py, Py_ssize_t n_agents,
                   double plx, double ply):
    cdef double best_aa = INFINITY
    cdef double best_ap = INFINITY
    cdef double dx, dy, d, ddx, ddy, d2
    cdef Py_ssize_t i, j
    for i in range(n_agents):
        dx = px[i] - plx
        dy = py[i] - ply
        d = sqrt(dx * dx + dy * dy)
        if d < best_ap:
            best_ap = d
        for j in range(i + 1, n_agents):
            ddx = px[j] - px[i]
            ddy = py[j] - py[i]
            d2 = sqrt(ddx * ddx + ddy * ddy)
            if d2 < best_aa:
                best_aa = d2
    return best_aa, best_ap


def integrate_steps(double[:] px, double[:] py,
                    const double[:] nx, const double[:] ny,
                    const double[:] rad, Py_ssize_t n,
                    double plx, double ply, double pr,
                    long long[:] out_ok):
    cdef Py_ssize_t i, j
    cdef double cx, cy, dx, dy, dxp, dyp, rs
    cdef long long ok
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
