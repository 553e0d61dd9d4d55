"""Geometry kernel unit tests plus bit-for-bit parity between the compiled
extension and the pure-Python fallback."""

import math
import random

import numpy as np
import pytest

import scenesim.kernels_py as kpy
from scenesim import kernels

try:
    from scenesim import _kernelsc as kc

    HAVE_COMPILED = True
except ImportError:
    kc = None
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")

# Two unit squares sharing the edge x=1.
OFFSETS = np.array([0, 4, 8], dtype=np.int64)
VX = np.array([0, 1, 1, 0, 1, 2, 2, 1], dtype=np.float64)
VY = np.array([0, 0, 1, 1, 0, 0, 1, 1], dtype=np.float64)


def test_point_in_mesh_interior_and_outside():
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 0.5, 0.5) == 0
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 1.5, 0.5) == 1
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 2.5, 0.5) == -1
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 0.5, -0.1) == -1


def test_point_in_mesh_boundary_inclusive_lowest_index():
    # Shared edge belongs to both polygons; the scan reports the lower index.
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 1.0, 0.5) == 0
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 0.0, 0.0) == 0
    assert kpy.point_in_mesh(OFFSETS, VX, VY, 2.0, 1.0) == 1


def test_segment_in_mesh_spans_portal():
    assert kpy.segment_in_mesh(OFFSETS, VX, VY, 0.2, 0.5, 1.8, 0.5)
    assert not kpy.segment_in_mesh(OFFSETS, VX, VY, 0.2, 0.5, 2.2, 0.5)
    assert kpy.segment_in_mesh(OFFSETS, VX, VY, 0.0, 0.0, 2.0, 1.0)
    assert not kpy.segment_in_mesh(OFFSETS, VX, VY, -0.1, 0.5, 0.5, 0.5)


def test_segment_in_mesh_gap_between_cells():
    # Two squares separated by a 0.5 wide void.
    offsets = np.array([0, 4, 8], dtype=np.int64)
    vx = np.array([0, 1, 1, 0, 1.5, 2.5, 2.5, 1.5], dtype=np.float64)
    vy = np.array([0, 0, 1, 1, 0, 0, 1, 1], dtype=np.float64)
    assert not kpy.segment_in_mesh(offsets, vx, vy, 0.5, 0.5, 2.0, 0.5)
    assert kpy.segment_in_mesh(offsets, vx, vy, 1.6, 0.2, 2.4, 0.8)


def test_segment_min_gap_discs_matches_closed_form():
    cx = np.array([0.0])
    cy = np.array([1.0])
    cr = np.array([0.25])
    gap = kpy.segment_min_gap_discs(-2.0, 0.0, 2.0, 0.0, cx, cy, cr, 1)
    assert gap == pytest.approx(0.75, abs=1e-12)
    # Closest point beyond the segment end.
    gap = kpy.segment_min_gap_discs(1.0, 0.0, 2.0, 0.0, cx, cy, cr, 1)
    assert gap == pytest.approx(math.sqrt(2.0) - 0.25, abs=1e-12)


def test_point_min_gap_discs():
    cx = np.array([0.0, 3.0])
    cy = np.array([0.0, 0.0])
    cr = np.array([0.5, 1.0])
    assert kpy.point_min_gap_discs(1.5, 0.0, cx, cy, cr, 2) == pytest.approx(0.5)
    # Inside a disc the gap goes negative.
    assert kpy.point_min_gap_discs(3.0, 0.0, cx, cy, cr, 2) == pytest.approx(-1.0)


def test_pair_contact_time_head_on():
    # Closing at 2 m/s from 2 m apart with combined radius 0.6.
    t = kpy.pair_contact_time(2.0, 0.0, -2.0, 0.0, 0.6, 1.5)
    assert t == pytest.approx((2.0 - 0.6) / 2.0, abs=1e-12)


def test_pair_contact_time_cases():
    assert kpy.pair_contact_time(0.1, 0.0, 0.0, 0.0, 0.6, 1.5) == 0.0  # overlapping
    assert kpy.pair_contact_time(2.0, 0.0, 1.0, 0.0, 0.6, 1.5) == -1.0  # receding
    assert kpy.pair_contact_time(10.0, 0.0, -1.0, 0.0, 0.6, 1.5) == -1.0  # too far
    # Passing by with a miss distance above the radius sum.
    assert kpy.pair_contact_time(2.0, 1.0, -2.0, 0.0, 0.6, 1.5) == -1.0


def test_sweep_conflicts_brute_force_agreement():
    rng = random.Random(31337)
    n_agents, n_total = 12, 13
    for _ in range(50):
        px = np.array([rng.uniform(-5, 5) for _ in range(n_total)])
        py = np.array([rng.uniform(-5, 5) for _ in range(n_total)])
        vx = np.array([rng.uniform(-2, 2) for _ in range(n_total)])
        vy = np.array([rng.uniform(-2, 2) for _ in range(n_total)])
        rad = np.array([0.3] * n_total)
        out_t = np.empty(n_agents)
        out_j = np.empty(n_agents, dtype=np.int64)
        kpy.sweep_conflicts(px, py, vx, vy, rad, n_agents, n_total, 1.5, out_t, out_j)
        for i in range(n_agents):
            best_t, best_j = math.inf, -1
            for j in range(n_total):
                if j == i:
                    continue
                t = kpy.pair_contact_time(
                    px[j] - px[i], py[j] - py[i],
                    vx[j] - vx[i], vy[j] - vy[i],
                    rad[i] + rad[j], 1.5,
                )
                if t >= 0.0 and t < best_t:
                    best_t, best_j = t, j
            if best_j < 0:
                assert out_j[i] == -1
            else:
                assert out_j[i] == best_j
                assert out_t[i] == best_t


def test_pair_min_stats():
    px = np.array([0.0, 1.0, 5.0])
    py = np.array([0.0, 0.0, 0.0])
    aa, ap = kpy.pair_min_stats(px, py, 3, 5.0, 1.0)
    assert aa == pytest.approx(1.0)
    assert ap == pytest.approx(1.0)


def test_fnv1a64_matches_rng_module():
    from scenesim.rng import fnv1a64

    for data in (b"", b"a", b"tick", bytes(range(64))):
        assert kpy.fnv1a64(data) == fnv1a64(data)


@needs_compiled
def test_backend_selector_prefers_compiled():
    assert kernels.BACKEND == "compiled"
    assert kernels.get_backend("python").BACKEND == "python"
    assert kernels.get_backend("compiled").BACKEND == "compiled"


@needs_compiled
def test_parity_point_and_segment_queries():
    rng = random.Random(7)
    for _ in range(3000):
        x, y = rng.uniform(-1, 3), rng.uniform(-1, 2)
        assert kpy.point_in_mesh(OFFSETS, VX, VY, x, y) == kc.point_in_mesh(
            OFFSETS, VX, VY, x, y
        )
    for _ in range(3000):
        ax, ay, bx, by = (rng.uniform(-0.5, 2.5) for _ in range(4))
        assert kpy.segment_in_mesh(OFFSETS, VX, VY, ax, ay, bx, by) == kc.segment_in_mesh(
            OFFSETS, VX, VY, ax, ay, bx, by
        )


@needs_compiled
def test_parity_disc_gaps_bit_exact():
    rng = random.Random(11)
    for _ in range(2000):
        seg = [rng.uniform(-5, 5) for _ in range(4)]
        n = rng.randint(1, 8)
        cx = np.array([rng.uniform(-5, 5) for _ in range(n)])
        cy = np.array([rng.uniform(-5, 5) for _ in range(n)])
        cr = np.array([rng.uniform(0.05, 2.0) for _ in range(n)])
        a = kpy.segment_min_gap_discs(*seg, cx, cy, cr, n)
        b = kc.segment_min_gap_discs(*seg, cx, cy, cr, n)
        assert a == b  # exact, not approx
        a = kpy.point_min_gap_discs(seg[0], seg[1], cx, cy, cr, n)
        b = kc.point_min_gap_discs(seg[0], seg[1], cx, cy, cr, n)
        assert a == b


@needs_compiled
def test_parity_contact_and_sweep_bit_exact():
    rng = random.Random(13)
    for _ in range(5000):
        args = [rng.uniform(-4, 4) for _ in range(4)]
        assert kpy.pair_contact_time(*args, 0.6, 1.5) == kc.pair_contact_time(
            *args, 0.6, 1.5
        )
    for _ in range(50):
        n_total = rng.randint(2, 20)
        n_agents = n_total - 1
        px = np.array([rng.uniform(-10, 10) for _ in range(n_total)])
        py = np.array([rng.uniform(-10, 10) for _ in range(n_total)])
        vx = np.array([rng.uniform(-3, 3) for _ in range(n_total)])
        vy = np.array([rng.uniform(-3, 3) for _ in range(n_total)])
        rad = np.array([rng.uniform(0.1, 0.5) for _ in range(n_total)])
        t1 = np.empty(n_agents)
        j1 = np.empty(n_agents, dtype=np.int64)
        t2 = np.empty(n_agents)
        j2 = np.empty(n_agents, dtype=np.int64)
        kpy.sweep_conflicts(px, py, vx, vy, rad, n_agents, n_total, 1.5, t1, j1)
        kc.sweep_conflicts(px, py, vx, vy, rad, n_agents, n_total, 1.5, t2, j2)
        assert (t1 == t2).all() and (j1 == j2).all()
        s1 = kpy.pair_min_stats(px, py, n_agents, px[-1], py[-1])
        s2 = kc.pair_min_stats(px, py, n_agents, px[-1], py[-1])
        assert s1 == s2


def test_integrate_steps_blocks_overlap():
    # Agent 0 tries to step onto agent 1; the step must be cancelled.
    px = np.array([0.0, 1.0])
    py = np.array([0.0, 0.0])
    nx = np.array([0.5, 1.0])
    ny = np.array([0.0, 0.0])
    rad = np.array([0.3, 0.3])
    ok = np.empty(2, dtype=np.int64)
    kpy.integrate_steps(px, py, nx, ny, rad, 2, 50.0, 50.0, 0.3, ok)
    assert list(ok) == [0, 1]
    assert px[0] == 0.0  # cancelled
    # A step to exact touching distance is allowed.
    nx = np.array([0.4, 1.0])
    kpy.integrate_steps(px, py, nx, ny, rad, 2, 50.0, 50.0, 0.3, ok)
    assert ok[0] == 1 and px[0] == 0.4


def test_integrate_steps_blocks_player_overlap():
    px = np.array([0.0])
    py = np.array([0.0])
    nx = np.array([0.5])
    ny = np.array([0.0])
    rad = np.array([0.3])
    ok = np.empty(1, dtype=np.int64)
    kpy.integrate_steps(px, py, nx, ny, rad, 1, 1.0, 0.0, 0.3, ok)
    assert ok[0] == 0 and px[0] == 0.0


@needs_compiled
def test_parity_integrate_steps():
    rng = random.Random(23)
    for _ in range(300):
        n = rng.randint(1, 12)
        px = np.array([rng.uniform(-3, 3) for _ in range(n)])
        py = np.array([rng.uniform(-3, 3) for _ in range(n)])
        nx = px + np.array([rng.uniform(-0.5, 0.5) for _ in range(n)])
        ny = py + np.array([rng.uniform(-0.5, 0.5) for _ in range(n)])
        rad = np.array([rng.uniform(0.1, 0.4) for _ in range(n)])
        p1, q1 = px.copy(), py.copy()
        p2, q2 = px.copy(), py.copy()
        o1 = np.empty(n, dtype=np.int64)
        o2 = np.empty(n, dtype=np.int64)
        kpy.integrate_steps(p1, q1, nx, ny, rad, n, 0.0, 0.0, 0.3, o1)
        kc.integrate_steps(p2, q2, nx, ny, rad, n, 0.0, 0.0, 0.3, o2)
        assert (p1 == p2).all() and (q1 == q2).all() and (o1 == o2).all()


@needs_compiled
def test_parity_fnv():
    rng = random.Random(17)
    for _ in range(200):
        data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        assert kpy.fnv1a64(data) == kc.fnv1a64(data)
