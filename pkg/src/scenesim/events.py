"""Timed stochastic events and scripted transports.

Planes cross overhead on a fixed 8 s traversal every 50-58 s, each subway
rail gets an 80 m train at a fixed 15 m/s every 35-50 s, cars loop on
authored lanes, and tennis-ball machines fire ballistic launches aimed at
the player's head.  All sampling is uniform over the quoted ranges and
every sampler takes its own PRNG stream so consuming one never perturbs
another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .rng import Stream

GRAVITY = 9.81
BALL_SPEED = 12.0
BALL_RADIUS = 0.033
HEAD_RADIUS = 0.12
HIT_DISTANCE = BALL_RADIUS + HEAD_RADIUS
DODGE_NEAR = 1.0
BALL_EXPIRE_RANGE = 60.0

PLANE_GAP = (50.0, 58.0)
PLANE_DURATION = 8.0
TRAIN_GAP = (35.0, 50.0)
TRAIN_SPEED = 15.0
TRAIN_LENGTH = 80.0

CAR_TABLE = (0, 4, 8, 16)
# City traffic pace tracks the Speed slider; the park's street keeps a
# fixed ambient pace.
CAR_SPEED_TABLE = (0.0, 4.0, 8.0, 12.0)
PARK_CAR_SPEED = 8.0


class LaunchError(Exception):
    pass


class UnreachableLaunchError(LaunchError):
    """Target beyond ballistic range at the fixed launch speed."""


class DegenerateLaunchError(LaunchError):
    """Target coincident with (or directly above) the machine."""


def next_plane_gap(rng: Stream) -> float:
    return rng.uniform(*PLANE_GAP)


def next_train_gap(rail: int, rng: Stream) -> float:
    if not 0 <= rail <= 3:
        raise ValueError(f"rail {rail} out of range")
    return rng.uniform(*TRAIN_GAP)


def ball_schedule(difficulty: int, rng: Stream) -> tuple[tuple[int, ...], tuple[float, float]]:
    """Active machine ids and the per-machine interval range for a
    difficulty level.  Levels 1-3 pick one machine at random, level 4 picks
    two distinct machines; level 0 always uses machine 0."""
    if not 0 <= difficulty <= 4:
        raise ValueError(f"difficulty {difficulty} out of range")
    if difficulty == 0:
        return (0,), (2.0, 4.0)
    if difficulty <= 3:
        return (rng.randint(3),), (3.0 + difficulty, 5.0 + difficulty)
    first = rng.randint(3)
    second = rng.randint(2)
    if second >= first:
        second += 1
    pair = (first, second) if first < second else (second, first)
    return pair, (3.0, 5.0)


def solve_ball_launch(machine, target, launch_speed: float = BALL_SPEED):
    """Velocity vector of magnitude launch_speed whose ballistic arc passes
    through target; the flatter of the two elevation solutions."""
    if launch_speed <= 0.0:
        raise ValueError("launch speed must be > 0")
    dx = target[0] - machine[0]
    dy = target[1] - machine[1]
    dz = target[2] - machine[2]
    d = math.sqrt(dx * dx + dy * dy)
    if d < 1e-9:
        raise DegenerateLaunchError("target has no horizontal offset from machine")
    v2 = launch_speed * launch_speed
    disc = v2 * v2 - GRAVITY * (GRAVITY * d * d + 2.0 * dz * v2)
    if disc < 0.0:
        raise UnreachableLaunchError(
            f"target {d:.2f} m out, {dz:+.2f} m up is beyond range at "
            f"{launch_speed} m/s"
        )
    tan_theta = (v2 - math.sqrt(disc)) / (GRAVITY * d)
    cos_theta = 1.0 / math.sqrt(1.0 + tan_theta * tan_theta)
    vh = launch_speed * cos_theta
    return (dx / d * vh, dy / d * vh, vh * tan_theta)


@dataclass
class BallFlight:
    machine_id: int
    origin: tuple[float, float, float]
    velocity: tuple[float, float, float]
    launch_time: float
    min_dist: float = math.inf
    prev_s: float | None = None

    def __post_init__(self):
        vx, vy = self.velocity[0], self.velocity[1]
        h = math.sqrt(vx * vx + vy * vy)
        self._hx = vx / h
        self._hy = vy / h

    def position(self, t: float) -> tuple[float, float, float]:
        tau = t - self.launch_time
        ox, oy, oz = self.origin
        vx, vy, vz = self.velocity
        return (
            ox + vx * tau,
            oy + vy * tau,
            oz + vz * tau - 0.5 * GRAVITY * tau * tau,
        )

    def advance(self, t: float, head) -> str | None:
        """hit / dodged / expired once decidable at this tick, else None.

        A hit is proximity below ball+head radii at a tick; a dodge is
        decided when the ball crosses the vertical plane through the head
        normal to its horizontal velocity with a near-miss on record.
        """
        px, py, pz = self.position(t)
        dx, dy, dz = px - head[0], py - head[1], pz - head[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist < self.min_dist:
            self.min_dist = dist
        if dist < HIT_DISTANCE:
            return "hit"
        s = dx * self._hx + dy * self._hy
        crossed = self.prev_s is not None and self.prev_s < 0.0 <= s
        self.prev_s = s
        if crossed and self.min_dist <= DODGE_NEAR:
            return "dodged"
        if pz < 0.0 or dist > BALL_EXPIRE_RANGE:
            return "expired"
        return None


def polyline_length(pts) -> float:
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        total += math.sqrt(sum((y - x) * (y - x) for x, y in zip(a, b)))
    return total


def polyline_point(pts, s: float):
    """Point at arc length s along pts, clamped to the ends."""
    if s <= 0.0:
        return tuple(pts[0])
    remaining = s
    for a, b in zip(pts, pts[1:]):
        seg = math.sqrt(sum((y - x) * (y - x) for x, y in zip(a, b)))
        if remaining <= seg and seg > 0.0:
            f = remaining / seg
            return tuple(x + f * (y - x) for x, y in zip(a, b))
        remaining -= seg
    return tuple(pts[-1])


@dataclass
class TrainPass:
    rail: int
    start_time: float

    def head_s(self, t: float) -> float:
        return TRAIN_SPEED * (t - self.start_time)

    def active(self, t: float, rail_length: float) -> bool:
        return self.head_s(t) - TRAIN_LENGTH <= rail_length

    def cue_point(self, t: float, rail_pts, rail_length: float):
        mid = self.head_s(t) - TRAIN_LENGTH * 0.5
        x, y = polyline_point(rail_pts, min(max(mid, 0.0), rail_length))
        return (x, y, 0.0)


@dataclass
class PlaneFlyover:
    start_time: float

    def active(self, t: float) -> bool:
        return 0.0 <= t - self.start_time <= PLANE_DURATION

    def cue_point(self, t: float, path_pts, path_length: float):
        u = (t - self.start_time) / PLANE_DURATION
        return polyline_point(path_pts, u * path_length)


# Fixed per-index lane offsets spread cars around the loop without RNG so
# growing and shrinking the fleet never teleports surviving cars.
_CAR_SPREAD = 0.381966


@dataclass
class CarFleet:
    lanes: list  # list of closed loops: (points, loop_length)
    cars: list = field(default_factory=list)  # {index, lane, s}

    @classmethod
    def from_lane_points(cls, lane_points):
        lanes = []
        for pts in lane_points:
            loop = list(pts) + [pts[0]]
            lanes.append((loop, polyline_length(loop)))
        return cls(lanes=lanes)

    def set_target(self, count: int) -> None:
        if not self.lanes:
            return
        while len(self.cars) > count:
            self.cars.pop()
        while len(self.cars) < count:
            i = len(self.cars)
            lane = i % len(self.lanes)
            length = self.lanes[lane][1]
            s = (i * _CAR_SPREAD % 1.0) * length
            self.cars.append({"index": i, "lane": lane, "s": s})

    def step(self, dt: float, speed: float) -> None:
        if speed == 0.0:
            return
        for car in self.cars:
            length = self.lanes[car["lane"]][1]
            car["s"] = (car["s"] + speed * dt) % length

    def positions(self):
        out = []
        for car in self.cars:
            pts, _length = self.lanes[car["lane"]]
            x, y = polyline_point(pts, car["s"])
            out.append((x, y))
        return out
