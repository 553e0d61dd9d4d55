"""Pedestrian agents with exclusive agent/obstacle mode alternation.

Every live avatar is an obstacle to everyone else; it flips to agent mode
only for the duration of its own replan, inside one tick, and is restored
before the tick ends.  Conflicts are predicted by swept-disc extrapolation
over a short horizon, and avoidance is replanning around the others as
obstacle discs (never steering forces).  A belt-and-braces clamp in the
integrator cancels any step that would create an overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import NavMesh, ObstacleDisc
from .pathfind import PathError, find_path
from .rng import Stream

SPEED_TABLE = (0.0, 0.7, 1.3, 1.9)
AGENT_RADIUS = 0.3
PLAYER_RADIUS = 0.3
CONFLICT_HORIZON = 1.5
REPLAN_COOLDOWN = 0.5
ARRIVE_DISTANCE = 0.05
TARGET_PER_AMOUNT = 10
PLAYER = -1  # other_id marker in conflict reports

# Formation offsets around the route entry for group members, in spawn
# order; spacing keeps freshly spawned discs from touching.
FORMATION = (
    (0.0, 0.0), (-0.8, 0.0), (0.8, 0.0), (0.0, -0.8), (-0.8, -0.8),
)


@dataclass
class Agent:
    id: int
    position: tuple[float, float]
    heading: float
    speed_level: int
    path: tuple
    group_id: int
    route_family: int
    radius: float = AGENT_RADIUS
    path_cursor: int = 1
    mode: str = "obstacle"
    replan_cooldown: float = 0.0
    waiting: bool = False

    @property
    def speed(self) -> float:
        return SPEED_TABLE[self.speed_level]

    @property
    def goal(self) -> tuple[float, float]:
        return self.path[-1]

    def velocity(self) -> tuple[float, float]:
        if self.waiting or self.speed == 0.0 or self.path_cursor >= len(self.path):
            return (0.0, 0.0)
        tx, ty = self.path[self.path_cursor]
        dx = tx - self.position[0]
        dy = ty - self.position[1]
        d = math.sqrt(dx * dx + dy * dy)
        if d == 0.0:
            return (0.0, 0.0)
        return (dx / d * self.speed, dy / d * self.speed)


@dataclass
class ConflictReport:
    agent_id: int
    other_id: int  # agent id or PLAYER
    time_to_contact: float


@dataclass
class Crowd:
    mesh: NavMesh
    rng: Stream
    agents: list[Agent] = field(default_factory=list)
    next_agent_id: int = 0
    next_group_id: int = 0
    pending_group: tuple[int, int] | None = None  # (route_family, size)

    # ---- spawning

    def spawn_tick(self, params, scene, player_pos) -> list[Agent]:
        """Keep the population near its target by placing one group at a
        time; a group blocked at its entry stays pending and retries."""
        if not params.pedestrians_enabled:
            self.pending_group = None
            return []
        target = TARGET_PER_AMOUNT * params.walking_amount
        if self.pending_group is None:
            if len(self.agents) >= target:
                return []
            enabled = [r.id for r in scene.routes[: params.walking_direction]]
            family = enabled[self.rng.randint(len(enabled))]
            self.pending_group = (family, params.walking_amount + 1)
        family, size = self.pending_group
        route = scene.routes[family]
        placed = self._try_place_group(route, size, params.speed, player_pos)
        if placed is None:
            return []
        self.pending_group = None
        self.agents.extend(placed)
        return placed

    def _try_place_group(self, route, size, speed_level, player_pos):
        ex, ey = route.entry
        spots = []
        for k in range(size):
            ox, oy = FORMATION[k % len(FORMATION)]
            ring = k // len(FORMATION)
            spot = (ex + ox, ey + oy - 1.6 * ring)
            if self.mesh.locate(spot) is None:
                return None
            if not self._spot_free(spot, spots, player_pos):
                return None
            spots.append(spot)
        members = []
        for spot in spots:
            try:
                path = find_path(self.mesh, spot, route.exit)
            except PathError:
                return None
            members.append(
                Agent(
                    id=self.next_agent_id + len(members),
                    position=spot,
                    heading=_heading_of(path),
                    speed_level=speed_level,
                    path=path.waypoints,
                    group_id=self.next_group_id,
                    route_family=route.id,
                )
            )
        self.next_agent_id += len(members)
        self.next_group_id += 1
        return members

    def _spot_free(self, spot, sibling_spots, player_pos) -> bool:
        for other in self.agents:
            if _dist(spot, other.position) < 2.0 * AGENT_RADIUS:
                return False
        for sib in sibling_spots:
            if _dist(spot, sib) < 2.0 * AGENT_RADIUS:
                return False
        return _dist(spot, player_pos) >= AGENT_RADIUS + PLAYER_RADIUS

    # ---- conflict prediction

    def predict_conflicts(self, player_pos, player_vel) -> list[ConflictReport]:
        """Earliest swept-disc contact per agent against all agents and the
        player, within the lookahead horizon."""
        n = len(self.agents)
        if n == 0:
            return []
        total = n + 1
        px = np.empty(total)
        py = np.empty(total)
        vx = np.empty(total)
        vy = np.empty(total)
        rad = np.empty(total)
        for i, a in enumerate(self.agents):
            px[i], py[i] = a.position
            vx[i], vy[i] = a.velocity()
            rad[i] = a.radius
        px[n], py[n] = player_pos
        vx[n], vy[n] = player_vel
        rad[n] = PLAYER_RADIUS
        out_t = np.empty(n)
        out_j = np.empty(n, dtype=np.int64)
        kernels.sweep_conflicts(px, py, vx, vy, rad, n, total,
                                CONFLICT_HORIZON, out_t, out_j)
        reports = []
        for i, a in enumerate(self.agents):
            j = int(out_j[i])
            if j < 0:
                continue
            other = PLAYER if j == n else self.agents[j].id
            reports.append(ConflictReport(a.id, other, float(out_t[i])))
        return reports

    # ---- replanning

    def replan(self, agent: Agent, player_pos) -> None:
        """Flip to agent mode, plan around everyone else as discs, restore
        obstacle mode; on an unreachable goal the agent waits in place."""
        agent.mode = "agent"
        try:
            obstacles = []
            clearance = agent.radius
            for other in self.agents:
                if other.id == agent.id:
                    continue
                if _dist(agent.position, other.position) < other.radius + clearance:
                    continue  # overlapping discs would wedge the start
                obstacles.append(ObstacleDisc(other.position, other.radius))
            if _dist(agent.position, player_pos) >= PLAYER_RADIUS + clearance:
                obstacles.append(ObstacleDisc(player_pos, PLAYER_RADIUS))
            try:
                path = find_path(self.mesh, agent.position, agent.goal,
                                 obstacles, clearance)
            except PathError:
                agent.waiting = True
            else:
                agent.path = path.waypoints
                agent.path_cursor = 1 if len(path.waypoints) > 1 else 0
                agent.waiting = False
        finally:
            agent.mode = "obstacle"
            agent.replan_cooldown = REPLAN_COOLDOWN

    def run_replans(self, reports, player_pos) -> int:
        """Replan every conflicted agent whose cooldown expired, ascending
        id; waiting agents retry when their cooldown expires."""
        by_id = {r.agent_id: r for r in reports}
        count = 0
        for agent in self.agents:
            due = agent.replan_cooldown <= 0.0
            if due and (agent.id in by_id or agent.waiting):
                self.replan(agent, player_pos)
                count += 1
        return count

    # ---- integration

    def step(self, dt: float, player_pos) -> list[Agent]:
        """Advance along paths with the overlap clamp; returns agents that
        reached their exit and were despawned."""
        n = len(self.agents)
        for agent in self.agents:
            if agent.replan_cooldown > 0.0:
                agent.replan_cooldown = max(0.0, agent.replan_cooldown - dt)
        if n == 0:
            return []
        px = np.empty(n)
        py = np.empty(n)
        nx = np.empty(n)
        ny = np.empty(n)
        rad = np.empty(n)
        cursors = []
        for i, agent in enumerate(self.agents):
            px[i], py[i] = agent.position
            rad[i] = agent.radius
            pos, cursor = _advance_along_path(agent, dt)
            nx[i], ny[i] = pos
            cursors.append(cursor)
        ok = np.empty(n, dtype=np.int64)
        kernels.integrate_steps(px, py, nx, ny, rad, n,
                                player_pos[0], player_pos[1], PLAYER_RADIUS, ok)
        survivors = []
        despawned = []
        for i, agent in enumerate(self.agents):
            if ok[i]:
                newpos = (float(px[i]), float(py[i]))
                if newpos != agent.position:
                    agent.heading = math.atan2(
                        newpos[1] - agent.position[1],
                        newpos[0] - agent.position[0],
                    )
                agent.position = newpos
                agent.path_cursor = cursors[i]
            if _dist(agent.position, agent.goal) <= ARRIVE_DISTANCE:
                despawned.append(agent)
            else:
                survivors.append(agent)
        self.agents = survivors
        return despawned


def _dist(a, b) -> float:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    return math.sqrt(dx * dx + dy * dy)


def _heading_of(path) -> float:
    wps = path.waypoints
    if len(wps) >= 2:
        return math.atan2(wps[1][1] - wps[0][1], wps[1][0] - wps[0][0])
    return 0.0


def _advance_along_path(agent: Agent, dt: float):
    """Candidate (position, cursor) after dt of path following."""
    pos = agent.position
    cursor = agent.path_cursor
    remaining = 0.0 if agent.waiting else agent.speed * dt
    while remaining > 0.0 and cursor < len(agent.path):
        tx, ty = agent.path[cursor]
        d = _dist(pos, (tx, ty))
        if d <= remaining:
            pos = (tx, ty)
            cursor += 1
            remaining -= d
        else:
            f = remaining / d
            pos = (pos[0] + f * (tx - pos[0]), pos[1] + f * (ty - pos[1]))
            remaining = 0.0
    return pos, cursor
