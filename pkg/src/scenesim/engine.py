"""Fixed-timestep session engine.

One session simulates a scene at 90 Hz.  A tick runs nine phases in a
fixed order so that identical inputs always produce identical state:
pose input, parameter changes, schedulers, conflict prediction and
replanning, integration, ball resolution, audio cues, metrics, and
record emission.  All randomness flows from one master seed through
named per-subsystem streams, so a session can be replayed bit-exactly
from its log.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from time import perf_counter

from . import events
from .audio import AmbianceState, ListenerPose, active_cues
from .crowd import Crowd
from .events import (
    BallFlight,
    CarFleet,
    LaunchError,
    PlaneFlyover,
    TrainPass,
    ball_schedule,
    next_plane_gap,
    next_train_gap,
    polyline_length,
    solve_ball_launch,
)
from .rng import derive_stream, fnv1a64
from .scenario import SceneDefinition, ScenarioParams, apply_change

TICK_RATE = 90
DT = 1.0 / TICK_RATE
SNAPSHOT_HASH_INTERVAL = 90  # ticks between hash records in the log

# Synthesized source heights for cue emitters that live in 2D.
CAR_CUE_HEIGHT = 0.5
FOOTSTEP_CUE_HEIGHT = 0.0


def _wrap_angle(a: float) -> float:
    """Equivalent angle in [-pi, pi]."""
    if -math.pi <= a <= math.pi:
        return a
    return math.atan2(math.sin(a), math.cos(a))


@dataclass
class PlayerPose:
    x: float
    y: float
    z: float
    yaw: float = 0.0
    pitch: float = 0.0

    def head(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z,
                "yaw": self.yaw, "pitch": self.pitch}


@dataclass
class SessionMetrics:
    balls_launched: int = 0
    ball_hits: int = 0
    ball_dodges: int = 0
    min_player_agent_distance: float = math.inf
    exposure_seconds: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    param_change_count: int = 0

    def to_dict(self) -> dict:
        d = self.min_player_agent_distance
        return {
            "balls_launched": self.balls_launched,
            "ball_hits": self.ball_hits,
            "ball_dodges": self.ball_dodges,
            "min_player_agent_distance": None if math.isinf(d) else d,
            "exposure_seconds": list(self.exposure_seconds),
            "param_change_count": self.param_change_count,
        }


class SessionEngine:
    """One running scene: crowd, event schedulers, cues, and metrics."""

    def __init__(self, scene: SceneDefinition, params: ScenarioParams,
                 master_seed: int, load_index: int = 0):
        if params.scene != scene.scene:
            raise ValueError(
                f"params are for scene {params.scene!r}, not {scene.scene!r}"
            )
        self.scene = scene
        self.params = params
        self.master_seed = master_seed
        self.load_index = load_index
        self.tick = 0

        sx, sy, sz = scene.spawns[params.spawn]
        self.pose = PlayerPose(sx, sy, sz)
        self._player_vel = (0.0, 0.0)

        self.crowd = Crowd(scene.mesh, self._stream("crowd"))
        self._plane_rng = self._stream("plane")
        self._rail_rngs = [self._stream(f"rail{i}")
                           for i in range(len(scene.rails))]
        self._ball_rng = self._stream("balls")

        # Primed timers: the first event of each scheduler is already drawn
        # so the session opens mid-rhythm instead of with a silent gap.
        self._next_plane = (next_plane_gap(self._plane_rng)
                            if scene.plane_path else None)
        self._next_train = [next_train_gap(i, rng)
                            for i, rng in enumerate(self._rail_rngs)]
        self._rail_lengths = [polyline_length(r) for r in scene.rails]
        self._plane_length = (polyline_length(scene.plane_path)
                              if scene.plane_path else 0.0)

        self._ball_machines: tuple[int, ...] = ()
        self._ball_interval = (0.0, 0.0)
        self._next_ball = None
        if scene.machines:
            self._reschedule_balls(arm_from=0.0)

        self.cars = CarFleet.from_lane_points(scene.lanes) if scene.lanes else None
        if self.cars is not None:
            self.cars.set_target(events.CAR_TABLE[params.car_amount])

        self.plane: PlaneFlyover | None = None
        self.trains: list[TrainPass | None] = [None] * len(scene.rails)
        self.balls: list[BallFlight] = []
        self.cues: list = []
        self.ambiance = AmbianceState(scene.ambiance_bed, 0.0, params.sound_level)
        self.metrics = SessionMetrics()
        self._phase_clock: dict | None = None
        self._t = 0.0
        self._tick_records: list[dict] = []
        self._forced_launches: tuple[int, ...] = ()

    def _stream(self, name: str):
        return derive_stream(self.master_seed, name, self.load_index)

    @property
    def sim_time(self) -> float:
        return self.tick * DT

    # ---- the tick

    def step(self, pose: dict | None = None, changes=(),
             launches=()) -> list[dict]:
        """Advance one tick; returns the log records the tick produced.

        The nine phases always run in the same order; that order is the
        determinism contract, so inputs applied at the same tick always
        see the same world.  ``launches`` forces ball machines to fire
        this tick regardless of their schedule.
        """
        self.tick += 1
        self._t = self.tick * DT
        self._tick_records = []
        self._forced_launches = tuple(launches)
        phases = (
            ("pose", lambda: self._phase_pose(pose)),
            ("param_changes", lambda: self._phase_changes(changes)),
            ("schedulers", self._phase_schedulers),
            ("conflicts", self._phase_conflicts),
            ("integrate", self._phase_integrate),
            ("ball_resolution", self._phase_balls),
            ("cues", self._phase_cues),
            ("metrics", self._phase_metrics),
            ("records", self._phase_records),
        )
        clock = self._phase_clock
        for name, fn in phases:
            if clock is None:
                fn()
            else:
                t0 = perf_counter()
                fn()
                clock[name] = clock.get(name, 0.0) + (perf_counter() - t0)
        return self._tick_records

    def enable_phase_timing(self) -> dict:
        """Accumulate per-phase wall time; returns the live dict."""
        self._phase_clock = {}
        return self._phase_clock

    def _phase_pose(self, pose: dict | None) -> None:
        if pose is None:
            self._player_vel = (0.0, 0.0)
            return
        prev = (self.pose.x, self.pose.y)
        self.pose = PlayerPose(
            float(pose["x"]), float(pose["y"]), float(pose["z"]),
            float(pose.get("yaw", 0.0)), float(pose.get("pitch", 0.0)),
        )
        self._player_vel = ((self.pose.x - prev[0]) / DT,
                            (self.pose.y - prev[1]) / DT)
        self._tick_records.append({"tick": self.tick, "kind": "pose",
                                   **self.pose.to_dict()})

    def _phase_changes(self, changes) -> None:
        for name, value in changes:
            new_params, error = apply_change(self.params, name, value)
            if error is None:
                self.params = new_params
                self._on_param_applied(name, self._t)
                self.metrics.param_change_count += 1
                self._tick_records.append(
                    {"tick": self.tick, "kind": "param_change",
                     "name": name, "value": _jsonable(value)})
            else:
                self._tick_records.append(
                    {"tick": self.tick, "kind": "event",
                     "event": "param_rejected", "name": name,
                     "reason": error})

    def _phase_schedulers(self) -> None:
        self.crowd.spawn_tick(self.params, self.scene,
                              (self.pose.x, self.pose.y))
        self._tick_records.extend(self._run_schedulers(self._t))

    def _phase_conflicts(self) -> None:
        player_xy = (self.pose.x, self.pose.y)
        reports = self.crowd.predict_conflicts(player_xy, self._player_vel)
        self.crowd.run_replans(reports, player_xy)

    def _phase_integrate(self) -> None:
        self.crowd.step(DT, (self.pose.x, self.pose.y))
        if self.cars is not None:
            self.cars.step(DT, self._car_speed())

    def _phase_balls(self) -> None:
        survivors = []
        for ball in self.balls:
            outcome = ball.advance(self._t, self.pose.head())
            if outcome is None:
                survivors.append(ball)
                continue
            if outcome == "hit":
                self.metrics.ball_hits += 1
            elif outcome == "dodged":
                self.metrics.ball_dodges += 1
            self._tick_records.append(
                {"tick": self.tick, "kind": "event",
                 "event": f"ball_{outcome}", "machine": ball.machine_id,
                 "min_dist": ball.min_dist})
        self.balls = survivors

    def _phase_cues(self) -> None:
        # pose angles arrive unnormalized from tracking; the listener
        # frame wants principal values
        listener = ListenerPose(self.pose.head(), _wrap_angle(self.pose.yaw),
                                _wrap_angle(self.pose.pitch))
        self.cues, self.ambiance = active_cues(
            self.params.sound_level, self._cue_sources(self._t), listener,
            self.scene.ambiance_bed,
        )

    def _phase_metrics(self) -> None:
        self.metrics.exposure_seconds[self.params.sound_level] += DT
        for agent in self.crowd.agents:
            dx = agent.position[0] - self.pose.x
            dy = agent.position[1] - self.pose.y
            d = math.sqrt(dx * dx + dy * dy)
            if d < self.metrics.min_player_agent_distance:
                self.metrics.min_player_agent_distance = d

    def _phase_records(self) -> None:
        if self.tick % SNAPSHOT_HASH_INTERVAL == 0:
            self._tick_records.append(self.hash_record())

    # ---- schedulers

    def _run_schedulers(self, t: float) -> list[dict]:
        records = []
        if self._next_plane is not None:
            if self.plane is not None and not self.plane.active(t):
                self.plane = None
            if t >= self._next_plane:
                self.plane = PlaneFlyover(t)
                self._next_plane = t + next_plane_gap(self._plane_rng)
                records.append({"tick": self.tick, "kind": "event",
                                "event": "plane_start"})
        for rail, due in enumerate(self._next_train):
            active = self.trains[rail]
            if active is not None and not active.active(t, self._rail_lengths[rail]):
                self.trains[rail] = None
            if t >= due:
                self.trains[rail] = TrainPass(rail, t)
                self._next_train[rail] = t + next_train_gap(
                    rail, self._rail_rngs[rail])
                records.append({"tick": self.tick, "kind": "event",
                                "event": "train_start", "rail": rail})
        for machine_id in self._forced_launches:
            if not (self.scene.machines
                    and 0 <= machine_id < len(self.scene.machines)):
                records.append({"tick": self.tick, "kind": "event",
                                "event": "ball_skipped",
                                "machine": machine_id,
                                "reason": "no such machine", "forced": True})
                continue
            records.extend(self._fire_machine(machine_id, t, forced=True))
        if self._next_ball is not None and t >= self._next_ball:
            mask = self.params.machine_mask_override
            machines = (sorted(mask) if mask is not None
                        else self._ball_machines)
            for machine_id in machines:
                records.extend(self._fire_machine(machine_id, t, forced=False))
            self._next_ball = t + self._ball_rng.uniform(*self._ball_interval)
        return records

    def _fire_machine(self, machine_id: int, t: float,
                      forced: bool) -> list[dict]:
        origin = self.scene.machines[machine_id]
        tag = {"forced": True} if forced else {}
        try:
            velocity = solve_ball_launch(origin, self.pose.head())
        except LaunchError as exc:
            return [{"tick": self.tick, "kind": "event",
                     "event": "ball_skipped", "machine": machine_id,
                     "reason": str(exc), **tag}]
        self.balls.append(BallFlight(machine_id, origin, velocity, t))
        self.metrics.balls_launched += 1
        return [{"tick": self.tick, "kind": "event", "event": "ball_launch",
                 "machine": machine_id, **tag}]

    def _reschedule_balls(self, arm_from: float) -> None:
        self._ball_machines, self._ball_interval = ball_schedule(
            self.params.difficulty, self._ball_rng)
        self._next_ball = arm_from + self._ball_rng.uniform(*self._ball_interval)

    def _on_param_applied(self, name: str, t: float) -> None:
        """React to a change already stored in self.params."""
        if name == "car_amount" and self.cars is not None:
            self.cars.set_target(events.CAR_TABLE[self.params.car_amount])
        if name == "difficulty" and self.scene.machines:
            self._reschedule_balls(arm_from=t)
        # A mask change filters launches at fire time; no rescheduling.

    def _car_speed(self) -> float:
        if self.scene.scene == "city":
            return events.CAR_SPEED_TABLE[self.params.speed]
        return events.PARK_CAR_SPEED

    # ---- cue sources

    def _cue_sources(self, t: float) -> list:
        """(cue_id, position, min_tier) triples for everything audible now.

        Static cues come straight from the scene file; dynamic cue ids are
        fanned out across the live emitters they describe.
        """
        sources = []
        for cue_id, entry in self.scene.cues.items():
            tier = entry["min_tier"]
            if "pos" in entry:
                sources.append((cue_id, entry["pos"], tier))
                continue
            if cue_id == "footsteps":
                for agent in self.crowd.agents:
                    if agent.speed > 0.0 and not agent.waiting:
                        sources.append((cue_id, (agent.position[0],
                                                 agent.position[1],
                                                 FOOTSTEP_CUE_HEIGHT), tier))
            elif cue_id == "car":
                if self.cars is not None:
                    for x, y in self.cars.positions():
                        sources.append((cue_id, (x, y, CAR_CUE_HEIGHT), tier))
            elif cue_id == "train":
                for rail, train in enumerate(self.trains):
                    if train is not None:
                        sources.append((cue_id, train.cue_point(
                            t, self.scene.rails[rail],
                            self._rail_lengths[rail]), tier))
            elif cue_id == "airplane":
                if self.plane is not None:
                    sources.append((cue_id, self.plane.cue_point(
                        t, self.scene.plane_path, self._plane_length), tier))
            elif cue_id == "ball":
                for ball in self.balls:
                    sources.append((cue_id, ball.position(t), tier))
        return sources

    # ---- state capture

    def snapshot(self) -> dict:
        t = self.sim_time
        return {
            "tick": self.tick,
            "sim_time": t,
            "scene": self.scene.scene,
            "player": self.pose.to_dict(),
            "params": self.params.to_dict(),
            "agents": [
                [a.id, a.position[0], a.position[1], a.heading,
                 a.speed_level, 1 if a.waiting else 0]
                for a in self.crowd.agents
            ],
            "balls": [[b.machine_id, *b.position(t)] for b in self.balls],
            "trains": [
                [rail, tr.head_s(t)]
                for rail, tr in enumerate(self.trains) if tr is not None
            ],
            "plane": (list(self.plane.cue_point(t, self.scene.plane_path,
                                                self._plane_length))
                      if self.plane is not None and self.plane.active(t)
                      else None),
            "cars": ([[x, y] for x, y in self.cars.positions()]
                     if self.cars is not None else []),
            "cues": [
                [c.cue_id, c.azimuth, c.elevation, c.distance, c.gain]
                for c in self.cues
            ],
            "ambiance": [self.ambiance.bed_id, self.ambiance.rotation_yaw,
                         self.ambiance.tier],
            "metrics": self.metrics.to_dict(),
        }

    def snapshot_hash(self) -> str:
        canon = json.dumps(self.snapshot(), sort_keys=True,
                           separators=(",", ":"))
        return f"{fnv1a64(canon.encode('utf-8')):016x}"

    def hash_record(self) -> dict:
        return {"tick": self.tick, "kind": "snapshot_hash",
                "hash": self.snapshot_hash()}


def _jsonable(value):
    if isinstance(value, frozenset):
        return sorted(value)
    return value
