"""Listener-relative cue geometry and the three sound-intensity tiers.

Cues carry azimuth/elevation/distance/gain for a downstream renderer;
nothing here touches audio buffers.  Azimuth 0 is listener-forward and
positive turns leftward; the ambiance bed counter-rotates against head
yaw so the background stays world-anchored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TIER1_CAP = 8
TIER2_CAP = 32


@dataclass(frozen=True)
class ListenerPose:
    position: tuple[float, float, float]
    yaw: float
    pitch: float

    def __post_init__(self):
        if not (-math.pi <= self.yaw <= math.pi and -math.pi <= self.pitch <= math.pi):
            raise ValueError("yaw/pitch must lie in [-pi, pi]")


@dataclass(frozen=True)
class SpatialCue:
    cue_id: str
    azimuth: float  # degrees
    elevation: float  # degrees
    distance: float
    gain: float


@dataclass(frozen=True)
class AmbianceState:
    bed_id: str
    rotation_yaw: float
    tier: int


def spatialize(source, listener: ListenerPose) -> tuple[float, float, float]:
    """(azimuth deg, elevation deg, distance) of a world point in the
    listener's yaw/pitch frame.  Coincident source resolves to zeros."""
    dx = source[0] - listener.position[0]
    dy = source[1] - listener.position[1]
    dz = source[2] - listener.position[2]
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        return (0.0, 0.0, 0.0)
    sy, cy = math.sin(listener.yaw), math.cos(listener.yaw)
    sp, cp = math.sin(listener.pitch), math.cos(listener.pitch)
    # Yaw 0 faces +y; right/forward/up basis of the listener frame.
    xr = dx * cy + dy * sy
    yf = -dx * sy * cp + dy * cy * cp + dz * sp
    zu = dx * sy * sp - dy * cy * sp + dz * cp
    azimuth = math.degrees(math.atan2(-xr, yf))
    elevation = math.degrees(math.atan2(zu, math.hypot(xr, yf)))
    return (azimuth, elevation, dist)


def gain_model(distance: float) -> float:
    if distance < 0.0:
        raise ValueError("distance must be >= 0")
    return min(1.0, 1.0 / max(distance, 1.0))


def active_cues(tier: int, sources, listener: ListenerPose,
                bed_id: str) -> tuple[list[SpatialCue], AmbianceState]:
    """Cue list for the intensity tier plus the ambiance bed state.

    sources: iterable of (cue_id, (x, y, z), min_tier).  Tier 0 is silent.
    Tier 1 takes the 8 nearest sources audible at tier 1; tier 2 keeps that
    same set and fills with further eligible sources up to 32, so the tier-1
    cue set is always a subset of the tier-2 set.
    """
    if tier not in (0, 1, 2):
        raise ValueError(f"sound tier {tier} out of range")
    ambiance = AmbianceState(bed_id, -listener.yaw, tier)
    if tier == 0:
        return [], ambiance

    lp = listener.position
    ranked = []
    for idx, (cue_id, pos, min_tier) in enumerate(sources):
        if min_tier > tier:
            continue
        dx = pos[0] - lp[0]
        dy = pos[1] - lp[1]
        dz = pos[2] - lp[2]
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        ranked.append((d, idx, cue_id, pos, min_tier))
    ranked.sort(key=lambda r: (r[0], r[1]))

    if tier == 1:
        chosen = ranked[:TIER1_CAP]
    else:
        core = [r for r in ranked if r[4] <= 1][:TIER1_CAP]
        core_keys = {r[1] for r in core}
        rest = [r for r in ranked if r[1] not in core_keys]
        chosen = sorted(core + rest[: TIER2_CAP - len(core)], key=lambda r: (r[0], r[1]))

    cues = []
    for d, _idx, cue_id, pos, _mt in chosen:
        az, el, dist = spatialize(pos, listener)
        cues.append(SpatialCue(cue_id, az, el, dist, gain_model(dist)))
    return cues, ambiance
