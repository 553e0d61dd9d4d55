"""Clinician-facing parameter vector and authored scene definitions.

Parameter ranges and per-scene scope rules live here in one table that
both validation and the served control schema are generated from, so the
engine and any console client can never disagree about what is legal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

from .geometry import NavMesh, build_navmesh

SCENES = ("airport", "subway", "city", "ball_park")

SPAWN_LABELS = {
    "airport": ("hall", "second_floor", "stairs"),
    "subway": ("platform", "mezzanine", "stairs"),
    "city": ("sidewalk_mid",),
    "ball_park": ("park_center",),
}

# name -> (lo, hi, scenes where the control applies)
INT_FIELDS = {
    "speed": (0, 3, SCENES),
    "walking_direction": (1, 4, SCENES),
    "walking_amount": (1, 4, SCENES),
    "sound_level": (0, 2, SCENES),
    "car_amount": (0, 3, ("city", "ball_park")),
    "difficulty": (0, 4, ("ball_park",)),
    "lighting": (0, 3, ("city", "ball_park")),
}
BOOL_FIELDS = ("light_flag", "color_flag", "material_flag", "pedestrians_enabled")

ROUTES_PER_SCENE = 4
RAILS_IN_SUBWAY = 4
MACHINES_IN_PARK = 3
BLOCKS_IN_CITY = 7


@dataclass(frozen=True)
class ScenarioParams:
    scene: str
    speed: int = 0
    walking_direction: int = 1
    walking_amount: int = 1
    sound_level: int = 0
    car_amount: int = 0
    difficulty: int = 0
    lighting: int = 0
    light_flag: bool = True
    color_flag: bool = True
    material_flag: bool = True
    pedestrians_enabled: bool = True
    spawn: str = ""
    machine_mask_override: frozenset | None = None

    def to_dict(self) -> dict:
        d = {
            "scene": self.scene,
            "spawn": self.spawn,
            "machine_mask_override": (
                sorted(self.machine_mask_override)
                if self.machine_mask_override is not None
                else None
            ),
        }
        for name in INT_FIELDS:
            d[name] = getattr(self, name)
        for name in BOOL_FIELDS:
            d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioParams":
        kwargs = dict(d)
        mask = kwargs.get("machine_mask_override")
        if mask is not None:
            kwargs["machine_mask_override"] = frozenset(int(m) for m in mask)
        unknown = set(kwargs) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        return cls(**kwargs)


def default_params(scene: str) -> ScenarioParams:
    if scene not in SCENES:
        raise ValueError(f"unknown scene {scene!r}")
    return ScenarioParams(scene=scene, spawn=SPAWN_LABELS[scene][0])


def validate(params: ScenarioParams) -> list[str]:
    """Every range or scope violation as 'field: reason'; empty when ok."""
    errors = []
    if params.scene not in SCENES:
        errors.append(f"scene: unknown scene {params.scene!r}")
        return errors
    for name, (lo, hi, scope) in INT_FIELDS.items():
        value = getattr(params, name)
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{name}: must be an integer")
            continue
        if not lo <= value <= hi:
            errors.append(f"{name}: {value} outside [{lo}, {hi}]")
            continue
        if params.scene not in scope and value != 0:
            errors.append(
                f"{name}: not applicable to scene {params.scene} "
                f"(only {'/'.join(scope)})"
            )
    for name in BOOL_FIELDS:
        if not isinstance(getattr(params, name), bool):
            errors.append(f"{name}: must be a boolean")
    if params.spawn not in SPAWN_LABELS[params.scene]:
        errors.append(
            f"spawn: {params.spawn!r} not one of "
            f"{list(SPAWN_LABELS[params.scene])} for scene {params.scene}"
        )
    mask = params.machine_mask_override
    if mask is not None:
        if params.scene != "ball_park":
            errors.append("machine_mask_override: only applies to ball_park")
        elif not all(isinstance(m, int) and 0 <= m <= 2 for m in mask):
            errors.append("machine_mask_override: machine ids must be 0..2")
    return errors


MUTABLE_FIELDS = (
    tuple(INT_FIELDS) + BOOL_FIELDS + ("spawn", "machine_mask_override")
)


def apply_change(params: ScenarioParams, name: str, value):
    """(new params, None) on success, (old params, error string) otherwise.
    Scene switches are rejected here; they go through a scene load."""
    if name == "scene":
        return params, "scene: changed via load_scene, not set_param"
    if name not in MUTABLE_FIELDS:
        return params, f"{name}: unknown parameter"
    if name == "machine_mask_override" and value is not None:
        try:
            value = frozenset(int(m) for m in value)
        except (TypeError, ValueError):
            return params, "machine_mask_override: must be null or a list of machine ids"
    candidate = replace(params, **{name: value})
    errors = validate(candidate)
    if errors:
        return params, "; ".join(e for e in errors if e.startswith(name)) or errors[0]
    return candidate, None


def control_schema() -> dict:
    """Machine-readable description of every control, served to consoles."""
    fields = {}
    for name, (lo, hi, scope) in INT_FIELDS.items():
        fields[name] = {"kind": "int", "min": lo, "max": hi, "scenes": list(scope)}
    for name in BOOL_FIELDS:
        fields[name] = {"kind": "bool", "scenes": list(SCENES)}
    fields["spawn"] = {
        "kind": "choice",
        "choices_by_scene": {s: list(v) for s, v in SPAWN_LABELS.items()},
        "scenes": list(SCENES),
    }
    fields["machine_mask_override"] = {
        "kind": "mask",
        "min": 0,
        "max": 2,
        "scenes": ["ball_park"],
    }
    return {"scenes": list(SCENES), "fields": fields}


class ScenarioFileError(ValueError):
    pass


@dataclass(frozen=True)
class RouteFamily:
    id: int
    entry: tuple[float, float]
    exit: tuple[float, float]


@dataclass(frozen=True)
class SceneDefinition:
    scene: str
    mesh: NavMesh
    routes: tuple[RouteFamily, ...]
    lanes: tuple
    rails: tuple
    machines: tuple
    plane_path: tuple
    spawns: dict
    cues: dict  # cue id -> {"min_tier": n, "pos": optional [x,y,z]}
    ambiance_bed: str
    blocks: tuple
    params: ScenarioParams = field(compare=False, default=None)


def _point2(v) -> tuple[float, float]:
    return (float(v[0]), float(v[1]))


def _point3(v) -> tuple[float, float, float]:
    return (float(v[0]), float(v[1]), float(v[2]))


def parse_scene(raw: dict, source: str = "<memory>") -> SceneDefinition:
    scene = raw.get("scene")
    if scene not in SCENES:
        raise ScenarioFileError(f"{source}: scene must be one of {SCENES}, got {scene!r}")

    def need(key, scenes=SCENES):
        if scene in scenes and key not in raw:
            raise ScenarioFileError(f"{source}: missing {key!r} for scene {scene}")
        return raw.get(key, [])

    mesh = build_navmesh([[_point2(p) for p in poly]
                          for poly in need("navmesh")["polygons"]])

    routes = []
    for r in need("routes"):
        routes.append(RouteFamily(int(r["id"]), _point2(r["entry"]), _point2(r["exit"])))
    routes.sort(key=lambda r: r.id)
    if [r.id for r in routes] != list(range(ROUTES_PER_SCENE)):
        raise ScenarioFileError(
            f"{source}: routes must be ids 0..{ROUTES_PER_SCENE - 1}, one each"
        )
    for r in routes:
        for label, p in (("entry", r.entry), ("exit", r.exit)):
            if mesh.locate(p) is None:
                raise ScenarioFileError(
                    f"{source}: route {r.id} {label} {p} outside navmesh"
                )

    lanes = tuple(
        tuple(_point2(p) for p in lane) for lane in need("lanes", ("city", "ball_park"))
    )
    rails = tuple(
        tuple(_point2(p) for p in rail) for rail in need("rails", ("subway",))
    )
    if scene == "subway" and len(rails) != RAILS_IN_SUBWAY:
        raise ScenarioFileError(f"{source}: subway needs {RAILS_IN_SUBWAY} rails, got {len(rails)}")
    machines = tuple(_point3(m) for m in need("machines", ("ball_park",)))
    if scene == "ball_park" and len(machines) != MACHINES_IN_PARK:
        raise ScenarioFileError(
            f"{source}: ball_park needs {MACHINES_IN_PARK} machines, got {len(machines)}"
        )
    plane_path = tuple(_point3(p) for p in need("plane_path", ("airport",)))
    if scene == "airport" and len(plane_path) < 2:
        raise ScenarioFileError(f"{source}: airport plane_path needs >= 2 points")
    blocks = tuple(
        tuple(_point2(p) for p in poly) for poly in need("blocks", ("city",))
    )
    if scene == "city" and len(blocks) != BLOCKS_IN_CITY:
        raise ScenarioFileError(
            f"{source}: city needs {BLOCKS_IN_CITY} blocks, got {len(blocks)}"
        )

    spawns = {}
    for s in need("spawns"):
        spawns[str(s["label"])] = _point3(s["pos"])
    if tuple(spawns) != SPAWN_LABELS[scene]:
        raise ScenarioFileError(
            f"{source}: spawns must be exactly {SPAWN_LABELS[scene]} in order, "
            f"got {tuple(spawns)}"
        )
    for label, pos in spawns.items():
        if mesh.locate((pos[0], pos[1])) is None:
            raise ScenarioFileError(f"{source}: spawn {label} {pos} outside navmesh")

    cues = {}
    for c in need("cues"):
        cid = str(c["id"])
        if cid in cues:
            raise ScenarioFileError(f"{source}: duplicate cue id {cid!r}")
        tier = int(c["min_tier"])
        if not 0 <= tier <= 2:
            raise ScenarioFileError(f"{source}: cue {cid!r} min_tier {tier} outside 0..2")
        entry = {"min_tier": tier}
        if "pos" in c:
            entry["pos"] = _point3(c["pos"])
        cues[cid] = entry

    params_raw = dict(raw.get("params", {}))
    params_raw.setdefault("scene", scene)
    params_raw.setdefault("spawn", SPAWN_LABELS[scene][0])
    params = ScenarioParams.from_dict(params_raw)
    if params.scene != scene:
        raise ScenarioFileError(
            f"{source}: params.scene {params.scene!r} contradicts scene {scene!r}"
        )
    errors = validate(params)
    if errors:
        raise ScenarioFileError(f"{source}: invalid params: " + "; ".join(errors))

    return SceneDefinition(
        scene=scene,
        mesh=mesh,
        routes=tuple(routes),
        lanes=lanes,
        rails=rails,
        machines=machines,
        plane_path=plane_path,
        spawns=spawns,
        cues=cues,
        ambiance_bed=str(raw.get("ambiance_bed", f"{scene}_bed")),
        blocks=blocks,
        params=params,
    )


def load_scene_file(path: str) -> SceneDefinition:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(
            f"{path}: JSON parse error at byte offset {exc.pos}: {exc.msg}"
        ) from None
    return parse_scene(raw, source=path)


def packaged_scene_path(scene: str) -> str:
    """Filesystem path of a scene definition shipped with the package."""
    if scene not in SCENES:
        raise ValueError(f"unknown scene {scene!r}")
    return str(resources.files("scenesim").joinpath(f"data/{scene}.json"))
