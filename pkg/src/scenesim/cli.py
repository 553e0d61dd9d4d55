"""Command line interface.

Subcommands: run a headless session, replay-verify a log, benchmark the
tick loop on both kernel backends, validate a scene file, and serve the
control endpoint.  Machine-readable results go to stdout as single-line
JSON; human diagnostics go to stderr.

Exit codes: 0 success; 1 validation or format failure; 2 I/O failure;
3 replay divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from time import perf_counter

from . import kernels
from .engine import SessionEngine
from .logio import (
    LogFormatError,
    LogWriter,
    ReplayDivergence,
    UnsupportedFormatError,
    read_log,
    replay_session,
    run_session,
)
from .scenario import (
    SCENES,
    ScenarioFileError,
    apply_change,
    load_scene_file,
    packaged_scene_path,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_DIVERGED = 3

# Settings that exercise every subsystem at once; bench uses them so the
# reported throughput is a worst-case number.
MAX_COMPLEXITY = {
    "speed": 3, "walking_direction": 4, "walking_amount": 4,
    "sound_level": 2, "car_amount": 3, "lighting": 3, "difficulty": 4,
}


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _load_scene(ref: str):
    """Scene by packaged name or by file path."""
    path = packaged_scene_path(ref) if ref in SCENES else ref
    return load_scene_file(path)


def _parse_set(pairs):
    out = []
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--set needs name=value, got {pair!r}")
        name, _, raw = pair.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings, e.g. spawn labels
        out.append((name.strip(), value))
    return out


def _apply_sets(params, sets, skip=()):
    for name, value in sets:
        if name in skip:
            continue
        params, error = apply_change(params, name, value)
        if error is not None:
            raise ScenarioFileError(error)
    return params


def _read_script(path: str):
    """Input records from a JSONL file; a log header line is skipped so a
    previous session's log can be fed straight back in as a script."""
    records = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"{path}:{lineno}: not JSON: {exc}") from exc
            if "format_version" in obj:
                continue
            kind = obj.get("kind")
            is_input = (kind in ("pose", "param_change")
                        or (kind == "event" and obj.get("forced")))
            if is_input:
                if not isinstance(obj.get("tick"), int) or obj["tick"] < 1:
                    raise LogFormatError(f"{path}:{lineno}: bad tick")
                records.append(obj)
    return records


# ---- run

def cmd_run(args) -> int:
    try:
        scene = _load_scene(args.scene)
        params = _apply_sets(scene.params, _parse_set(args.set))
    except (ScenarioFileError, ValueError) as exc:
        _err(f"invalid scenario: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read scene: {exc}")
        return EXIT_IO

    ticks = args.ticks if args.ticks is not None else round(args.duration * 90)
    if ticks < 1:
        _err("nothing to simulate: ticks < 1")
        return EXIT_INVALID

    try:
        script = _read_script(args.script) if args.script else ()
    except LogFormatError as exc:
        _err(f"bad script: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read script: {exc}")
        return EXIT_IO

    engine = SessionEngine(scene, params, args.seed)
    try:
        out_fp = open(args.out, "w", encoding="utf-8") if args.out else None
    except OSError as exc:
        _err(f"cannot open log for writing: {exc}")
        return EXIT_IO
    try:
        writer = LogWriter(out_fp, engine) if out_fp else None
        run_session(engine, ticks, script_records=script, writer=writer)
    except OSError as exc:
        _err(f"log write failed: {exc}")
        return EXIT_IO
    finally:
        if out_fp:
            out_fp.close()

    _emit({
        "scene": scene.scene,
        "seed": args.seed,
        "ticks": engine.tick,
        "sim_time": engine.sim_time,
        "final_hash": engine.snapshot_hash(),
        "metrics": engine.metrics.to_dict(),
        "log": args.out,
    })
    return EXIT_OK


# ---- replay

def cmd_replay(args) -> int:
    try:
        with open(args.log, encoding="utf-8") as fp:
            header, records = read_log(fp)
    except OSError as exc:
        _err(f"cannot read log: {exc}")
        return EXIT_IO
    except UnsupportedFormatError as exc:
        _err(str(exc))
        return EXIT_INVALID
    except LogFormatError as exc:
        _err(f"bad log: {exc}")
        return EXIT_INVALID

    try:
        scene = _load_scene(args.scene_file or header["scenario"]["scene"])
    except (ScenarioFileError, KeyError) as exc:
        _err(f"cannot load scene for replay: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read scene: {exc}")
        return EXIT_IO

    try:
        checked = replay_session(scene, header, records)
    except ReplayDivergence as exc:
        _emit({"verified": False, "diverged_at_tick": exc.tick,
               "expected": exc.expected, "actual": exc.actual})
        _err(str(exc))
        return EXIT_DIVERGED
    last = max((r["tick"] for r in records), default=0)
    _emit({"verified": True, "hashes_checked": checked, "ticks": last})
    return EXIT_OK


# ---- validate

def cmd_validate(args) -> int:
    try:
        scene = _load_scene(args.scene)
        _apply_sets(scene.params, _parse_set(args.set))
    except (ScenarioFileError, ValueError) as exc:
        _emit({"valid": False, "error": str(exc)})
        _err(f"invalid: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot read scene: {exc}")
        return EXIT_IO

    from .pathfind import PathError, find_path
    for route in scene.routes:
        try:
            find_path(scene.mesh, route.entry, route.exit)
        except PathError as exc:
            _emit({"valid": False,
                   "error": f"route {route.id} not walkable: {exc}"})
            _err(f"invalid: route {route.id} not walkable")
            return EXIT_INVALID

    _emit({
        "valid": True,
        "scene": scene.scene,
        "polygons": len(scene.mesh.polygons),
        "portals": len(scene.mesh.portals),
        "routes": len(scene.routes),
        "spawns": list(scene.spawns),
        "machines": len(scene.machines),
        "rails": len(scene.rails),
        "lanes": len(scene.lanes),
    })
    return EXIT_OK


# ---- bench

def _bench_single(scene_name: str, seed: int, ticks: int) -> dict:
    scene = _load_scene(scene_name)
    params = _apply_sets(scene.params, list(MAX_COMPLEXITY.items()),
                         skip=_out_of_scope(scene.scene))
    engine = SessionEngine(scene, params, seed)
    run_session(engine, 450)  # reach steady-state population
    t0 = perf_counter()
    run_session(engine, ticks)
    wall = perf_counter() - t0
    clock = engine.enable_phase_timing()
    t1 = perf_counter()
    run_session(engine, ticks)
    timed_wall = perf_counter() - t1
    return {
        "backend": kernels.BACKEND,
        "scene": scene.scene,
        "ticks": ticks,
        "wall_seconds": wall,
        "ticks_per_second": ticks / wall,
        "phases": {k: clock[k] for k in sorted(clock)},
        "phase_coverage": sum(clock.values()) / timed_wall,
        "final_hash": engine.snapshot_hash(),
    }


def _out_of_scope(scene_name: str) -> tuple:
    from .scenario import INT_FIELDS
    return tuple(name for name, (_lo, _hi, scope) in INT_FIELDS.items()
                 if scene_name not in scope)


def cmd_bench(args) -> int:
    mine = _bench_single(args.scene, args.seed, args.ticks)
    if args.single_backend:
        _emit(mine)
        return EXIT_OK

    other = "python" if kernels.BACKEND == "compiled" else "compiled"
    env = dict(os.environ, SCENESIM_BACKEND=other)
    proc = subprocess.run(
        [sys.executable, "-m", "scenesim.cli", "bench", "--single-backend",
         "--scene", args.scene, "--seed", str(args.seed),
         "--ticks", str(args.ticks)],
        env=env, capture_output=True, text=True,
    )
    report = {"profile": "max_complexity", mine["backend"]: mine}
    if proc.returncode == 0:
        theirs = json.loads(proc.stdout)
        report[theirs["backend"]] = theirs
        report["speedup_compiled_over_python"] = (
            report["compiled"]["ticks_per_second"]
            / report["python"]["ticks_per_second"]
            if "compiled" in report and "python" in report else None
        )
        report["hashes_match"] = mine["final_hash"] == theirs["final_hash"]
    else:
        report["other_backend_error"] = proc.stderr.strip()
    _emit(report)
    return EXIT_OK


# ---- serve

def cmd_serve(args) -> int:
    from .server import serve_forever
    try:
        serve_forever(scene_ref=args.scene, seed=args.seed, host=args.host,
                      port=args.port, tcp_port=args.tcp_port,
                      http_port=args.http_port, log_dir=args.log_dir,
                      static_dir=args.static_dir)
    except (ScenarioFileError, ValueError) as exc:
        _err(f"cannot start: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"cannot bind: {exc}")
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenesim",
        description="Deterministic headless simulator for balance "
                    "rehabilitation scenes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a session headlessly")
    p.add_argument("--scene", default="city",
                   help="packaged scene name or scene JSON path")
    p.add_argument("--seed", type=int, default=42)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--ticks", type=int)
    group.add_argument("--duration", type=float, default=60.0,
                       help="seconds of simulated time (default 60)")
    p.add_argument("--out", help="write the session log here (JSONL)")
    p.add_argument("--script", help="JSONL of pose/param_change inputs")
    p.add_argument("--set", action="append", metavar="NAME=VALUE",
                   help="initial parameter override, repeatable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="verify a session log tick by tick")
    p.add_argument("log")
    p.add_argument("--scene-file", help="scene JSON if not packaged")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("validate", help="check a scene file and parameters")
    p.add_argument("--scene", required=True)
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="throughput and phase breakdown")
    p.add_argument("--scene", default="city")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--ticks", type=int, default=2700)
    p.add_argument("--single-backend", action="store_true",
                   help="measure only the active backend")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the realtime control service")
    p.add_argument("--scene", default="city")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7777,
                   help="WebSocket control port")
    p.add_argument("--tcp-port", type=int, default=7778,
                   help="newline-delimited JSON control port")
    p.add_argument("--http-port", type=int, default=7780,
                   help="schema and static console over HTTP")
    p.add_argument("--log-dir", help="write one session log per scene load")
    p.add_argument("--static-dir",
                   help="directory to host on the HTTP port (console build)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
