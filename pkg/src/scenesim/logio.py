"""Session logs: JSONL writing, reading, and bit-exact replay.

A log is one header line followed by one JSON object per record.  The
header pins everything a replay needs (seed, scenario, timestep); the
records carry external inputs (poses, parameter changes), notable
events, and periodic state hashes.  Replay rebuilds the session from
the header, feeds the inputs back in, and checks every logged hash.
"""

from __future__ import annotations

import json
from collections import defaultdict

from .engine import SNAPSHOT_HASH_INTERVAL, DT, SessionEngine
from .scenario import ScenarioParams

FORMAT_VERSION = 1

RECORD_KINDS = ("pose", "param_change", "event", "snapshot_hash")


class LogFormatError(ValueError):
    """Structurally bad log: not JSONL, bad header, or bad record."""


class UnsupportedFormatError(LogFormatError):
    """Readable log written by an incompatible format version."""


class ReplayDivergence(Exception):
    """State hash mismatch while replaying a log."""

    def __init__(self, tick: int, expected: str, actual: str):
        super().__init__(
            f"replay diverged at tick {tick}: logged hash {expected}, "
            f"computed {actual}"
        )
        self.tick = tick
        self.expected = expected
        self.actual = actual


def make_header(engine: SessionEngine) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "master_seed": engine.master_seed,
        "load_index": engine.load_index,
        "scenario": engine.params.to_dict(),
        "dt": DT,
    }


class LogWriter:
    """Streams header plus records to a file object as JSONL."""

    def __init__(self, fp, engine: SessionEngine):
        self._fp = fp
        self._line(make_header(engine))

    def _line(self, obj: dict) -> None:
        self._fp.write(json.dumps(obj, sort_keys=True, separators=(",", ":")))
        self._fp.write("\n")

    def write(self, record: dict) -> None:
        self._line(record)

    def write_all(self, records) -> None:
        for record in records:
            self._line(record)


def read_log(fp) -> tuple[dict, list[dict]]:
    """(header, records) from a JSONL log; raises LogFormatError on junk."""
    header = None
    records = []
    for lineno, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {lineno}: not JSON: {exc}") from exc
        if header is None:
            if "format_version" not in obj:
                raise LogFormatError("line 1: header missing format_version")
            header = obj
            continue
        kind = obj.get("kind")
        if kind not in RECORD_KINDS:
            raise LogFormatError(f"line {lineno}: unknown record kind {kind!r}")
        if not isinstance(obj.get("tick"), int) or obj["tick"] < 1:
            raise LogFormatError(f"line {lineno}: bad tick {obj.get('tick')!r}")
        records.append(obj)
    if header is None:
        raise LogFormatError("empty log: no header line")
    if header["format_version"] != FORMAT_VERSION:
        raise UnsupportedFormatError(
            f"log format_version {header['format_version']}, "
            f"this build reads {FORMAT_VERSION}"
        )
    return header, records


def split_inputs(records) -> tuple[dict, dict, dict]:
    """Input records keyed by tick:
    ({tick: pose}, {tick: [(name, value)]}, {tick: [machine]}).

    Poses, applied parameter changes, and operator-forced launches drive
    state; other events and hashes are outputs and are ignored here.
    """
    poses = {}
    changes = defaultdict(list)
    launches = defaultdict(list)
    for rec in records:
        if rec["kind"] == "pose":
            poses[rec["tick"]] = rec
        elif rec["kind"] == "param_change":
            changes[rec["tick"]].append((rec["name"], rec["value"]))
        elif rec["kind"] == "event" and rec.get("forced"):
            launches[rec["tick"]].append(rec["machine"])
    return poses, dict(changes), dict(launches)


def run_session(engine: SessionEngine, ticks: int, script_records=(),
                writer: LogWriter | None = None,
                on_records=None) -> list[dict]:
    """Drive an engine for a tick count, feeding scripted inputs.

    Returns every record produced, including the final state hash that
    closes the session when the run does not end on the periodic cadence.
    """
    poses, changes, launches = split_inputs(script_records)
    out = []
    for _ in range(ticks):
        n = engine.tick + 1
        produced = engine.step(pose=poses.get(n), changes=changes.get(n, ()),
                               launches=launches.get(n, ()))
        out.extend(produced)
        if writer is not None:
            writer.write_all(produced)
        if on_records is not None:
            on_records(produced)
    if engine.tick % SNAPSHOT_HASH_INTERVAL != 0:
        final = engine.hash_record()
        out.append(final)
        if writer is not None:
            writer.write(final)
        if on_records is not None:
            on_records([final])
    return out


def replay_session(scene, header: dict, records) -> int:
    """Re-run a logged session and verify every state hash in it.

    Returns the number of hashes checked; raises ReplayDivergence at the
    first tick whose recomputed hash differs from the log.
    """
    params = ScenarioParams.from_dict(header["scenario"])
    engine = SessionEngine(scene, params, header["master_seed"],
                           header.get("load_index", 0))
    poses, changes, launches = split_inputs(records)
    hashes = {}
    for rec in records:
        if rec["kind"] == "snapshot_hash":
            hashes[rec["tick"]] = rec["hash"]
    last_tick = max((rec["tick"] for rec in records), default=0)
    checked = 0
    for _ in range(last_tick):
        n = engine.tick + 1
        engine.step(pose=poses.get(n), changes=changes.get(n, ()),
                    launches=launches.get(n, ()))
        expected = hashes.get(n)
        if expected is not None:
            actual = engine.snapshot_hash()
            if actual != expected:
                raise ReplayDivergence(n, expected, actual)
            checked += 1
    return checked
