"""Realtime control service.

Drives one session at wall-clock 90 Hz and exposes it three ways: a
WebSocket endpoint and a newline-delimited JSON TCP endpoint speaking the
same control protocol (see docs/protocol.md), and a small HTTP endpoint
serving the parameter schema plus an optional static console build.

Every inbound control message is answered by exactly one ack or error
frame echoing its client_msg_id.  State snapshots stream to subscribed
clients on a per-client cadence; a slow client loses oldest snapshots
first and never stalls the tick loop or other clients.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
import os
import threading
from collections import deque
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer

from .engine import DT, SessionEngine, TICK_RATE
from .logio import LogWriter
from .scenario import (
    SCENES,
    apply_change,
    control_schema,
    load_scene_file,
    packaged_scene_path,
)

DEFAULT_SNAPSHOT_RATE = 10  # Hz
SNAPSHOT_QUEUE_CAP = 32
MAX_CATCHUP_TICKS = 8  # ticks run back-to-back after a scheduling hiccup

MESSAGE_TYPES = (
    "set_param", "load_scene", "start", "pause", "stop",
    "launch_ball_override", "subscribe", "unsubscribe",
)


def _error_code(message: str) -> str:
    """Protocol error code for a parameter validation message."""
    if "unknown parameter" in message or "via load_scene" in message:
        return "unknown_param"
    if "not applicable" in message or "only applies to" in message:
        return "wrong_scene_scope"
    return "out_of_range"


class _Outbox:
    """Per-client outbound frames: replies are reliable, snapshots are a
    bounded deque that silently sheds its oldest entries under pressure."""

    def __init__(self):
        self._replies = deque()
        self._snapshots = deque(maxlen=SNAPSHOT_QUEUE_CAP)
        self._ready = asyncio.Event()

    def put_reply(self, frame: str) -> None:
        self._replies.append(frame)
        self._ready.set()

    def put_snapshot(self, frame: str) -> None:
        self._snapshots.append(frame)
        self._ready.set()

    async def get(self) -> str:
        while True:
            if self._replies:
                return self._replies.popleft()
            if self._snapshots:
                return self._snapshots.popleft()
            self._ready.clear()
            await self._ready.wait()


class _Client:
    _ids = itertools.count(1)

    def __init__(self, transport: str):
        self.id = next(self._ids)
        self.transport = transport
        self.outbox = _Outbox()
        self.snapshot_every: int | None = None
        self.next_snapshot_at = 0


class ControlService:
    """Protocol state machine plus the session it controls."""

    def __init__(self, scene_ref: str, seed: int, log_dir: str | None = None):
        self.seed = seed
        self.log_dir = log_dir
        self.load_count = 0
        self.clients: set[_Client] = set()
        self.engine: SessionEngine | None = None
        self.scene = None
        self.running = False
        self.staged_params = None
        self._queued_changes: list[tuple[str, object]] = []
        self._queued_launches: list[int] = []
        self._log_fp = None
        self._log_writer = None
        self._load_scene(scene_ref)

    # ---- session lifecycle

    def _load_scene(self, scene_ref: str) -> None:
        path = (packaged_scene_path(scene_ref) if scene_ref in SCENES
                else scene_ref)
        scene = load_scene_file(path)
        engine = SessionEngine(scene, scene.params, self.seed,
                               load_index=self.load_count)
        self._close_log()
        self.load_count += 1
        self.scene = scene
        self.engine = engine
        self.running = False
        self.staged_params = engine.params
        self._queued_changes.clear()
        self._queued_launches.clear()
        if self.log_dir:
            os.makedirs(self.log_dir, exist_ok=True)
            name = f"session-{engine.load_index:03d}-{scene.scene}.jsonl"
            self._log_fp = open(os.path.join(self.log_dir, name), "w",
                                encoding="utf-8")
            self._log_writer = LogWriter(self._log_fp, engine)

    def _close_log(self) -> None:
        if self._log_fp is not None:
            if self.engine is not None and self.engine.tick % 90 != 0 \
                    and self.engine.tick > 0:
                self._log_writer.write(self.engine.hash_record())
            self._log_fp.close()
            self._log_fp = None
            self._log_writer = None

    def _stop_session(self) -> None:
        self._close_log()
        self.engine = None
        self.scene = None
        self.running = False
        self.staged_params = None
        self._queued_changes.clear()
        self._queued_launches.clear()

    # ---- tick driving

    def run_tick(self) -> None:
        """One engine tick with whatever inputs the clients queued."""
        if self.engine is None or not self.running:
            return
        changes = tuple(self._queued_changes)
        launches = tuple(self._queued_launches)
        self._queued_changes.clear()
        self._queued_launches.clear()
        records = self.engine.step(changes=changes, launches=launches)
        if self._log_writer is not None:
            self._log_writer.write_all(records)
            self._log_fp.flush()
        self._fan_out(records)

    def _fan_out(self, records) -> None:
        engine = self.engine
        events = [r for r in records if r["kind"] == "event"]
        frame = None
        for client in self.clients:
            if client.snapshot_every is None:
                continue
            if engine.tick < client.next_snapshot_at:
                continue
            if frame is None:
                frame = json.dumps({
                    "type": "snapshot",
                    "tick": engine.tick,
                    "running": self.running,
                    "events": events,
                    "state": engine.snapshot(),
                }, sort_keys=True, separators=(",", ":"))
            client.outbox.put_snapshot(frame)
            client.next_snapshot_at = engine.tick + client.snapshot_every

    # ---- message handling

    def handle_frame(self, client: _Client, raw) -> str:
        """One reply frame (ack or error) for one inbound frame."""
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError, ValueError):
            return self._error(None, "bad_message", "frame is not JSON")
        if not isinstance(msg, dict):
            return self._error(None, "bad_message", "frame is not an object")
        cid = msg.get("client_msg_id")
        if not (cid is None or isinstance(cid, (str, int))):
            return self._error(None, "bad_message",
                               "client_msg_id must be a string or integer")
        mtype = msg.get("type")
        if mtype not in MESSAGE_TYPES:
            return self._error(cid, "unknown_type",
                               f"unknown message type {mtype!r}")
        handler = getattr(self, f"_msg_{mtype}")
        return handler(client, cid, msg)

    def _ack(self, cid, **extra) -> str:
        tick = self.engine.tick if self.engine is not None else None
        return json.dumps({"type": "ack", "client_msg_id": cid,
                           "tick": tick, **extra}, sort_keys=True)

    def _error(self, cid, code: str, message: str) -> str:
        return json.dumps({"type": "error", "client_msg_id": cid,
                           "code": code, "message": message}, sort_keys=True)

    def _msg_set_param(self, client, cid, msg) -> str:
        if self.engine is None:
            return self._error(cid, "no_session", "no scene is loaded")
        name = msg.get("name")
        if not isinstance(name, str):
            return self._error(cid, "bad_message", "set_param needs a name")
        if "value" not in msg:
            return self._error(cid, "bad_message", "set_param needs a value")
        staged, error = apply_change(self.staged_params, name, msg["value"])
        if error is not None:
            return self._error(cid, _error_code(error), error)
        self.staged_params = staged
        self._queued_changes.append((name, msg["value"]))
        # applies during the next executed tick; snapshots from that tick
        # on are guaranteed to reflect it
        return json.dumps({"type": "ack", "client_msg_id": cid,
                           "tick": self.engine.tick + 1, "name": name},
                          sort_keys=True)

    def _msg_load_scene(self, client, cid, msg) -> str:
        ref = msg.get("scene")
        if ref not in SCENES:
            return self._error(cid, "bad_message",
                               f"scene must be one of {list(SCENES)}")
        self._load_scene(ref)
        return self._ack(cid, scene=ref, load_index=self.engine.load_index)

    def _msg_start(self, client, cid, msg) -> str:
        if self.engine is None:
            return self._error(cid, "no_session", "no scene is loaded")
        self.running = True
        return self._ack(cid, running=True)

    def _msg_pause(self, client, cid, msg) -> str:
        if self.engine is None:
            return self._error(cid, "no_session", "no scene is loaded")
        self.running = False
        return self._ack(cid, running=False)

    def _msg_stop(self, client, cid, msg) -> str:
        if self.engine is None:
            return self._error(cid, "no_session", "no scene is loaded")
        final_tick = self.engine.tick
        self._stop_session()
        return json.dumps({"type": "ack", "client_msg_id": cid,
                           "tick": final_tick, "running": False,
                           "stopped": True}, sort_keys=True)

    def _msg_launch_ball_override(self, client, cid, msg) -> str:
        if self.engine is None:
            return self._error(cid, "no_session", "no scene is loaded")
        if not self.scene.machines:
            return self._error(
                cid, "wrong_scene_scope",
                f"scene {self.scene.scene} has no ball machines")
        machine = msg.get("machine", 0)
        if not (isinstance(machine, int) and not isinstance(machine, bool)
                and 0 <= machine < len(self.scene.machines)):
            return self._error(
                cid, "out_of_range",
                f"machine must be 0..{len(self.scene.machines) - 1}")
        self._queued_launches.append(machine)
        return json.dumps({"type": "ack", "client_msg_id": cid,
                           "tick": self.engine.tick + 1, "machine": machine},
                          sort_keys=True)

    def _msg_subscribe(self, client, cid, msg) -> str:
        rate = msg.get("rate", DEFAULT_SNAPSHOT_RATE)
        if not (isinstance(rate, int) and not isinstance(rate, bool)
                and 1 <= rate <= TICK_RATE):
            return self._error(cid, "bad_message",
                               f"rate must be an integer 1..{TICK_RATE}")
        client.snapshot_every = math.ceil(TICK_RATE / rate)
        client.next_snapshot_at = 0  # next tick emits immediately
        return self._ack(cid, every_ticks=client.snapshot_every)

    def _msg_unsubscribe(self, client, cid, msg) -> str:
        client.snapshot_every = None
        return self._ack(cid)


# ---- transports

async def _client_writer(service, client, send) -> None:
    while True:
        frame = await client.outbox.get()
        await send(frame)


async def _serve_ws_client(service: ControlService, websocket) -> None:
    client = _Client("ws")
    service.clients.add(client)
    writer = asyncio.ensure_future(_client_writer(service, client,
                                                  websocket.send))
    try:
        async for raw in websocket:
            client.outbox.put_reply(service.handle_frame(client, raw))
    finally:
        writer.cancel()
        service.clients.discard(client)


async def _serve_tcp_client(service: ControlService, reader, writer) -> None:
    client = _Client("tcp")
    service.clients.add(client)

    async def send(frame: str) -> None:
        writer.write(frame.encode("utf-8") + b"\n")
        await writer.drain()

    sender = asyncio.ensure_future(_client_writer(service, client, send))
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            if not line.strip():
                continue
            client.outbox.put_reply(service.handle_frame(client, line))
    finally:
        sender.cancel()
        service.clients.discard(client)
        writer.close()


async def _tick_loop(service: ControlService) -> None:
    loop = asyncio.get_running_loop()
    deadline = loop.time()
    while True:
        deadline += DT
        behind = loop.time() - deadline
        if behind > 0:
            # run catch-up ticks back to back, but bound the burst and
            # drop the remainder so a long stall cannot snowball
            burst = min(int(behind / DT), MAX_CATCHUP_TICKS)
            for _ in range(burst):
                service.run_tick()
            deadline = loop.time()
        else:
            await asyncio.sleep(-behind)
        service.run_tick()


def _start_http(service: ControlService, host: str, port: int,
                static_dir: str | None):
    """Schema endpoint (and optional static console) on a daemon thread."""
    schema = json.dumps({
        **control_schema(),
        "protocol": {
            "message_types": list(MESSAGE_TYPES),
            "tick_rate": TICK_RATE,
            "default_snapshot_rate": DEFAULT_SNAPSHOT_RATE,
        },
    }, sort_keys=True).encode("utf-8")

    class Handler(SimpleHTTPRequestHandler):
        def __init__(self, *args, **kwargs):
            directory = static_dir if static_dir else os.getcwd()
            super().__init__(*args, directory=directory, **kwargs)

        def do_GET(self):
            if self.path in ("/schema.json", "/schema"):
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(schema)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(schema)
                return
            if static_dir is None:
                self.send_error(404, "no static console build configured")
                return
            super().do_GET()

        def log_message(self, *args):
            pass  # keep stderr for real diagnostics

    httpd = ThreadingHTTPServer((host, port), Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return httpd


async def serve_async(scene_ref: str = "city", seed: int = 42,
                      host: str = "127.0.0.1", port: int = 7777,
                      tcp_port: int = 7778, http_port: int = 7780,
                      log_dir: str | None = None,
                      static_dir: str | None = None,
                      ready: asyncio.Event | None = None) -> None:
    import websockets.asyncio.server

    service = ControlService(scene_ref, seed, log_dir)
    httpd = _start_http(service, host, http_port, static_dir)
    tcp_server = await asyncio.start_server(
        partial(_serve_tcp_client, service), host, tcp_port)
    ticker = asyncio.ensure_future(_tick_loop(service))
    try:
        async with websockets.asyncio.server.serve(
                partial(_serve_ws_client, service), host, port):
            if ready is not None:
                ready.set()
            await asyncio.Future()  # runs until cancelled
    finally:
        ticker.cancel()
        tcp_server.close()
        httpd.shutdown()
        service._close_log()


def serve_forever(scene_ref: str = "city", seed: int = 42,
                  host: str = "127.0.0.1", port: int = 7777,
                  tcp_port: int = 7778, http_port: int = 7780,
                  log_dir: str | None = None,
                  static_dir: str | None = None) -> None:
    try:
        asyncio.run(serve_async(scene_ref, seed, host, port, tcp_port,
                                http_port, log_dir, static_dir))
    except KeyboardInterrupt:
        pass
