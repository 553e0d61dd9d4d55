"""Control service: protocol replies, visibility guarantees, transports."""

import asyncio
import json

import pytest

from scenesim.logio import read_log, replay_session
from scenesim.scenario import load_scene_file, packaged_scene_path
from scenesim.server import (
    SNAPSHOT_QUEUE_CAP,
    ControlService,
    _Client,
    _Outbox,
    serve_async,
)


def make_service(scene="ball_park", seed=5, log_dir=None):
    return ControlService(scene, seed, log_dir)


def send(service, client, **msg):
    return json.loads(service.handle_frame(client, json.dumps(msg)))


def drain_snapshots(client):
    frames = []
    while client.outbox._snapshots:
        frames.append(json.loads(client.outbox._snapshots.popleft()))
    return frames


def test_every_frame_gets_exactly_one_reply_with_matching_id():
    service = make_service()
    client = _Client("test")
    batch = [
        {"type": "subscribe", "client_msg_id": "a"},
        {"type": "start", "client_msg_id": 2},
        {"type": "set_param", "name": "speed", "value": 1, "client_msg_id": 3},
        {"type": "set_param", "name": "speed", "value": 77, "client_msg_id": 4},
        {"type": "nope", "client_msg_id": 5},
        {"type": "pause", "client_msg_id": 6},
    ]
    for msg in batch:
        reply = send(service, client, **msg)
        assert reply["client_msg_id"] == msg["client_msg_id"]
        assert reply["type"] in ("ack", "error")


def test_bad_frames_get_bad_message_errors():
    service = make_service()
    client = _Client("test")
    for raw in ("not json at all", "[1,2,3]", b"\xff\xfe garbage"):
        reply = json.loads(service.handle_frame(client, raw))
        assert reply["type"] == "error"
        assert reply["code"] == "bad_message"
        assert reply["client_msg_id"] is None
    reply = send(service, client, type="set_param", client_msg_id=1)
    assert reply["code"] == "bad_message"  # missing name
    reply = send(service, client, type="set_param", name="speed",
                 client_msg_id=2)
    assert reply["code"] == "bad_message"  # missing value
    reply = send(service, client, type="subscribe", rate=0, client_msg_id=3)
    assert reply["code"] == "bad_message"


def test_error_code_classification():
    service = make_service("city")
    client = _Client("test")
    cases = [
        ({"type": "set_param", "name": "nosuch", "value": 1}, "unknown_param"),
        ({"type": "set_param", "name": "scene", "value": "subway"},
         "unknown_param"),
        ({"type": "set_param", "name": "speed", "value": 9}, "out_of_range"),
        ({"type": "set_param", "name": "difficulty", "value": 2},
         "wrong_scene_scope"),
        ({"type": "launch_ball_override", "machine": 0}, "wrong_scene_scope"),
        ({"type": "bogus"}, "unknown_type"),
    ]
    for msg, code in cases:
        reply = send(service, client, client_msg_id=1, **msg)
        assert reply["type"] == "error" and reply["code"] == code, msg


def test_no_session_after_stop_and_recovery_via_load():
    service = make_service()
    client = _Client("test")
    assert send(service, client, type="stop", client_msg_id=1)["type"] == "ack"
    for mtype in ("start", "pause", "stop", "set_param",
                  "launch_ball_override"):
        reply = send(service, client, type=mtype, name="speed", value=1,
                     client_msg_id=2)
        assert reply["type"] == "error" and reply["code"] == "no_session"
    reply = send(service, client, type="load_scene", scene="airport",
                 client_msg_id=3)
    assert reply["type"] == "ack" and reply["scene"] == "airport"
    assert send(service, client, type="start",
                client_msg_id=4)["type"] == "ack"


def test_set_param_ack_names_tick_and_snapshot_visibility():
    service = make_service("city")
    client = _Client("test")
    service.clients.add(client)
    send(service, client, type="subscribe", rate=90, client_msg_id=1)
    send(service, client, type="start", client_msg_id=2)
    service.run_tick()
    before = drain_snapshots(client)
    assert before[-1]["state"]["params"]["speed"] == 0
    ack = send(service, client, type="set_param", name="speed", value=3,
               client_msg_id=3)
    applied_at = ack["tick"]
    assert applied_at == service.engine.tick + 1
    for _ in range(3):
        service.run_tick()
    frames = drain_snapshots(client)
    for frame in frames:
        expected = 3 if frame["tick"] >= applied_at else 0
        assert frame["state"]["params"]["speed"] == expected
    assert any(f["tick"] >= applied_at for f in frames)


def test_paused_change_applies_at_first_resumed_tick():
    service = make_service("city")
    client = _Client("test")
    service.clients.add(client)
    send(service, client, type="subscribe", rate=90, client_msg_id=1)
    ack = send(service, client, type="set_param", name="sound_level",
               value=1, client_msg_id=2)
    service.run_tick()  # paused: no-op
    assert service.engine.tick == 0
    send(service, client, type="start", client_msg_id=3)
    service.run_tick()
    frame = drain_snapshots(client)[-1]
    assert frame["tick"] == ack["tick"] == 1
    assert frame["state"]["params"]["sound_level"] == 1


def test_launch_override_fires_next_tick():
    service = make_service("ball_park")
    client = _Client("test")
    send(service, client, type="start", client_msg_id=1)
    ack = send(service, client, type="launch_ball_override", machine=2,
               client_msg_id=2)
    assert ack["type"] == "ack" and ack["machine"] == 2
    service.run_tick()
    assert [b.machine_id for b in service.engine.balls] == [2]
    reply = send(service, client, type="launch_ball_override", machine=7,
                 client_msg_id=3)
    assert reply["code"] == "out_of_range"


def test_snapshot_cadence_follows_rate():
    service = make_service("city")
    client = _Client("test")
    service.clients.add(client)
    send(service, client, type="subscribe", rate=30, client_msg_id=1)
    send(service, client, type="start", client_msg_id=2)
    for _ in range(10):
        service.run_tick()
    ticks = [f["tick"] for f in drain_snapshots(client)]
    assert ticks == [1, 4, 7, 10]
    send(service, client, type="unsubscribe", client_msg_id=3)
    for _ in range(5):
        service.run_tick()
    assert drain_snapshots(client) == []


def test_load_scene_rederives_streams_per_load():
    service = make_service("ball_park", seed=11)
    client = _Client("test")
    first = service.engine
    assert first.load_index == 0
    send(service, client, type="load_scene", scene="ball_park",
         client_msg_id=1)
    second = service.engine
    assert second.load_index == 1 and second.tick == 0
    # same master seed, different load counter: schedulers must differ
    assert first.master_seed == second.master_seed
    assert first._next_ball != second._next_ball


def test_load_scene_discards_queued_changes():
    service = make_service("city")
    client = _Client("test")
    send(service, client, type="set_param", name="speed", value=2,
         client_msg_id=1)
    send(service, client, type="load_scene", scene="city", client_msg_id=2)
    send(service, client, type="start", client_msg_id=3)
    service.run_tick()
    assert service.engine.params.speed == 0


def test_staged_validation_sees_queued_changes():
    service = make_service("ball_park")
    client = _Client("test")
    send(service, client, type="set_param", name="difficulty", value=4,
         client_msg_id=1)
    # staged params now carry difficulty=4 before any tick ran
    assert service.staged_params.difficulty == 4
    assert service.engine.params.difficulty == 0
    send(service, client, type="start", client_msg_id=2)
    service.run_tick()
    assert service.engine.params.difficulty == 4


def test_outbox_drops_oldest_snapshots_never_replies():
    box = _Outbox()
    box.put_reply("r1")
    for i in range(SNAPSHOT_QUEUE_CAP + 8):
        box.put_snapshot(f"s{i}")
    box.put_reply("r2")

    async def drain():
        out = []
        for _ in range(2 + SNAPSHOT_QUEUE_CAP):
            out.append(await box.get())
        return out

    frames = asyncio.run(drain())
    assert frames[0] == "r1" and frames[1] == "r2"
    assert frames[2] == "s8"  # the 8 oldest snapshots were shed
    assert frames[-1] == f"s{SNAPSHOT_QUEUE_CAP + 7}"


def test_server_log_replays_clean(tmp_path):
    service = make_service("ball_park", seed=9, log_dir=str(tmp_path))
    client = _Client("test")
    send(service, client, type="start", client_msg_id=1)
    for _ in range(50):
        service.run_tick()
    send(service, client, type="set_param", name="difficulty", value=2,
         client_msg_id=2)
    send(service, client, type="launch_ball_override", machine=1,
         client_msg_id=3)
    for _ in range(130):
        service.run_tick()
    send(service, client, type="stop", client_msg_id=4)
    log = tmp_path / "session-000-ball_park.jsonl"
    with open(log, encoding="utf-8") as fp:
        header, records = read_log(fp)
    assert header["load_index"] == 0 and header["master_seed"] == 9
    scene = load_scene_file(packaged_scene_path("ball_park"))
    assert replay_session(scene, header, records) == 2  # ticks 90 and 180


def run_ws_roundtrip():
    async def main():
        import websockets

        ready = asyncio.Event()
        task = asyncio.ensure_future(serve_async(
            scene_ref="city", seed=3, port=7921, tcp_port=7922,
            http_port=7923, ready=ready))
        try:
            await asyncio.wait_for(ready.wait(), 10)
            async with websockets.connect("ws://127.0.0.1:7921") as ws:
                await ws.send(json.dumps({"type": "subscribe", "rate": 30,
                                          "client_msg_id": 1}))
                ack = json.loads(await ws.recv())
                assert ack["type"] == "ack" and ack["every_ticks"] == 3
                await ws.send(json.dumps({"type": "start",
                                          "client_msg_id": 2}))
                assert json.loads(await ws.recv())["type"] == "ack"
                snap = json.loads(await ws.recv())
                assert snap["type"] == "snapshot"
                assert snap["state"]["scene"] == "city"
            reader, writer = await asyncio.open_connection("127.0.0.1", 7922)
            writer.write(b'{"type": "pause", "client_msg_id": 9}\n')
            await writer.drain()
            reply = json.loads(await reader.readline())
            assert reply == {"type": "ack", "client_msg_id": 9,
                             "tick": reply["tick"], "running": False}
            writer.close()
        finally:
            task.cancel()
    asyncio.run(main())


def test_ws_and_tcp_transports_speak_the_protocol():
    run_ws_roundtrip()


def test_http_serves_schema():
    async def main():
        import urllib.request

        ready = asyncio.Event()
        task = asyncio.ensure_future(serve_async(
            scene_ref="city", seed=3, port=7931, tcp_port=7932,
            http_port=7933, ready=ready))
        try:
            await asyncio.wait_for(ready.wait(), 10)
            schema = await asyncio.to_thread(
                lambda: json.load(urllib.request.urlopen(
                    "http://127.0.0.1:7933/schema.json")))
            assert schema["scenes"] == ["airport", "subway", "city",
                                        "ball_park"]
            assert schema["fields"]["difficulty"]["scenes"] == ["ball_park"]
            assert schema["protocol"]["tick_rate"] == 90
        finally:
            task.cancel()
    asyncio.run(main())


def test_wall_clock_loop_keeps_pace_under_message_load():
    async def main():
        import websockets

        ready = asyncio.Event()
        task = asyncio.ensure_future(serve_async(
            scene_ref="city", seed=3, port=7941, tcp_port=7942,
            http_port=7943, ready=ready))
        try:
            await asyncio.wait_for(ready.wait(), 10)
            async with websockets.connect("ws://127.0.0.1:7941") as ws:
                await ws.send(json.dumps({"type": "subscribe", "rate": 10,
                                          "client_msg_id": 0}))
                await ws.send(json.dumps({"type": "start",
                                          "client_msg_id": 1}))
                snap_ticks = []
                replies = 0

                async def reader():
                    nonlocal replies
                    async for raw in ws:
                        frame = json.loads(raw)
                        if frame["type"] == "snapshot":
                            snap_ticks.append(frame["tick"])
                        else:
                            replies += 1

                reading = asyncio.ensure_future(reader())
                for i in range(500):  # hostile junk while ticking
                    await ws.send(f"junk {i}")
                    if i % 50 == 0:
                        await asyncio.sleep(0.05)
                await asyncio.sleep(1.0)
                reading.cancel()
                assert replies == 502
                assert len(snap_ticks) >= 5
                deltas = {b - a for a, b in zip(snap_ticks, snap_ticks[1:])}
                assert deltas == {9}  # no tick gaps, no stalls
        finally:
            task.cancel()
    asyncio.run(main())


@pytest.mark.parametrize("scene", ["airport", "subway", "city", "ball_park"])
def test_service_hosts_every_packaged_scene(scene):
    service = make_service(scene)
    client = _Client("test")
    send(service, client, type="start", client_msg_id=1)
    for _ in range(45):
        service.run_tick()
    assert service.engine.tick == 45
