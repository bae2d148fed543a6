from __future__ import annotations

import json
import socket
import urllib.error
import urllib.request

import pytest

from motionkeys.core import ACCELEROMETER, LabelEvent, RecordingSession, TriaxialSeries, read_session
from motionkeys.server import (
    MAX_LINE_BYTES,
    AcquisitionServer,
    ReplayError,
    ServerState,
    handle_label_post,
    handle_tcp_message,
    handle_time_request,
    replay_session,
)
from motionkeys.synthgen import SynthConfig, generate_session


@pytest.fixture
def server(tmp_path):
    with AcquisitionServer(tmp_path / "out") as srv:
        yield srv


def _msg(**kw) -> bytes:
    return json.dumps(kw).encode()


def test_state_machine(tmp_path):
    st = ServerState(tmp_path, clock=lambda: 1480000000123)
    assert handle_tcp_message(st, _msg(kind="start_session", session="a")) == {"ok": True}
    assert not handle_tcp_message(st, _msg(kind="start_session", session="a"))["ok"]
    ev = [{"t": 2, "x": 1.5, "y": 0, "z": -1}, {"t": 1, "x": 0.5, "y": 0, "z": 0}]
    assert handle_tcp_message(st, _msg(kind="sensor_batch", session="a", sensor="gyroscope", events=ev))["ok"]
    assert handle_label_post(st, "a", b'{"t": 1, "l": "5"}') == (200, {"ok": True})
    assert st.buffer_sizes("a") == {"gyroscope": 2, "accelerometer": 0, "labels": 1}
    assert handle_tcp_message(st, _msg(kind="end_session", session="a"))["ok"]
    s = read_session(tmp_path / "a")
    assert s.gyroscope.timestamps.tolist() == [1, 2] and s.labels == (LabelEvent(1, "5"),)
    assert st.open_sessions() == []
    assert handle_time_request(lambda: 1480000000123) == "1480000000123"


@pytest.mark.parametrize(
    "line",
    [
        b"not json",
        b"[1, 2]",
        _msg(kind="bogus", session="a"),
        _msg(kind="sensor_batch", session="a", sensor="magnetometer", events=[]),
        _msg(kind="sensor_batch", session="a", sensor="gyroscope", events=[{"t": 1, "x": "1", "y": 0, "z": 0}]),
        _msg(kind="sensor_batch", session="a", sensor="gyroscope", events=[{"t": -1, "x": 1, "y": 0, "z": 0}]),
        _msg(kind="sensor_batch", session="nope", sensor="gyroscope", events=[]),
        _msg(kind="start_session", session="../escape"),
    ],
)
def test_bad_lines_are_rejected(tmp_path, line):
    st = ServerState(tmp_path)
    handle_tcp_message(st, _msg(kind="start_session", session="a"))
    ack = handle_tcp_message(st, line)
    assert ack["ok"] is False and ack["error"]


def test_label_post_errors(tmp_path):
    st = ServerState(tmp_path)
    st.start("a")
    assert handle_label_post(st, "a", b"{")[0] == 400
    assert handle_label_post(st, "a", b'{"t": 1}')[0] == 400
    assert handle_label_post(st, "a", b'{"t": 1.5, "l": "1"}')[0] == 400
    assert handle_label_post(st, "b", b'{"t": 1, "l": "1"}')[0] == 404


def _post(srv, path, body: bytes):
    req = urllib.request.Request(f"http://{srv.http_address[0]}:{srv.http_address[1]}{path}", data=body)
    try:
        with urllib.request.urlopen(req, timeout=5) as r:
            return r.status
    except urllib.error.HTTPError as exc:
        return exc.code


def test_http_routes(server):
    host, port = server.http_address
    with urllib.request.urlopen(f"http://{host}:{port}/time", timeout=5) as r:
        body = r.read().decode()
    assert body.isdigit() and len(body) == 13
    server.state.start("live")
    assert _post(server, "/session/live/label", b'{"t": 5, "l": "#"}') == 200
    assert _post(server, "/session/live/label", b"{oops") == 400
    assert _post(server, "/session/ghost/label", b'{"t": 5, "l": "#"}') == 404
    assert _post(server, "/elsewhere", b"{}") == 404


def test_oversize_line_keeps_connection(server):
    with socket.create_connection(server.tcp_address, timeout=10) as sock:
        f = sock.makefile("rwb")
        f.write(b"x" * (MAX_LINE_BYTES + 10) + b"\n")
        f.write(_msg(kind="start_session", session="after") + b"\n")
        f.flush()
        first = json.loads(f.readline())
        second = json.loads(f.readline())
    assert first["ok"] is False and "exceeds" in first["error"]
    assert second == {"ok": True}


@pytest.mark.parametrize("seed,max_batch,shuffle", [(0, 1, False), (1, 7, True), (2, 64, True), (3, 500, False)])
def test_replay_round_trip(server, seed, max_batch, shuffle):
    cfg = SynthConfig(seed=seed, instances_per_key=2)
    s = generate_session(cfg, session_id=f"replay-{seed}")
    replay_session(s, server.tcp_address, server.http_address, seed=seed, max_batch=max_batch, shuffle_batches=shuffle)
    assert read_session(server.state.output_dir / s.session_id) == s


def test_replay_from_disk_with_empty_sensor(server, tmp_path):
    from motionkeys.core import write_session

    s = RecordingSession(
        "sparse", TriaxialSeries([5, 9], [0.1, 0.2], [0.0, 1e-300], [3.0, -3.0]), TriaxialSeries.empty(ACCELEROMETER)
    )
    write_session(s, tmp_path / "sparse")
    replay_session(tmp_path / "sparse", server.tcp_address, server.http_address)
    assert read_session(server.state.output_dir / "sparse") == s


def test_replay_rejection_raises(server):
    s = generate_session(SynthConfig(instances_per_key=1), session_id="dup")
    server.state.start("dup")
    with pytest.raises(ReplayError):
        replay_session(s, server.tcp_address, server.http_address)
    with pytest.raises(ReplayError):
        replay_session(s, ("127.0.0.1", 1), server.http_address, timeout=1)
