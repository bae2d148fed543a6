"""Acquisition server: sensor events over TCP, labels and time over HTTP.

TCP framing is one JSON object per line::

    {"kind": "start_session", "session": "<id>"}
    {"kind": "sensor_batch", "session": "<id>", "sensor": "gyroscope",
     "events": [{"t": 1480000000000, "x": 0.1, "y": 0.2, "z": 0.3}, ...]}
    {"kind": "end_session", "session": "<id>"}

Every line is answered with ``{"ok": true}`` or
``{"ok": false, "error": "..."}`` and the connection stays usable after an
error. Lines longer than 1 MiB are rejected.

HTTP routes:

``POST /session/<id>/label``
    body ``{"t": <ms>, "l": "<symbol>"}``; 200, 400 (bad body) or 404
    (no such open session).
``GET /time``
    current Unix time in ms as a bare decimal string.

``end_session`` sorts the buffered events by time (stable), writes the
session directory under the server's output directory and only then
acknowledges.
"""

from __future__ import annotations

import http.server
import json
import logging
import math
import os
import random
import re
import socket
import socketserver
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .core import (
    ACCELEROMETER,
    GYROSCOPE,
    SENSOR_KINDS,
    LabelEvent,
    RecordingSession,
    SensorEvent,
    TriaxialSeries,
    read_session,
    sort_events,
    write_session,
)

log = logging.getLogger(__name__)

MAX_LINE_BYTES = 1 << 20
SESSION_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,127}$")
LABEL_ROUTE_RE = re.compile(r"^/session/([^/]+)/label/?$")

Clock = Callable[[], int]


def system_clock() -> int:
    return time.time_ns() // 1_000_000


class ProtocolError(ValueError):
    pass


class UnknownSession(ProtocolError):
    pass


@dataclass
class _Buffers:
    gyroscope: list[SensorEvent] = field(default_factory=list)
    accelerometer: list[SensorEvent] = field(default_factory=list)
    labels: list[LabelEvent] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class ServerState:
    """Open sessions and where finished ones are written.

    The session map is guarded by one lock; each session's buffers have
    their own, so different sessions never wait on each other.
    """

    def __init__(self, output_dir: os.PathLike | str, clock: Clock = system_clock):
        self.output_dir = Path(output_dir)
        self.clock = clock
        self._sessions: dict[str, _Buffers] = {}
        self._lock = threading.Lock()

    def open_sessions(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def buffer_sizes(self, session_id: str) -> dict[str, int]:
        buf = self._get(session_id)
        with buf.lock:
            return {
                GYROSCOPE: len(buf.gyroscope),
                ACCELEROMETER: len(buf.accelerometer),
                "labels": len(buf.labels),
            }

    def _get(self, session_id: str) -> _Buffers:
        with self._lock:
            buf = self._sessions.get(session_id)
        if buf is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        return buf

    def start(self, session_id: str) -> None:
        _check_session_id(session_id)
        with self._lock:
            if session_id in self._sessions:
                raise ProtocolError(f"session {session_id!r} is already open")
            self._sessions[session_id] = _Buffers()

    def append_events(self, session_id: str, sensor: str, events: list[SensorEvent]) -> None:
        buf = self._get(session_id)
        with buf.lock:
            getattr(buf, sensor).extend(events)

    def append_label(self, session_id: str, label: LabelEvent) -> None:
        buf = self._get(session_id)
        with buf.lock:
            buf.labels.append(label)

    def end(self, session_id: str) -> Path:
        buf = self._get(session_id)
        with buf.lock:
            try:
                session = RecordingSession(
                    session_id,
                    _series(buf.gyroscope, GYROSCOPE),
                    _series(buf.accelerometer, ACCELEROMETER),
                    sort_events(buf.labels),
                )
            except ValueError as exc:
                raise ProtocolError(f"cannot close session {session_id!r}: {exc}") from None
            path = write_session(session, self.output_dir / session_id)
            with self._lock:
                del self._sessions[session_id]
        log.info("session %s persisted to %s", session_id, path)
        return path


def _series(events: list[SensorEvent], sensor: str) -> TriaxialSeries:
    if not events:
        return TriaxialSeries.empty(sensor)
    return TriaxialSeries.from_events(sort_events(events), sensor)


def _check_session_id(session_id) -> str:
    if not isinstance(session_id, str) or not SESSION_ID_RE.match(session_id) or session_id in (".", ".."):
        raise ProtocolError(f"invalid session id {session_id!r}")
    return session_id


def _finite_real(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProtocolError(f"{what} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise ProtocolError(f"{what} must be finite")
    return v


def _timestamp(v, what: str = "t") -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ProtocolError(f"{what} must be a non-negative integer")
    return v


def _parse_events(raw, sensor: str) -> list[SensorEvent]:
    if not isinstance(raw, list):
        raise ProtocolError("events must be a list")
    out = []
    for i, e in enumerate(raw):
        if not isinstance(e, dict):
            raise ProtocolError(f"event {i} is not an object")
        try:
            out.append(SensorEvent(
                _timestamp(e.get("t"), f"event {i} t"),
                _finite_real(e.get("x"), f"event {i} x"),
                _finite_real(e.get("y"), f"event {i} y"),
                _finite_real(e.get("z"), f"event {i} z"),
                sensor,
            ))
        except ProtocolError:
            raise
    return out


def handle_tcp_message(state: ServerState, line: bytes) -> dict:
    """Apply one protocol line to ``state`` and return the acknowledgement."""
    try:
        if len(line) > MAX_LINE_BYTES:
            raise ProtocolError(f"line exceeds {MAX_LINE_BYTES} bytes")
        try:
            msg = json.loads(line)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed JSON: {exc}") from None
        if not isinstance(msg, dict):
            raise ProtocolError("message must be a JSON object")
        kind = msg.get("kind")
        sid = msg.get("session")
        if not isinstance(sid, str):
            raise ProtocolError("missing session id")
        if kind == "start_session":
            state.start(sid)
        elif kind == "sensor_batch":
            sensor = msg.get("sensor")
            if sensor not in SENSOR_KINDS:
                raise ProtocolError(f"unknown sensor {sensor!r}")
            events = _parse_events(msg.get("events"), sensor)
            state.append_events(sid, sensor, events)
        elif kind == "end_session":
            state.end(sid)
        else:
            raise ProtocolError(f"unknown message kind {kind!r}")
    except ProtocolError as exc:
        return {"ok": False, "error": str(exc)}
    return {"ok": True}


def handle_label_post(state: ServerState, session_id: str, body: bytes) -> tuple[int, dict]:
    """Apply one label POST; returns (HTTP status, JSON body)."""
    try:
        try:
            msg = json.loads(body)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return 400, {"ok": False, "error": f"malformed JSON: {exc}"}
        if not isinstance(msg, dict):
            return 400, {"ok": False, "error": "body must be a JSON object"}
        label = msg.get("l")
        if not isinstance(label, str) or not label:
            return 400, {"ok": False, "error": "missing label field 'l'"}
        t = _timestamp(msg.get("t"))
        state.append_label(session_id, LabelEvent(t, label))
    except UnknownSession as exc:
        return 404, {"ok": False, "error": str(exc)}
    except ProtocolError as exc:
        return 400, {"ok": False, "error": str(exc)}
    return 200, {"ok": True}


def handle_time_request(clock: Clock = system_clock) -> str:
    """Current time in ms as a decimal string (13 digits until 2286)."""
    return str(int(clock()))


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        state: ServerState = self.server.state
        while True:
            line = self.rfile.readline(MAX_LINE_BYTES + 1)
            if not line:
                return
            if len(line) > MAX_LINE_BYTES and not line.endswith(b"\n"):
                # Drop the remainder of the oversized line.
                while True:
                    rest = self.rfile.readline(MAX_LINE_BYTES)
                    if not rest or rest.endswith(b"\n"):
                        break
                ack = {"ok": False, "error": f"line exceeds {MAX_LINE_BYTES} bytes"}
            elif not line.strip():
                continue
            else:
                ack = handle_tcp_message(state, line.rstrip(b"\r\n"))
            self.wfile.write(json.dumps(ack).encode() + b"\n")
            self.wfile.flush()


class _HttpHandler(http.server.BaseHTTPRequestHandler):
    server_version = "motionkeys"

    def log_message(self, fmt, *args):
        log.debug("http %s " + fmt, self.client_address[0], *args)

    def _send(self, status: int, body: bytes, ctype: str):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, obj: dict):
        self._send(status, json.dumps(obj).encode(), "application/json")

    def do_GET(self):
        if self.path.rstrip("/") == "/time":
            self._send(200, handle_time_request(self.server.state.clock).encode(), "text/plain")
        else:
            self._json(404, {"ok": False, "error": "not found"})

    def do_POST(self):
        m = LABEL_ROUTE_RE.match(self.path)
        if not m:
            self._json(404, {"ok": False, "error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            length = -1
        if not 0 <= length <= MAX_LINE_BYTES:
            self._json(400, {"ok": False, "error": "bad Content-Length"})
            return
        status, body = handle_label_post(self.server.state, m.group(1), self.rfile.read(length))
        self._json(status, body)


class _ThreadingTcpServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class _ThreadingHttpServer(http.server.ThreadingHTTPServer):
    daemon_threads = True


class AcquisitionServer:
    """Both channels on background threads; use as a context manager.

    Port 0 picks a free port; the bound addresses are in ``tcp_address``
    and ``http_address`` after :meth:`start`.
    """

    def __init__(self, output_dir, host: str = "127.0.0.1", tcp_port: int = 0, http_port: int = 0,
                 clock: Clock = system_clock):
        self.state = ServerState(output_dir, clock)
        self._tcp = _ThreadingTcpServer((host, tcp_port), _TcpHandler, bind_and_activate=False)
        self._http = _ThreadingHttpServer((host, http_port), _HttpHandler, bind_and_activate=False)
        self._tcp.state = self.state
        self._http.state = self.state
        self._threads: list[threading.Thread] = []

    @property
    def tcp_address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    @property
    def http_address(self) -> tuple[str, int]:
        return self._http.server_address[:2]

    def start(self) -> AcquisitionServer:
        for srv in (self._tcp, self._http):
            srv.server_bind()
            srv.server_activate()
            t = threading.Thread(target=srv.serve_forever, daemon=True)
            t.start()
            self._threads.append(t)
        log.info("listening: tcp %s:%d, http %s:%d", *self.tcp_address, *self.http_address)
        return self

    def stop(self) -> None:
        for srv in (self._tcp, self._http):
            if self._threads:
                srv.shutdown()
            srv.server_close()
        for t in self._threads:
            t.join()
        self._threads.clear()

    def serve_forever(self) -> None:
        self.start()
        try:
            while True:
                time.sleep(3600)
        finally:
            self.stop()

    def __enter__(self) -> AcquisitionServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class ReplayError(RuntimeError):
    pass


class _Client:
    def __init__(self, address, timeout: float):
        try:
            self.sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise ReplayError(f"cannot connect to {address}: {exc}") from None
        self.reader = self.sock.makefile("rb")

    def send(self, msg: dict) -> None:
        try:
            self.sock.sendall(json.dumps(msg).encode() + b"\n")
            reply = self.reader.readline()
        except OSError as exc:
            raise ReplayError(f"network failure: {exc}") from None
        if not reply:
            raise ReplayError("server closed the connection")
        ack = json.loads(reply)
        if not ack.get("ok"):
            raise ReplayError(f"server rejected {msg['kind']}: {ack.get('error')}")

    def close(self):
        self.reader.close()
        self.sock.close()


def _post_label(http_address, session_id: str, label: LabelEvent, timeout: float) -> None:
    host, port = http_address
    url = f"http://{host}:{port}/session/{session_id}/label"
    body = json.dumps({"t": label.t, "l": label.label}).encode()
    req = urllib.request.Request(url, data=body, method="POST", headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            resp.read()
    except urllib.error.HTTPError as exc:
        raise ReplayError(f"label rejected: HTTP {exc.code} {exc.read().decode(errors='replace')}") from None
    except OSError as exc:
        raise ReplayError(f"network failure: {exc}") from None


def _batches(events: list[dict], rng: random.Random, max_batch: int) -> list[list[dict]]:
    out, i = [], 0
    while i < len(events):
        n = rng.randint(1, max_batch)
        out.append(events[i:i + n])
        i += n
    return out


def _event_dicts(series: TriaxialSeries) -> list[dict]:
    return [
        {"t": int(t), "x": float(x), "y": float(y), "z": float(z)}
        for t, x, y, z in zip(series.timestamps.tolist(), series.x.tolist(), series.y.tolist(), series.z.tolist())
    ]


def replay_session(
    source: RecordingSession | os.PathLike | str,
    tcp_address: tuple[str, int],
    http_address: tuple[str, int],
    *,
    seed: int = 0,
    max_batch: int = 64,
    shuffle_batches: bool = False,
    session_id: str | None = None,
    timeout: float = 30.0,
) -> None:
    """Stream a stored session through the server as a wearable would.

    Each sensor's events are cut into batches of random size (1 to
    ``max_batch``) and the two sensors' batches are interleaved at random;
    ``shuffle_batches`` additionally sends batches out of time order.
    Labels are posted over HTTP between sensor batches. Raises
    :class:`ReplayError` on any network failure or rejection.
    """
    session = source if isinstance(source, RecordingSession) else read_session(source)
    sid = session_id or session.session_id
    rng = random.Random(seed)
    queues = [
        [(GYROSCOPE, b) for b in _batches(_event_dicts(session.gyroscope), rng, max_batch)],
        [(ACCELEROMETER, b) for b in _batches(_event_dicts(session.accelerometer), rng, max_batch)],
    ]
    if shuffle_batches:
        for q in queues:
            rng.shuffle(q)
    plan = []
    while queues[0] or queues[1]:
        pick = rng.choice([q for q in queues if q])
        plan.append(pick.pop(0))
    labels = list(session.labels)
    # Labels go out in order, spread over the batch stream.
    label_slots = sorted(rng.randint(0, len(plan)) for _ in labels)

    client = _Client(tcp_address, timeout)
    try:
        client.send({"kind": "start_session", "session": sid})
        li = 0
        for i, (sensor, events) in enumerate(plan):
            while li < len(labels) and label_slots[li] <= i:
                _post_label(http_address, sid, labels[li], timeout)
                li += 1
            client.send({"kind": "sensor_batch", "session": sid, "sensor": sensor, "events": events})
        for lab in labels[li:]:
            _post_label(http_address, sid, lab, timeout)
        client.send({"kind": "end_session", "session": sid})
    finally:
        client.close()
