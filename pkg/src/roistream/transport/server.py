"""Ingest/publish server: accepts posted frames, warps per the active quad,
and serves the latest view per session over HTTP."""
from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable

from ..detectors import DetectorKind, RoiCandidate
from ..errors import (
    DecodeFailure,
    EmptyRegion,
    MalformedPacket,
    StaleFrame,
    StaleSeq,
    UnknownSession,
)
from ..geometry import OutputSpec, Quad, crop_axis_aligned, warp_crop
from ..imaging import Frame, decode_frame, encode_frame
from ..session import Session, SessionConfig
from .protocol import (
    FramePacket,
    PublishedView,
    validate_event,
    validate_session_id,
)

log = logging.getLogger(__name__)


def _now_ms() -> int:
    return int(time.monotonic() * 1000)


class ServerSession:
    """Per-session state: a control-driven state machine, the latest decoded
    frame, and the atomically replaced published view. All access is
    serialized by ``self.lock``; queued control events are applied (drained)
    before any read or ingest touches the state."""

    def __init__(self, session_id: str, output_spec: OutputSpec, quality: int):
        self.session_id = session_id
        self.lock = threading.RLock()
        self.output_spec = output_spec
        self.quality = quality
        # the server machine only tracks state; it dispatches no consumers
        self.machine = Session(
            SessionConfig(detecting=False, streaming=False, recording=False,
                          initial_mode=DetectorKind.MANUAL)
        )
        self.inbox: deque[tuple[dict, int]] = deque()
        self.published: PublishedView | None = None
        self.last_frame: Frame | None = None
        self.raw_jpeg: bytes | None = None
        self._packet_quad: Quad | None = None
        self.accepted = 0
        self.rejected = 0
        self.on_publish: Callable[[PublishedView], None] | None = None

    # -- control inbox ---------------------------------------------------

    def enqueue(self, event: dict) -> None:
        with self.lock:
            self.inbox.append((event, _now_ms()))

    def _drain(self) -> None:
        applied = False
        while self.inbox:
            event, t_ms = self.inbox.popleft()
            self.machine.apply_event(event, t_ms)
            applied = True
        if applied and self.last_frame is not None:
            self._publish(self.last_frame)

    # -- ingest and publish ----------------------------------------------

    def ingest(self, packet: FramePacket) -> PublishedView:
        with self.lock:
            self._drain()
            # monotonic-seq gate comes before decode: a stale packet is 409
            # even when its payload is junk
            if packet.seq <= self.machine.state.last_seq:
                self.rejected += 1
                raise StaleSeq(
                    f"seq {packet.seq} not greater than {self.machine.state.last_seq}"
                )
            try:
                frame = decode_frame(
                    packet.image, timestamp_ms=packet.timestamp_ms, seq=packet.seq
                )
            except DecodeFailure as exc:
                raise MalformedPacket(f"undecodable frame: {exc}") from exc
            try:
                self.machine.on_frame(frame, packet.timestamp_ms)
            except StaleFrame as exc:  # pragma: no cover - guarded above
                self.rejected += 1
                raise StaleSeq(str(exc)) from exc
            self.machine.set_mode(packet.mode)
            if packet.quad is not None and packet.mode != DetectorKind.MANUAL:
                self.machine.on_candidate(
                    RoiCandidate(packet.quad, packet.mode, packet.seq),
                    now_ms=packet.timestamp_ms,
                )
            self.last_frame = frame
            self.raw_jpeg = packet.image
            self._packet_quad = packet.quad
            view = self._publish(frame)
            self.accepted += 1
            return view

    def _effective_quad(self, frame: Frame) -> Quad:
        # a control-locked quad overrides the client quad; otherwise the
        # packet quad, otherwise the whole frame
        state = self.machine.state
        if state.locked is not None:
            return state.locked
        if self._packet_quad is not None:
            return self._packet_quad
        return Quad.full_frame(frame.width, frame.height)

    def _publish(self, frame: Frame) -> PublishedView:
        quad = self._effective_quad(frame)
        mode = self.machine.state.mode
        if mode == DetectorKind.FACE:
            try:
                out = crop_axis_aligned(frame, quad.bounding_rect())
            except EmptyRegion:
                out = frame
        else:
            out = warp_crop(frame, quad, self.output_spec)
        view = PublishedView(
            session_id=self.session_id,
            seq=frame.seq,
            frame=out,
            jpeg=encode_frame(out, self.quality),
            quad=quad,
            mode=mode,
            timestamp_ms=frame.timestamp_ms,
            ingested_monotonic=time.monotonic(),
        )
        self.published = view
        if self.on_publish is not None:
            self.on_publish(view)
        return view

    _packet_quad: Quad | None = None

    # -- reads -------------------------------------------------------------

    def view(self) -> PublishedView:
        with self.lock:
            self._drain()
            if self.published is None:
                raise UnknownSession(f"session {self.session_id} has no published view")
            return self.published

    def preview_jpeg(self) -> tuple[bytes, int]:
        with self.lock:
            self._drain()
            if self.raw_jpeg is None or self.published is None:
                raise UnknownSession(f"session {self.session_id} has no frames")
            return self.raw_jpeg, self.published.seq

    def meta(self) -> dict:
        with self.lock:
            self._drain()
            if self.published is None:
                raise UnknownSession(f"session {self.session_id} has no published view")
            v = self.published
            state = self.machine.state
            return {
                "session_id": self.session_id,
                "seq": v.seq,
                "quad": v.quad.to_json(),
                "mode": v.mode.value,
                "timestamp_ms": v.timestamp_ms,
                "staleness_ms": self._staleness_ms(v),
                "candidate": None
                if state.candidate is None
                else state.candidate.quad.to_json(),
                "locked": None if state.locked is None else state.locked.to_json(),
            }

    @staticmethod
    def _staleness_ms(view: PublishedView) -> int:
        return max(0, int((time.monotonic() - view.ingested_monotonic) * 1000))


class Hub:
    """All sessions on one server. Ingest auto-creates sessions; view and
    control require an existing session with at least one accepted frame."""

    def __init__(self, output_spec: OutputSpec = OutputSpec(), quality: int = 80):
        self.output_spec = output_spec
        self.quality = quality
        self._lock = threading.Lock()
        self._sessions: dict[str, ServerSession] = {}
        self.on_publish: Callable[[PublishedView], None] | None = None

    def _get(self, session_id: str) -> ServerSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None or session.published is None:
            raise UnknownSession(f"unknown session {session_id!r}")
        return session

    def ingest(self, packet: FramePacket) -> PublishedView:
        validate_session_id(packet.session_id)
        with self._lock:
            session = self._sessions.get(packet.session_id)
            if session is None:
                session = ServerSession(packet.session_id, self.output_spec, self.quality)
                session.on_publish = self._fire_publish
                self._sessions[packet.session_id] = session
        return session.ingest(packet)

    def _fire_publish(self, view: PublishedView) -> None:
        if self.on_publish is not None:
            self.on_publish(view)

    def control(self, session_id: str, event: dict) -> None:
        validate_event(event)
        self._get(session_id).enqueue(event)

    def view(self, session_id: str) -> PublishedView:
        return self._get(session_id).view()

    def meta(self, session_id: str) -> dict:
        return self._get(session_id).meta()

    def preview(self, session_id: str) -> tuple[bytes, int]:
        return self._get(session_id).preview_jpeg()

    def sessions(self) -> list[dict]:
        with self._lock:
            items = list(self._sessions.items())
        out = []
        for sid, session in sorted(items):
            with session.lock:
                if session.published is None:
                    continue
                out.append(
                    {
                        "session_id": sid,
                        "seq": session.published.seq,
                        "mode": session.published.mode.value,
                    }
                )
        return out

    def summary(self) -> list[str]:
        with self._lock:
            items = sorted(self._sessions.items())
        return [
            f"session {sid}: accepted={s.accepted} rejected={s.rejected}"
            for sid, s in items
        ]


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8700
    quality: int = 80
    output_spec: OutputSpec = OutputSpec()
    ui_dir: str | None = None


_UI_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class _Handler(BaseHTTPRequestHandler):
    hub: Hub  # set on the generated subclass
    ui_dir: str | None = None
    protocol_version = "HTTP/1.1"

    # -- helpers -----------------------------------------------------------

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload: object, extra: dict | None = None) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_bytes(self, status: int, content_type: str, body: bytes,
                    extra: dict | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    # -- routes ------------------------------------------------------------

    def do_POST(self) -> None:  # noqa: N802 (http.server naming)
        parts = self.path.strip("/").split("/")
        try:
            if len(parts) == 2 and parts[0] == "ingest":
                packet = FramePacket.from_multipart(
                    self.headers.get("Content-Type", ""), self._read_body(), parts[1]
                )
                view = self.hub.ingest(packet)
                self._send_json(200, {"status": "accepted", "seq": view.seq})
            elif len(parts) == 2 and parts[0] == "control":
                try:
                    event = json.loads(self._read_body().decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    raise MalformedPacket(f"control body is not JSON: {exc}") from exc
                self.hub.control(parts[1], event)
                self._send_json(202, {"status": "queued"})
            else:
                self._error(404, f"no such endpoint: POST {self.path}")
        except StaleSeq as exc:
            self._error(409, str(exc))
        except MalformedPacket as exc:
            self._error(400, str(exc))
        except UnknownSession as exc:
            self._error(404, str(exc))
        except Exception as exc:  # pragma: no cover - last-ditch guard
            log.exception("unhandled error on POST %s", self.path)
            self._error(500, f"internal error: {exc}")

    def do_GET(self) -> None:  # noqa: N802
        parts = self.path.split("?", 1)[0].strip("/").split("/")
        try:
            if parts == ["sessions"]:
                self._send_json(200, self.hub.sessions())
            elif len(parts) == 3 and parts[0] == "view" and parts[2] == "latest.jpg":
                view = self.hub.view(parts[1])
                self._send_bytes(
                    200,
                    "image/jpeg",
                    view.jpeg,
                    {
                        "X-Seq": str(view.seq),
                        "X-Staleness-Ms": str(ServerSession._staleness_ms(view)),
                    },
                )
            elif len(parts) == 3 and parts[0] == "view" and parts[2] == "preview.jpg":
                jpeg, seq = self.hub.preview(parts[1])
                self._send_bytes(200, "image/jpeg", jpeg, {"X-Seq": str(seq)})
            elif len(parts) == 3 and parts[0] == "view" and parts[2] == "meta":
                self._send_json(200, self.hub.meta(parts[1]))
            elif parts[0] == "ui":
                self._serve_ui(parts[1:])
            elif parts == [""]:
                self._send_bytes(200, "text/plain; charset=utf-8",
                                 b"roistream ingest server; viewer UI at /ui/\n")
            else:
                self._error(404, f"no such endpoint: GET {self.path}")
        except UnknownSession as exc:
            self._error(404, str(exc))
        except Exception as exc:  # pragma: no cover
            log.exception("unhandled error on GET %s", self.path)
            self._error(500, f"internal error: {exc}")

    def _serve_ui(self, rel_parts: list[str]) -> None:
        if self.ui_dir is None:
            self._error(404, "no UI assets configured (start with --ui-dir)")
            return
        root = Path(self.ui_dir).resolve()
        rel = "/".join(p for p in rel_parts if p) or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._error(404, f"no UI asset {rel!r}")
            return
        ctype = _UI_CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send_bytes(200, ctype, target.read_bytes())


def build_server(config: ServerConfig = ServerConfig()) -> tuple[ThreadingHTTPServer, Hub]:
    """Create the HTTP server and its hub; caller runs serve_forever()."""
    hub = Hub(output_spec=config.output_spec, quality=config.quality)
    handler = type(
        "HubHandler", (_Handler,), {"hub": hub, "ui_dir": config.ui_dir}
    )
    server = ThreadingHTTPServer((config.host, config.port), handler)
    server.daemon_threads = True
    return server, hub
