"""Wire-level records: frame packets (multipart), control messages (JSON)."""
from __future__ import annotations

import json
import re
import secrets
from dataclasses import dataclass, field
from email import message_from_bytes
from email.message import Message

from ..detectors import DetectorKind
from ..errors import MalformedPacket
from ..geometry import Quad
from ..imaging import Frame

SESSION_ID_RE = re.compile(r"^[A-Za-z0-9._~-]{1,64}$")

EVENT_TYPES = {
    "tap": {"x", "y"},
    "lock": set(),
    "unlock": set(),
    "relock_previous": set(),
    "mode": {"kind"},
    "sensor": {"accel", "heading"},
    "record": {"on"},
    "streamflag": {"on"},
}


def validate_session_id(session_id: str) -> str:
    if not SESSION_ID_RE.match(session_id or ""):
        raise MalformedPacket(f"invalid session id {session_id!r}")
    return session_id


def validate_event(event: object) -> dict:
    """Check a control event against the session event-script schema."""
    if not isinstance(event, dict):
        raise MalformedPacket(f"event must be an object, got {type(event).__name__}")
    kind = event.get("type")
    if kind not in EVENT_TYPES:
        raise MalformedPacket(f"unknown event type {kind!r}")
    missing = EVENT_TYPES[kind] - event.keys()
    if missing:
        raise MalformedPacket(f"event {kind!r} missing fields {sorted(missing)}")
    if kind == "tap":
        try:
            float(event["x"]), float(event["y"])
        except (TypeError, ValueError) as exc:
            raise MalformedPacket(f"tap coordinates must be numbers: {exc}") from exc
    if kind == "mode" and event["kind"] not in {k.value for k in DetectorKind}:
        raise MalformedPacket(f"unknown mode {event['kind']!r}")
    if kind == "sensor":
        accel = event.get("accel")
        if not isinstance(accel, (list, tuple)) or len(accel) != 3:
            raise MalformedPacket("sensor accel must be a 3-element array")
    return event


@dataclass(frozen=True)
class ControlMessage:
    session_id: str
    event: dict

    def __post_init__(self) -> None:
        validate_session_id(self.session_id)
        validate_event(self.event)

    def to_json(self) -> bytes:
        return json.dumps(self.event).encode("utf-8")


@dataclass(frozen=True)
class FramePacket:
    """One posted frame: JSON meta part plus JPEG image part."""

    session_id: str
    seq: int
    timestamp_ms: int
    quad: Quad | None
    mode: DetectorKind
    image: bytes = field(repr=False)

    def __post_init__(self) -> None:
        validate_session_id(self.session_id)
        if self.seq < 0:
            raise MalformedPacket(f"negative seq {self.seq}")

    def meta_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "timestamp_ms": self.timestamp_ms,
            "quad": None if self.quad is None else self.quad.to_json(),
            "mode": self.mode.value,
        }

    def to_multipart(self) -> tuple[str, bytes]:
        """Encode as multipart/form-data with a ``meta`` part and a ``frame``
        part; returns (content_type, body)."""
        boundary = "roistream-" + secrets.token_hex(12)
        meta = json.dumps(self.meta_json()).encode("utf-8")
        parts = [
            b"--" + boundary.encode("ascii") + b"\r\n"
            b'Content-Disposition: form-data; name="meta"\r\n'
            b"Content-Type: application/json; charset=utf-8\r\n\r\n" + meta + b"\r\n",
            b"--" + boundary.encode("ascii") + b"\r\n"
            b'Content-Disposition: form-data; name="frame"; filename="frame.jpg"\r\n'
            b"Content-Type: image/jpeg\r\n\r\n" + self.image + b"\r\n",
            b"--" + boundary.encode("ascii") + b"--\r\n",
        ]
        return f"multipart/form-data; boundary={boundary}", b"".join(parts)

    @classmethod
    def from_multipart(cls, content_type: str, body: bytes, session_id: str) -> FramePacket:
        """Parse a POST /ingest body; the path session id must match the meta."""
        parts = _parse_multipart(content_type, body)
        if "meta" not in parts or "frame" not in parts:
            raise MalformedPacket(f"need meta and frame parts, got {sorted(parts)}")
        try:
            meta = json.loads(parts["meta"].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedPacket(f"meta part is not valid JSON: {exc}") from exc
        if not isinstance(meta, dict):
            raise MalformedPacket("meta must be a JSON object")
        try:
            seq = int(meta["seq"])
            timestamp_ms = int(meta["timestamp_ms"])
            mode = DetectorKind(meta.get("mode", "manual"))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPacket(f"bad meta fields: {exc}") from exc
        meta_sid = meta.get("session_id", session_id)
        if meta_sid != session_id:
            raise MalformedPacket(
                f"meta session_id {meta_sid!r} does not match path {session_id!r}"
            )
        quad = None
        if meta.get("quad") is not None:
            try:
                quad = Quad.from_json(meta["quad"])
            except Exception as exc:
                raise MalformedPacket(f"bad quad: {exc}") from exc
        return cls(
            session_id=session_id,
            seq=seq,
            timestamp_ms=timestamp_ms,
            quad=quad,
            mode=mode,
            image=parts["frame"],
        )


def _parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    if not content_type or "multipart" not in content_type:
        raise MalformedPacket(f"expected multipart body, got {content_type!r}")
    header = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n".encode("ascii")
    msg: Message = message_from_bytes(header + body)
    if not msg.is_multipart():
        raise MalformedPacket("unparseable multipart body")
    parts: dict[str, bytes] = {}
    for part in msg.get_payload():
        name = part.get_param("name", header="content-disposition")
        payload = part.get_payload(decode=True)
        if name and payload is not None:
            parts[str(name)] = payload
    return parts


@dataclass(frozen=True)
class PublishedView:
    """The latest accepted, warped result for one session."""

    session_id: str
    seq: int
    frame: Frame = field(repr=False)  # pre-encode warped pixels
    jpeg: bytes = field(repr=False)
    quad: Quad
    mode: DetectorKind
    timestamp_ms: int
    ingested_monotonic: float  # server monotonic clock at publish
