"""Frame types, grayscale conversion, JPEG transport codec, and PPM file I/O."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeFailure, EncodeFailure

# ITU-R BT.601 luma weights, rounded half-up.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

INDEX_FILENAME = "index.txt"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Frame:
    """One RGB frame. Pixels are row-major interleaved 8-bit RGB, shape (h, w, 3).

    Frames are immutable after construction and may be shared freely between
    pipeline consumers. ``seq`` increases strictly within a session.
    """

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)
    timestamp_ms: int = 0
    seq: int = 0

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.size != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer size {px.size} != {self.width}x{self.height}x3"
            )
        px = px.reshape(self.height, self.width, 3)
        object.__setattr__(self, "pixels", _freeze(px))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.timestamp_ms == other.timestamp_ms
            and self.seq == other.seq
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class GrayFrame:
    """One 8-bit luma frame, shape (h, w)."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.size != self.width * self.height:
            raise ValueError(
                f"pixel buffer size {px.size} != {self.width}x{self.height}"
            )
        px = px.reshape(self.height, self.width)
        object.__setattr__(self, "pixels", _freeze(px))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


def to_grayscale(frame: Frame) -> GrayFrame:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), half-up, clamped to [0, 255]."""
    luma = frame.pixels.astype(np.float64) @ _LUMA_WEIGHTS
    luma = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return GrayFrame(frame.width, frame.height, luma)


def encode_frame(frame: Frame, quality: int = 80) -> bytes:
    """Encode a frame as baseline JPEG. Dimensions round-trip exactly through decode_frame."""
    if frame.width == 0 or frame.height == 0:
        raise EncodeFailure("cannot encode zero-sized frame")
    if not 1 <= quality <= 100:
        raise EncodeFailure(f"quality {quality} out of range 1..100")
    img = Image.fromarray(frame.pixels, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def decode_frame(data: bytes, timestamp_ms: int = 0, seq: int = 0) -> Frame:
    """Decode JPEG bytes back to a Frame; timestamp/seq come from caller metadata."""
    if not data:
        raise DecodeFailure("empty byte sequence")
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeFailure(f"malformed image data: {exc}") from exc
    px = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Frame(img.width, img.height, px, timestamp_ms=timestamp_ms, seq=seq)


# ---------------------------------------------------------------------------
# PPM (P6) file format and numbered frame sequences with a sidecar index.
# ---------------------------------------------------------------------------

def write_ppm(path: str | Path, frame: Frame) -> None:
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.pixels.tobytes())


def read_ppm(path: str | Path, timestamp_ms: int = 0, seq: int = 0) -> Frame:
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise DecodeFailure(f"{path}: not a binary PPM (P6) file")
    # header = magic, width, height, maxval separated by whitespace; no comments.
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DecodeFailure(f"{path}: truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise DecodeFailure(f"{path}: bad PPM header") from exc
    if maxval != 255:
        raise DecodeFailure(f"{path}: unsupported maxval {maxval}")
    body = data[pos : pos + width * height * 3]
    if len(body) != width * height * 3:
        raise DecodeFailure(f"{path}: truncated PPM body")
    px = np.frombuffer(body, dtype=np.uint8)
    return Frame(width, height, px, timestamp_ms=timestamp_ms, seq=seq)


def write_sequence(directory: str | Path, frames: list[Frame]) -> None:
    """Write frames as zero-padded PPM files plus an index (seq, timestamp_ms, filename)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for frame in frames:
        name = f"frame_{frame.seq:06d}.ppm"
        write_ppm(directory / name, frame)
        lines.append(f"{frame.seq} {frame.timestamp_ms} {name}\n")
    (directory / INDEX_FILENAME).write_text("".join(lines), encoding="ascii")


def read_sequence(directory: str | Path) -> list[Frame]:
    """Read a frame sequence back via its index file, in index order."""
    directory = Path(directory)
    index = directory / INDEX_FILENAME
    if not index.is_file():
        raise FileNotFoundError(f"no {INDEX_FILENAME} in {directory}")
    frames = []
    for line in index.read_text(encoding="ascii").splitlines():
        if not line.strip():
            continue
        seq_s, ts_s, name = line.split(maxsplit=2)
        frames.append(read_ppm(directory / name, timestamp_ms=int(ts_s), seq=int(seq_s)))
    return frames
