"""Interactive session state machine: modes, candidate cadence, ROI locking,
manual tap editing, motion-triggered re-detection, and the latest-wins
dispatch of frames to the record/stream/detect consumers."""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

from .detectors import DetectorKind, RoiCandidate
from .errors import (
    DegenerateQuad,
    InvalidQuadEdit,
    ModeMismatch,
    NoCandidate,
    RoiStreamError,
    StaleFrame,
)
from .geometry import Quad
from .imaging import Frame

log = logging.getLogger(__name__)

DOUBLE_TAP_RADIUS_PX = 20.0


@dataclass(frozen=True)
class SensorSample:
    accel: tuple[float, float, float]
    heading: float  # degrees, normalized into [0, 360)
    timestamp_ms: int

    def __post_init__(self) -> None:
        if not all(math.isfinite(a) for a in self.accel) or not math.isfinite(self.heading):
            raise ValueError("sensor components must be finite")
        object.__setattr__(self, "heading", float(self.heading) % 360.0)


@dataclass(frozen=True)
class SessionConfig:
    candidate_period_ms: int = 2000
    double_tap_window_ms: int = 300
    rect_shortcut_window_ms: int = 1000
    motion_accel_threshold: float = 1.5
    motion_heading_threshold: float = 10.0
    motion_window_ms: int = 500
    accel_ema_alpha: float = 0.1
    center_tap_lock: bool = False
    frame_width: int = 640
    frame_height: int = 480
    initial_mode: DetectorKind = DetectorKind.SCREEN
    detecting: bool = True
    recording: bool = False
    streaming: bool = True

    def __post_init__(self) -> None:
        for name in ("candidate_period_ms", "double_tap_window_ms", "rect_shortcut_window_ms",
                     "motion_accel_threshold", "motion_heading_threshold", "motion_window_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


# effects dispatched to the three consumers, plus the lock thumbnail cue
@dataclass(frozen=True)
class RecordEffect:
    frame: Frame


@dataclass(frozen=True)
class StreamEffect:
    frame: Frame
    quad: Quad
    mode: DetectorKind


@dataclass(frozen=True)
class DetectEffect:
    frame: Frame


@dataclass(frozen=True)
class ThumbnailEffect:
    quad: Quad


Effect = RecordEffect | StreamEffect | DetectEffect | ThumbnailEffect


@dataclass
class SessionState:
    mode: DetectorKind
    candidate: RoiCandidate | None = None
    previous_candidate: RoiCandidate | None = None
    locked: Quad | None = None
    detecting: bool = True
    recording: bool = False
    streaming: bool = True
    detection_paused: bool = False
    last_candidate_time_ms: int | None = None
    tap_history: list[tuple[float, float, int]] = field(default_factory=list)
    stream_idle: bool = True
    detect_idle: bool = True
    last_seq: int = 0
    now_ms: int = 0
    frame_width: int = 640
    frame_height: int = 480
    accel_baseline: tuple[float, float, float] | None = None
    heading_ref: tuple[float, float] | None = None
    last_sensor_ms: int | None = None
    last_motion_ms: int | None = None


class Session:
    """Owns one SessionState; all mutations flow through these methods, which
    the owner must call from a single logical thread (or under one lock)."""

    def __init__(self, config: SessionConfig = SessionConfig()):
        self.config = config
        self.state = SessionState(
            mode=config.initial_mode,
            detecting=config.detecting,
            recording=config.recording,
            streaming=config.streaming,
            frame_width=config.frame_width,
            frame_height=config.frame_height,
        )

    # ------------------------------------------------------------------
    # frame dispatch
    # ------------------------------------------------------------------

    def on_frame(self, frame: Frame, now_ms: int) -> list[Effect]:
        """Dispatch a frame to the consumers that are enabled and idle.

        Busy consumers skip the frame entirely (latest-wins); they are next
        offered whatever frame arrives after consumer_done().
        """
        s = self.state
        if frame.seq <= s.last_seq:
            raise StaleFrame(f"seq {frame.seq} not greater than {s.last_seq}")
        s.last_seq = frame.seq
        s.now_ms = now_ms
        s.frame_width = frame.width
        s.frame_height = frame.height

        effects: list[Effect] = []
        if s.recording:
            effects.append(RecordEffect(frame))
        if s.streaming and s.stream_idle:
            effects.append(StreamEffect(frame, quad=self.active_quad(), mode=s.mode))
            s.stream_idle = False
        if (
            s.detecting
            and not s.detection_paused
            and s.detect_idle
            and (
                s.candidate is None
                or now_ms - s.last_candidate_time_ms >= self.config.candidate_period_ms
            )
        ):
            effects.append(DetectEffect(frame))
            s.detect_idle = False
        return effects

    def consumer_done(self, kind: str) -> None:
        if kind == "stream":
            self.state.stream_idle = True
        elif kind == "detect":
            self.state.detect_idle = True
        else:
            raise ValueError(f"unknown consumer {kind!r}")

    # ------------------------------------------------------------------
    # candidates and locking
    # ------------------------------------------------------------------

    def on_candidate(self, cand: RoiCandidate, now_ms: int | None = None) -> None:
        """Adopt a detector result as the current candidate; locked is untouched."""
        s = self.state
        if cand.source != s.mode:
            raise ModeMismatch(f"candidate source {cand.source} != mode {s.mode}")
        if s.candidate is not None:
            s.previous_candidate = s.candidate
        s.candidate = cand
        s.last_candidate_time_ms = s.now_ms if now_ms is None else now_ms

    def lock(self) -> list[Effect]:
        """Commit the current candidate; detection pauses until motion resumes it."""
        s = self.state
        if s.candidate is None:
            raise NoCandidate("no candidate to lock")
        s.locked = s.candidate.quad
        s.detection_paused = True
        return [ThumbnailEffect(s.locked)]

    def unlock(self) -> None:
        s = self.state
        s.locked = None
        s.detection_paused = False

    def relock_previous(self) -> list[Effect]:
        """Lock the candidate that preceded the current one (1-deep history)."""
        s = self.state
        if s.previous_candidate is None:
            raise NoCandidate("no previous candidate to relock")
        s.locked = s.previous_candidate.quad
        s.detection_paused = True
        return [ThumbnailEffect(s.locked)]

    def set_mode(self, kind: DetectorKind) -> None:
        """Switching modes drops candidates but keeps any locked ROI."""
        s = self.state
        if kind == s.mode:
            return
        s.mode = kind
        s.candidate = None
        s.previous_candidate = None

    def set_recording(self, on: bool) -> None:
        self.state.recording = on

    def set_streaming(self, on: bool) -> None:
        self.state.streaming = on

    def active_quad(self) -> Quad:
        s = self.state
        if s.locked is not None:
            return s.locked
        if s.candidate is not None:
            return s.candidate.quad
        return Quad.full_frame(s.frame_width, s.frame_height)

    # ------------------------------------------------------------------
    # manual tap editing
    # ------------------------------------------------------------------

    def on_tap(self, x: float, y: float, now_ms: int) -> list[Effect]:
        """Tap gestures, in priority order: double-tap (full frame), UL-to-LR
        rectangle shortcut, optional center-tap lock, nearest-corner move.

        Corner edits commit the edited quad as the locked ROI; an edit that
        would break the quad invariants raises InvalidQuadEdit and leaves the
        quads unchanged.
        """
        s = self.state
        if not (0 <= x <= s.frame_width and 0 <= y <= s.frame_height):
            raise ValueError(f"tap ({x},{y}) outside {s.frame_width}x{s.frame_height} frame")
        prev = s.tap_history[-1] if s.tap_history else None

        # double-tap: two taps close in time and space select the whole frame
        if prev is not None:
            px, py, pt = prev
            if (
                now_ms - pt <= self.config.double_tap_window_ms
                and math.hypot(x - px, y - py) <= DOUBLE_TAP_RADIUS_PX
            ):
                s.locked = Quad.full_frame(s.frame_width, s.frame_height)
                s.tap_history.clear()
                return [ThumbnailEffect(s.locked)]

        # rectangle shortcut: consecutive taps in the quadrants of the working
        # quad's TL and BR corners span an axis-aligned rectangle
        if prev is not None and now_ms - prev[2] <= self.config.rect_shortcut_window_ms:
            working = self.active_quad()
            if (
                self._quadrant(prev[0], prev[1]) == self._quadrant(*working.corners[0])
                and self._quadrant(x, y) == self._quadrant(*working.corners[2])
            ):
                x0, x1 = sorted((prev[0], x))
                y0, y1 = sorted((prev[1], y))
                try:
                    s.locked = Quad.from_rect(x0, y0, x1, y1)
                    s.tap_history.clear()
                    return [ThumbnailEffect(s.locked)]
                except DegenerateQuad:
                    pass  # too small to be a rectangle; treat as a corner edit

        # optional alternative lock gesture: tap the middle of the candidate
        if (
            self.config.center_tap_lock
            and s.candidate is not None
            and s.candidate.quad.scaled_about_center(0.5).contains(x, y)
        ):
            s.tap_history.clear()
            return self.lock()

        # nearest-corner edit on the working quad
        working = self.active_quad()
        idx = nearest_corner(working, x, y)
        corners = list(working.corners)
        corners[idx] = (float(x), float(y))
        self._record_tap(x, y, now_ms)
        try:
            edited = Quad(tuple(corners))
        except DegenerateQuad as exc:
            raise InvalidQuadEdit(f"moving corner {idx} to ({x},{y}): {exc}") from exc
        s.locked = edited
        return [ThumbnailEffect(s.locked)]

    def _record_tap(self, x: float, y: float, now_ms: int) -> None:
        self.state.tap_history.append((float(x), float(y), now_ms))
        del self.state.tap_history[:-4]

    def _quadrant(self, x: float, y: float) -> tuple[bool, bool]:
        return (x >= self.state.frame_width / 2, y >= self.state.frame_height / 2)

    # ------------------------------------------------------------------
    # motion sensing
    # ------------------------------------------------------------------

    def on_sensor(self, sample: SensorSample) -> None:
        """Track gravity/heading baselines (EMA) and flag motion on threshold
        crossings; motion while locked resumes candidate generation."""
        s = self.state
        if s.last_sensor_ms is not None and sample.timestamp_ms < s.last_sensor_ms:
            return  # out-of-order sample dropped
        s.last_sensor_ms = sample.timestamp_ms

        alpha = self.config.accel_ema_alpha
        moved = False
        if s.accel_baseline is None:
            s.accel_baseline = sample.accel
        else:
            deviation = math.sqrt(
                sum((a - b) ** 2 for a, b in zip(sample.accel, s.accel_baseline))
            )
            if deviation > self.config.motion_accel_threshold:
                moved = True
            s.accel_baseline = tuple(
                (1 - alpha) * b + alpha * a for a, b in zip(sample.accel, s.accel_baseline)
            )

        rad = math.radians(sample.heading)
        unit = (math.cos(rad), math.sin(rad))
        if s.heading_ref is None:
            s.heading_ref = unit
        else:
            rx, ry = s.heading_ref
            cross = rx * unit[1] - ry * unit[0]
            dot = rx * unit[0] + ry * unit[1]
            if abs(math.degrees(math.atan2(cross, dot))) > self.config.motion_heading_threshold:
                moved = True
            nx = (1 - alpha) * rx + alpha * unit[0]
            ny = (1 - alpha) * ry + alpha * unit[1]
            norm = math.hypot(nx, ny)
            if norm > 1e-9:
                s.heading_ref = (nx / norm, ny / norm)
            else:
                s.heading_ref = unit

        if moved:
            s.last_motion_ms = sample.timestamp_ms
            if s.locked is not None:
                s.detection_paused = False

    def motion_active(self, now_ms: int) -> bool:
        s = self.state
        return (
            s.last_motion_ms is not None
            and 0 <= now_ms - s.last_motion_ms <= self.config.motion_window_ms
        )

    # ------------------------------------------------------------------
    # event inbox
    # ------------------------------------------------------------------

    def apply_event(self, event: dict, t_ms: int) -> list[Effect]:
        """Apply one event in the script schema. Op-level errors (stale, mode
        mismatch, rejected edits) are logged and swallowed: the inbox must
        keep consuming."""
        try:
            return self._apply_event(event, t_ms)
        except RoiStreamError as exc:
            log.debug("event %r at %d dropped: %s", event, t_ms, exc)
            return []

    def _apply_event(self, event: dict, t_ms: int) -> list[Effect]:
        kind = event.get("type")
        if kind == "tap":
            return self.on_tap(float(event["x"]), float(event["y"]), t_ms)
        if kind == "lock":
            return self.lock()
        if kind == "unlock":
            self.unlock()
            return []
        if kind == "relock_previous":
            return self.relock_previous()
        if kind == "mode":
            self.set_mode(DetectorKind(event["kind"]))
            return []
        if kind == "sensor":
            accel = event["accel"]
            self.on_sensor(
                SensorSample(
                    accel=(float(accel[0]), float(accel[1]), float(accel[2])),
                    heading=float(event["heading"]),
                    timestamp_ms=t_ms,
                )
            )
            return []
        if kind == "record":
            self.set_recording(bool(event["on"]))
            return []
        if kind == "streamflag":
            self.set_streaming(bool(event["on"]))
            return []
        raise ValueError(f"unknown event type {kind!r}")

    def snapshot(self) -> dict:
        """Deterministic value dump for replay-equality checks."""
        s = self.state

        def cand(c: RoiCandidate | None):
            return None if c is None else (c.quad.to_json(), c.source.value, c.frame_seq)

        return {
            "mode": s.mode.value,
            "candidate": cand(s.candidate),
            "previous_candidate": cand(s.previous_candidate),
            "locked": None if s.locked is None else s.locked.to_json(),
            "detecting": s.detecting,
            "recording": s.recording,
            "streaming": s.streaming,
            "detection_paused": s.detection_paused,
            "last_candidate_time_ms": s.last_candidate_time_ms,
            "tap_history": list(s.tap_history),
            "stream_idle": s.stream_idle,
            "detect_idle": s.detect_idle,
            "last_seq": s.last_seq,
            "frame": (s.frame_width, s.frame_height),
            "accel_baseline": s.accel_baseline,
            "heading_ref": s.heading_ref,
            "last_motion_ms": s.last_motion_ms,
        }


def nearest_corner(quad: Quad, x: float, y: float) -> int:
    """Index of the corner nearest to (x, y); ties go to the earliest corner
    in TL, TR, BR, BL order."""
    best = 0
    best_d = float("inf")
    for i, (cx, cy) in enumerate(quad.corners):
        d = (cx - x) ** 2 + (cy - y) ** 2
        if d < best_d:
            best = i
            best_d = d
    return best


# ---------------------------------------------------------------------------
# virtual-time trace replay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispatchRecord:
    t_ms: int
    kind: str  # record | stream | detect
    seq: int


def replay(
    session: Session,
    frames: list[Frame],
    events: list[tuple[int, dict]] | None = None,
    stream_busy_ms: int = 0,
    detect_busy_ms: int = 0,
    detector: Callable[[Frame], RoiCandidate] | None = None,
    on_record: Callable[[Frame], None] | None = None,
    on_stream: Callable[[StreamEffect, int], None] | None = None,
) -> list[DispatchRecord]:
    """Replay frames and scripted events in virtual time (frame timestamps and
    event times; no wall clock).

    Consumers are modeled as busy for *_busy_ms after each dispatch; the
    detect consumer runs ``detector`` when it completes and feeds the result
    back as a candidate. At equal times: completions apply first, then script
    events, then frames. Returns the dispatch log.
    """
    timeline: list[tuple[int, int, int, object]] = []
    for i, (t, event) in enumerate(events or []):
        timeline.append((t, 0, i, event))
    for i, frame in enumerate(frames):
        timeline.append((frame.timestamp_ms, 1, i, frame))
    timeline.sort(key=lambda item: (item[0], item[1], item[2]))

    completions: list[tuple[int, int, str, Frame]] = []
    counter = 0
    dispatch_log: list[DispatchRecord] = []

    def run_completions(until_ms: int | None) -> None:
        while completions and (until_ms is None or completions[0][0] <= until_ms):
            done_t, _, kind, frame = heapq.heappop(completions)
            session.consumer_done(kind)
            if kind == "detect" and detector is not None:
                try:
                    cand = detector(frame)
                except RoiStreamError:
                    cand = None
                if cand is not None:
                    try:
                        session.on_candidate(cand, now_ms=done_t)
                    except ModeMismatch:
                        pass

    for t, phase, _, item in timeline:
        run_completions(t)
        if phase == 0:
            session.apply_event(item, t)  # type: ignore[arg-type]
            continue
        frame = item  # type: ignore[assignment]
        effects = session.on_frame(frame, t)
        for effect in effects:
            if isinstance(effect, RecordEffect):
                dispatch_log.append(DispatchRecord(t, "record", frame.seq))
                if on_record is not None:
                    on_record(frame)
            elif isinstance(effect, StreamEffect):
                dispatch_log.append(DispatchRecord(t, "stream", frame.seq))
                if on_stream is not None:
                    on_stream(effect, t)
                counter += 1
                heapq.heappush(completions, (t + stream_busy_ms, counter, "stream", frame))
            elif isinstance(effect, DetectEffect):
                dispatch_log.append(DispatchRecord(t, "detect", frame.seq))
                counter += 1
                heapq.heappush(completions, (t + detect_busy_ms, counter, "detect", frame))
    run_completions(None)
    return dispatch_log
