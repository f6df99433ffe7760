import math

import numpy as np
import pytest

from roistream.detectors import DetectorKind, RoiCandidate
from roistream.errors import (
    InvalidQuadEdit,
    ModeMismatch,
    NoCandidate,
    StaleFrame,
)
from roistream.geometry import Quad
from roistream.session import (
    DetectEffect,
    DispatchRecord,
    RecordEffect,
    SensorSample,
    Session,
    SessionConfig,
    StreamEffect,
    ThumbnailEffect,
    nearest_corner,
    replay,
)

from conftest import make_frame


def frame_at(seq, t_ms, width=640, height=480):
    return make_frame(width, height, seq=seq, timestamp_ms=t_ms)


def quad_for(seq):
    return Quad.from_rect(10 + seq % 7, 10 + seq % 5, 110 + seq % 7, 110 + seq % 5)


def cand_for(seq, kind=DetectorKind.SCREEN):
    return RoiCandidate(quad=quad_for(seq), source=kind, frame_seq=seq)


def session(**overrides):
    defaults = dict(initial_mode=DetectorKind.SCREEN, detecting=True,
                    recording=False, streaming=True)
    defaults.update(overrides)
    return Session(SessionConfig(**defaults))


class TestOnFrame:
    def test_record_only(self):
        s = session(recording=True, streaming=False, detecting=False)
        effects = s.on_frame(frame_at(1, 0), 0)
        assert [type(e) for e in effects] == [RecordEffect]

    def test_busy_consumers_skipped(self):
        s = session(recording=True)
        s.state.stream_idle = False
        s.state.detect_idle = False
        effects = s.on_frame(frame_at(1, 0), 0)
        assert [type(e) for e in effects] == [RecordEffect]

    def test_all_idle_and_enabled(self):
        s = session(recording=True)
        effects = s.on_frame(frame_at(1, 0), 0)
        assert [type(e) for e in effects] == [RecordEffect, StreamEffect, DetectEffect]
        # dispatch marks consumers busy
        assert not s.state.stream_idle and not s.state.detect_idle

    def test_stream_meta_carries_active_quad_and_mode(self):
        s = session()
        s.state.locked = Quad.from_rect(5, 5, 50, 50)
        (stream, *_), = [s.on_frame(frame_at(1, 0), 0)]
        assert isinstance(stream, StreamEffect)
        assert stream.quad == s.state.locked
        assert stream.mode == DetectorKind.SCREEN

    def test_stale_seq_rejected(self):
        s = session()
        s.on_frame(frame_at(5, 0), 0)
        with pytest.raises(StaleFrame):
            s.on_frame(frame_at(5, 100), 100)
        with pytest.raises(StaleFrame):
            s.on_frame(frame_at(3, 200), 200)

    def test_detect_cadence(self):
        s = session()
        assert any(isinstance(e, DetectEffect) for e in s.on_frame(frame_at(1, 0), 0))
        s.consumer_done("detect")
        s.on_candidate(cand_for(1), now_ms=0)
        # within the cadence period: no detect
        assert not any(isinstance(e, DetectEffect) for e in s.on_frame(frame_at(2, 500), 500))
        # past the period: detect again
        assert any(isinstance(e, DetectEffect) for e in s.on_frame(frame_at(3, 2100), 2100))

    def test_detect_retries_every_frame_until_first_candidate(self):
        s = session()
        s.on_frame(frame_at(1, 0), 0)
        s.consumer_done("detect")
        # still no candidate: detect again immediately
        assert any(isinstance(e, DetectEffect) for e in s.on_frame(frame_at(2, 100), 100))


class TestCandidatesAndLock:
    def test_candidate_replaced_locked_unchanged(self):
        s = session()
        s.state.locked = Quad.from_rect(0, 0, 100, 100)
        q1 = s.state.locked
        s.on_candidate(cand_for(1))
        s.on_candidate(cand_for(2))
        assert s.state.candidate == cand_for(2)
        assert s.state.previous_candidate == cand_for(1)
        assert s.state.locked == q1

    def test_mode_mismatch_discards(self):
        s = session(initial_mode=DetectorKind.MANUAL)
        with pytest.raises(ModeMismatch):
            s.on_candidate(cand_for(1))
        assert s.state.candidate is None

    def test_lock_requires_candidate(self):
        s = session()
        with pytest.raises(NoCandidate):
            s.lock()

    def test_lock_sets_quad_and_emits_thumbnail(self):
        s = session()
        s.on_candidate(cand_for(1))
        effects = s.lock()
        assert s.state.locked == cand_for(1).quad
        assert s.state.candidate is not None  # candidate retained
        assert [type(e) for e in effects] == [ThumbnailEffect]
        assert s.state.detection_paused

    def test_relock_newest_candidate(self):
        s = session()
        s.on_candidate(cand_for(1))
        s.lock()
        s.on_candidate(cand_for(2))
        s.lock()
        assert s.state.locked == cand_for(2).quad

    def test_relock_previous(self):
        s = session()
        s.on_candidate(cand_for(1))
        s.on_candidate(cand_for(2))
        s.relock_previous()
        assert s.state.locked == cand_for(1).quad

    def test_relock_previous_empty(self):
        s = session()
        with pytest.raises(NoCandidate):
            s.relock_previous()

    def test_mode_switch_clears_candidate_keeps_locked(self):
        s = session()
        s.on_candidate(cand_for(1))
        s.lock()
        s.set_mode(DetectorKind.MANUAL)
        assert s.state.candidate is None
        assert s.state.locked == cand_for(1).quad

    def test_active_quad_priority(self):
        s = session()
        assert s.active_quad() == Quad.full_frame(640, 480)
        s.on_candidate(cand_for(1))
        assert s.active_quad() == cand_for(1).quad
        s.lock()
        s.on_candidate(cand_for(2))
        assert s.active_quad() == cand_for(1).quad  # locked wins


class TestOnTap:
    def test_nearest_corner_moved(self):
        s = session(frame_width=100, frame_height=100)
        s.state.locked = Quad.from_rect(10, 10, 90, 90)
        s.on_tap(12, 8, 1000)
        assert s.state.locked.corners[0] == (12.0, 8.0)

    def test_double_tap_full_frame(self):
        s = session(frame_width=640, frame_height=480)
        s.on_tap(40, 40, 1000)
        s.on_tap(41, 41, 1100)
        assert s.state.locked == Quad.full_frame(640, 480)

    def test_rect_shortcut(self):
        s = session(frame_width=100, frame_height=100)
        s.on_tap(10, 10, 1000)
        s.on_tap(90, 90, 1500)
        assert s.state.locked == Quad.from_rect(10, 10, 90, 90)

    def test_rect_shortcut_window_expired(self):
        s = session(frame_width=100, frame_height=100)
        s.on_tap(10, 10, 1000)
        s.on_tap(90, 90, 2500)
        # second tap outside the window: plain corner edit of the quad
        assert s.state.locked != Quad.from_rect(10, 10, 90, 90)
        assert s.state.locked.corners[2] == (90.0, 90.0)

    def test_double_tap_requires_proximity(self):
        s = session(frame_width=640, frame_height=480)
        s.on_tap(40, 40, 1000)
        s.on_tap(100, 100, 1100)  # too far for a double tap
        assert s.state.locked != Quad.full_frame(640, 480)

    def test_invalid_edit_rejected_state_unchanged(self):
        s = session(frame_width=640, frame_height=480)
        s.state.locked = Quad.from_rect(100, 100, 109, 109)
        before = s.state.locked
        # pulling TL inward shrinks the quad below the minimum area
        with pytest.raises(InvalidQuadEdit):
            s.on_tap(104, 103, 1000)
        assert s.state.locked == before

    def test_out_of_bounds_tap_rejected(self):
        s = session(frame_width=100, frame_height=100)
        with pytest.raises(ValueError):
            s.on_tap(200, 50, 0)

    def test_candidate_edit_commits_to_locked(self):
        s = session(frame_width=640, frame_height=480)
        s.on_candidate(cand_for(1))
        s.on_tap(9, 9, 100)
        assert s.state.locked is not None
        assert s.state.locked.corners[0] == (9.0, 9.0)

    def test_nearest_corner_matches_brute_force(self, rng):
        quad = Quad(((100.0, 80.0), (500.0, 120.0), (520.0, 400.0), (90.0, 380.0)))
        for _ in range(100):
            x = float(rng.uniform(0, 640))
            y = float(rng.uniform(0, 480))
            distances = [math.hypot(cx - x, cy - y) for cx, cy in quad.corners]
            assert nearest_corner(quad, x, y) == distances.index(min(distances))

    def test_center_tap_lock_when_enabled(self):
        s = session(center_tap_lock=True, frame_width=640, frame_height=480)
        s.on_candidate(cand_for(1))
        inner = cand_for(1).quad.center()
        s.on_tap(inner[0], inner[1], 100)
        assert s.state.locked == cand_for(1).quad
        assert s.state.detection_paused

    def test_center_tap_disabled_by_default(self):
        s = session(frame_width=640, frame_height=480)
        s.on_candidate(cand_for(1))
        cx, cy = cand_for(1).quad.center()
        # without the gesture a center tap is just a (here: degenerate) corner
        # edit, never a lock of the candidate
        with pytest.raises(InvalidQuadEdit):
            s.on_tap(cx, cy, 100)
        assert s.state.locked != cand_for(1).quad


class TestOnSensor:
    @staticmethod
    def sample(t, accel=(0.0, 0.0, 9.81), heading=0.0):
        return SensorSample(accel=accel, heading=heading, timestamp_ms=t)

    def test_stationary_never_motion(self):
        s = session()
        for t in range(0, 5000, 100):
            s.on_sensor(self.sample(t))
        assert s.state.last_motion_ms is None

    def test_heading_step_declares_motion(self):
        s = session()
        for t in range(0, 1000, 100):
            s.on_sensor(self.sample(t, heading=0.0))
        s.on_sensor(self.sample(1000, heading=45.0))
        assert s.state.last_motion_ms == 1000
        assert s.motion_active(1200)
        assert not s.motion_active(1700)  # window expired

    def test_accel_jolt_declares_motion(self):
        s = session()
        for t in range(0, 500, 100):
            s.on_sensor(self.sample(t))
        s.on_sensor(self.sample(500, accel=(2.0, 0.0, 9.81)))
        assert s.state.last_motion_ms == 500

    def test_motion_resumes_detection_when_locked(self):
        s = session()
        s.on_candidate(cand_for(1))
        s.lock()
        assert s.state.detection_paused
        s.on_sensor(self.sample(0))
        s.on_sensor(self.sample(100, heading=90.0))
        assert not s.state.detection_paused
        assert s.state.locked == cand_for(1).quad  # lock persists

    def test_out_of_order_samples_dropped(self):
        s = session()
        s.on_sensor(self.sample(1000))
        s.on_sensor(self.sample(500, accel=(9.0, 9.0, 9.0)))  # dropped
        assert s.state.last_motion_ms is None

    def test_scale_consistency(self):
        # doubling deviations and thresholds leaves the flag sequence unchanged
        base = (0.0, 0.0, 9.81)
        deviations = [0.0, 0.1, 2.0, 0.0, 1.0, 3.0, 0.2, 0.0]

        def run(scale, threshold):
            s = session(motion_accel_threshold=threshold)
            flags = []
            for i, d in enumerate(deviations):
                accel = (base[0] + d * scale, base[1], base[2])
                s.on_sensor(self.sample(i * 100, accel=accel))
                flags.append(s.state.last_motion_ms)
            return flags

        assert run(1.0, 1.5) == run(2.0, 3.0)

    def test_sensor_trace_matches_offline_replay_oracle(self, rng):
        cfg = SessionConfig()
        s = Session(cfg)
        times, flags = [], []
        samples = []
        t = 0
        for _ in range(120):
            t += int(rng.integers(20, 120))
            accel = tuple(float(v) for v in rng.normal((0, 0, 9.81), 0.3))
            if rng.random() < 0.1:
                accel = (accel[0] + float(rng.uniform(2, 5)), accel[1], accel[2])
            heading = float(rng.uniform(-3, 3)) % 360
            if rng.random() < 0.05:
                heading = float(rng.uniform(30, 180))
            samples.append(SensorSample(accel=accel, heading=heading, timestamp_ms=t))

        # offline oracle evaluating the same EMA + threshold rule
        alpha = cfg.accel_ema_alpha
        accel_base = None
        heading_ref = None
        expected = []
        for sample in samples:
            moved = False
            if accel_base is None:
                accel_base = np.array(sample.accel, dtype=float)
            else:
                dev = float(np.linalg.norm(np.array(sample.accel) - accel_base))
                if dev > cfg.motion_accel_threshold:
                    moved = True
                accel_base = (1 - alpha) * accel_base + alpha * np.array(sample.accel)
            rad = math.radians(sample.heading)
            unit = np.array([math.cos(rad), math.sin(rad)])
            if heading_ref is None:
                heading_ref = unit
            else:
                cross = heading_ref[0] * unit[1] - heading_ref[1] * unit[0]
                dot = float(heading_ref @ unit)
                if abs(math.degrees(math.atan2(cross, dot))) > cfg.motion_heading_threshold:
                    moved = True
                ref = (1 - alpha) * heading_ref + alpha * unit
                norm = np.linalg.norm(ref)
                heading_ref = ref / norm if norm > 1e-9 else unit
            expected.append(moved)

        got = []
        last = None
        for sample in samples:
            s.on_sensor(sample)
            got.append(s.state.last_motion_ms != last)
            last = s.state.last_motion_ms
        assert got == expected


class TestReplayEngine:
    def test_scripted_consumer_busy_on_odd_frames(self):
        # stream consumer takes 150 ms per frame; frames every 100 ms:
        # it must receive every other frame, in order, newest-first semantics
        s = session(detecting=False)
        frames = [frame_at(i + 1, i * 100) for i in range(100)]
        log = replay(s, frames, stream_busy_ms=150)
        streamed = [d.seq for d in log if d.kind == "stream"]
        assert streamed == list(range(1, 101, 2))

    def test_dispatch_in_seq_order_and_never_stale(self):
        s = session(detecting=True, recording=True)
        frames = [frame_at(i + 1, i * 70) for i in range(60)]
        log = replay(s, frames, stream_busy_ms=90, detect_busy_ms=250,
                     detector=lambda f: cand_for(f.seq))
        for kind in ("record", "stream", "detect"):
            seqs = [d.seq for d in log if d.kind == kind]
            assert seqs == sorted(seqs)
            assert len(set(seqs)) == len(seqs)
        assert [d.seq for d in log if d.kind == "record"] == list(range(1, 61))

    def test_replay_applies_script_events(self):
        s = session(detecting=True)
        frames = [frame_at(i + 1, i * 100) for i in range(30)]
        events = [
            (1500, {"type": "lock"}),
            (2000, {"type": "record", "on": True}),
        ]
        log = replay(s, frames, events, detector=lambda f: cand_for(f.seq))
        assert s.state.locked is not None
        recorded = [d.seq for d in log if d.kind == "record"]
        assert recorded and min(recorded) == 21  # recording from t=2000
        # lock pauses detection: no detect dispatches after 1500
        assert all(d.t_ms <= 1500 for d in log if d.kind == "detect")

    def test_equal_time_event_applies_before_frame(self):
        s = session(detecting=False, streaming=True)
        frames = [frame_at(1, 0), frame_at(2, 100)]
        events = [(100, {"type": "streamflag", "on": False})]
        log = replay(s, frames, events)
        assert [d.seq for d in log if d.kind == "stream"] == [1]
