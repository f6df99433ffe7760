"""Command-line entry point: synth, detect, warp, stabilize, stream, serve."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import requests

from . import synth as synthmod
from .detectors import (
    DetectorKind,
    LightTagParams,
    make_detector,
)
from .edges import EdgeParams, canny, top_fraction
from .errors import RoiStreamError
from .geometry import OutputSpec, Quad, warp_crop
from .imaging import (
    Frame,
    encode_frame,
    read_ppm,
    read_sequence,
    to_grayscale,
    write_ppm,
    write_sequence,
)
from .lines import HoughParams
from .session import Session, SessionConfig, StreamEffect, replay
from .stabilize import apply_offset, register_translation
from .transport import FramePacket, StreamClient
from .transport.server import ServerConfig, build_server

log = logging.getLogger("roistream")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_PROTOCOL = 3

COLOR_CANDIDATE = (255, 255, 0)  # yellow
COLOR_LOCKED = (255, 0, 0)  # red


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default parameters")
    common.add_argument("--seed", type=int, default=None, help="RNG seed override")
    common.add_argument("--quality", type=int, default=None, help="JPEG quality 1..100")
    common.add_argument("--out-w", type=int, default=None, help="output width")
    common.add_argument("--out-h", type=int, default=None, help="output height")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="roistream", description=__doc__, allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth",
                       parents=[common])
    p.add_argument("--spec", help="scene spec JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--period", type=int, default=100, help="frame period ms")
    p.add_argument("--tags", help="light-tag scene: 'x1,y1 x2,y2 ...' centers")

    p = sub.add_parser("detect", parents=[common], help="run a detector over a frame or sequence")
    p.add_argument("--input", required=True, help="PPM file or sequence directory")
    p.add_argument("--mode", choices=["screen", "lighttag", "stub"], default="screen")
    p.add_argument("--out", help="candidate JSON-lines file (default stdout)")
    p.add_argument("--dump-edges", help="write pruned edge points as 'x y magnitude' lines")
    p.add_argument("--overlay-dir", help="write overlay PPMs with the candidate drawn")
    p.add_argument("--truth", help="truth.jsonl to score corner error against")
    _add_detect_params(p)

    p = sub.add_parser("warp", parents=[common], help="warp a frame or sequence by a fixed quad")
    p.add_argument("--input", required=True)
    p.add_argument("--quad", required=True, help="quad JSON [[x,y],[x,y],[x,y],[x,y]]")
    p.add_argument("--out", required=True, help="output PPM file or directory")

    p = sub.add_parser("stabilize", parents=[common], help="per-frame translation offsets vs a reference")
    p.add_argument("--input", required=True, help="sequence directory")
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--out", help="JSON-lines output (default stdout)")

    p = sub.add_parser("stream", parents=[common], help="replay a sequence through a session to a server")
    p.add_argument("--input", required=True, help="sequence directory")
    p.add_argument("--server", required=True, help="base URL, e.g. http://127.0.0.1:8700")
    p.add_argument("--session", default="cli", help="session id")
    p.add_argument("--script", help="JSON-lines event script: {t_ms, event}")
    p.add_argument("--mode", choices=[k.value for k in DetectorKind], default="screen")
    p.add_argument("--max-rate", action="store_true", help="no pacing; replay flat out")
    p.add_argument("--record-dir", help="write locally recorded frames here")
    p.add_argument("--record", action="store_true", help="start with recording on")
    p.add_argument("--no-detect", action="store_true", help="start with detection off")
    p.add_argument("--stabilize", action="store_true",
                   help="registration-adjust the locked quad between detections")
    p.add_argument("--radius", type=int, default=5, help="stabilize search radius")
    _add_detect_params(p)

    p = sub.add_parser("serve", parents=[common], help="run the ingest/publish server")
    p.add_argument("--host", default=None,
                   help="bind address (default $ROISTREAM_HOST or 127.0.0.1)")
    p.add_argument("--port", type=int, default=None,
                   help="port (default $ROISTREAM_PORT or 8700)")
    p.add_argument("--ui-dir", help="static UI assets served under /ui/")
    return parser


def _add_detect_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=None, help="Canny Gaussian sigma")
    p.add_argument("--low", type=float, default=None, help="hysteresis low ratio")
    p.add_argument("--high", type=float, default=None, help="hysteresis high ratio")
    p.add_argument("--keep", type=float, default=None, help="top edge fraction kept")
    p.add_argument("--hough-rho", type=float, default=None)
    p.add_argument("--hough-theta", type=float, default=None)
    p.add_argument("--min-votes", type=int, default=None)
    p.add_argument("--tag-threshold", type=int, default=None)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _pick(args_value, cfg: dict, key: str, default):
    if args_value is not None:
        return args_value
    return cfg.get(key, default)


def _edge_params(args, cfg: dict) -> EdgeParams:
    section = cfg.get("edge", {})
    return EdgeParams(
        gaussian_sigma=_pick(args.sigma, section, "gaussian_sigma", 1.4),
        low_ratio=_pick(args.low, section, "low_ratio", 0.1),
        high_ratio=_pick(args.high, section, "high_ratio", 0.3),
        keep_fraction=_pick(args.keep, section, "keep_fraction", 0.05),
    )


def _hough_params(args, cfg: dict) -> HoughParams:
    section = cfg.get("hough", {})
    return HoughParams(
        rho_resolution=_pick(args.hough_rho, section, "rho_resolution", 1.0),
        theta_resolution=_pick(args.hough_theta, section, "theta_resolution", np.pi / 180),
        min_votes=_pick(args.min_votes, section, "min_votes", 8),
    )


def _tag_params(args, cfg: dict) -> LightTagParams:
    section = cfg.get("lighttag", {})
    return LightTagParams(
        brightness_threshold=_pick(args.tag_threshold, section, "brightness_threshold", 240),
    )


def _output_spec(args, cfg: dict) -> OutputSpec:
    return OutputSpec(
        out_width=_pick(args.out_w, cfg, "out_w", 640),
        out_height=_pick(args.out_h, cfg, "out_h", 480),
    )


def _session_config(cfg: dict, **overrides) -> SessionConfig:
    section = dict(cfg.get("session", {}))
    section.update(overrides)
    allowed = {f for f in SessionConfig.__dataclass_fields__}
    return SessionConfig(**{k: v for k, v in section.items() if k in allowed})


def _read_frames(path: str) -> list[Frame]:
    p = Path(path)
    if p.is_dir():
        frames = read_sequence(p)
        if not frames:
            raise FileNotFoundError(f"no frames listed in {p}")
        return frames
    if p.is_file():
        return [read_ppm(p, seq=1)]
    raise FileNotFoundError(f"no such file or directory: {path}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args, cfg: dict) -> int:
    out_dir = Path(args.out)
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = synthmod.SceneSpec.from_json(json.load(fh))
    else:
        spec = synthmod.SceneSpec()
    if args.seed is not None:
        spec = synthmod.SceneSpec.from_json({**spec.to_json(), "seed": args.seed})

    if args.tags:
        positions = [tuple(int(v) for v in tok.split(",")) for tok in args.tags.split()]
        scene = synthmod.render_light_tag_scene(spec, positions)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_sequence(out_dir, [scene.frame])
        truth = {"seq": 1, "quad": scene.truth.to_json() if scene.truth else None}
        (out_dir / "truth.jsonl").write_text(json.dumps(truth) + "\n", encoding="utf-8")
        print(f"wrote 1 light-tag frame to {out_dir}")
        return EXIT_OK

    rendered = synthmod.render_scene(spec, args.frames, frame_period_ms=args.period)
    write_sequence(out_dir, [frame for frame, _ in rendered])
    with open(out_dir / "truth.jsonl", "w", encoding="utf-8") as fh:
        for frame, quad in rendered:
            fh.write(json.dumps({"seq": frame.seq, "quad": quad.to_json()}) + "\n")
    print(f"wrote {len(rendered)} frames to {out_dir}")
    return EXIT_OK


def _detector_for(mode: str, args, cfg: dict):
    kind = {"screen": DetectorKind.SCREEN, "lighttag": DetectorKind.LIGHTTAG,
            "stub": DetectorKind.FACE}.get(mode, DetectorKind(mode))
    detector = make_detector(
        kind,
        edge_params=_edge_params(args, cfg),
        hough_params=_hough_params(args, cfg),
        tag_params=_tag_params(args, cfg),
    )
    return kind, detector


def cmd_detect(args, cfg: dict) -> int:
    frames = _read_frames(args.input)
    kind, detector = _detector_for(args.mode, args, cfg)
    edge_params = _edge_params(args, cfg)

    truth: dict[int, Quad] = {}
    if args.truth:
        with open(args.truth, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    if rec.get("quad"):
                        truth[int(rec["seq"])] = Quad.from_json(rec["quad"])

    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    overlay_dir = Path(args.overlay_dir) if args.overlay_dir else None
    if overlay_dir:
        overlay_dir.mkdir(parents=True, exist_ok=True)

    errors = []
    detected = 0
    try:
        for frame in frames:
            gray = to_grayscale(frame)
            if args.dump_edges:
                points = top_fraction(canny(gray, edge_params), edge_params.keep_fraction)
                with open(args.dump_edges, "w", encoding="utf-8") as fh:
                    for pt in points:
                        fh.write(f"{pt.x} {pt.y} {pt.magnitude:.6f}\n")
            try:
                cand = detector(gray, frame.seq)
            except RoiStreamError as exc:
                out_fh.write(json.dumps({"seq": frame.seq, "error": type(exc).__name__}) + "\n")
                continue
            detected += 1
            out_fh.write(
                json.dumps({"seq": frame.seq, "source": cand.source.value,
                            "quad": cand.quad.to_json()}) + "\n"
            )
            if overlay_dir:
                overlay = _draw_quad(frame, cand.quad, COLOR_CANDIDATE)
                write_ppm(overlay_dir / f"overlay_{frame.seq:06d}.ppm", overlay)
            if frame.seq in truth:
                errors.append(_corner_rms(cand.quad, truth[frame.seq]))
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()

    print(f"detected {detected}/{len(frames)} frames", file=sys.stderr)
    if truth:
        scored = len(errors)
        rms = float(np.mean(errors)) if errors else float("nan")
        worst = float(np.max(errors)) if errors else float("nan")
        print(
            f"truth: {scored}/{len(frames)} scored, mean corner RMS {rms:.2f} px, "
            f"worst {worst:.2f} px",
            file=sys.stderr,
        )
    return EXIT_OK


def _corner_rms(found: Quad, truth: Quad) -> float:
    d2 = [
        (fx - tx) ** 2 + (fy - ty) ** 2
        for (fx, fy), (tx, ty) in zip(found.corners, truth.corners)
    ]
    return float(np.sqrt(np.mean(d2)))


def _draw_quad(frame: Frame, quad: Quad, color: tuple[int, int, int]) -> Frame:
    px = frame.pixels.copy()
    for i in range(4):
        x0, y0 = quad.corners[i]
        x1, y1 = quad.corners[(i + 1) % 4]
        n = int(max(abs(x1 - x0), abs(y1 - y0)) * 2) + 2
        xs = np.clip(np.round(np.linspace(x0, x1, n)).astype(int), 0, frame.width - 1)
        ys = np.clip(np.round(np.linspace(y0, y1, n)).astype(int), 0, frame.height - 1)
        px[ys, xs] = color
    return Frame(frame.width, frame.height, px,
                 timestamp_ms=frame.timestamp_ms, seq=frame.seq)


def cmd_warp(args, cfg: dict) -> int:
    frames = _read_frames(args.input)
    quad = Quad.from_json(json.loads(args.quad))
    spec = _output_spec(args, cfg)
    out = Path(args.out)
    if out.suffix == ".ppm":
        if len(frames) != 1:
            raise ValueError("single-file output needs a single input frame")
        write_ppm(out, warp_crop(frames[0], quad, spec))
        print(f"wrote {out}")
        return EXIT_OK
    write_sequence(out, [warp_crop(f, quad, spec) for f in frames])
    print(f"wrote {len(frames)} warped frames to {out}")
    return EXIT_OK


def cmd_stabilize(args, cfg: dict) -> int:
    frames = _read_frames(args.input)
    reference = to_grayscale(frames[0])
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for frame in frames:
            reg = register_translation(reference, to_grayscale(frame), args.radius)
            out_fh.write(
                json.dumps({"seq": frame.seq, "dx": reg.dx, "dy": reg.dy,
                            "score": round(reg.score, 6)}) + "\n"
            )
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()
    return EXIT_OK


def _load_script(path: str | None) -> list[tuple[int, dict]]:
    if not path:
        return []
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                events.append((int(rec["t_ms"]), rec["event"]))
    return events


def cmd_stream(args, cfg: dict) -> int:
    frames = _read_frames(args.input)
    events = _load_script(args.script)
    quality = _pick(args.quality, cfg, "quality", 80)
    mode = DetectorKind(args.mode)
    session = Session(
        _session_config(
            cfg,
            initial_mode=mode,
            detecting=not args.no_detect,
            recording=bool(args.record or args.record_dir),
            streaming=True,
            frame_width=frames[0].width,
            frame_height=frames[0].height,
        )
    )
    _, detector = _detector_for(args.mode, args, cfg)
    record_dir = Path(args.record_dir) if args.record_dir else None
    if record_dir:
        record_dir.mkdir(parents=True, exist_ok=True)
    client = StreamClient(args.server)

    stab_ref = {"gray": None, "quad": None}

    def effective_quad(effect: StreamEffect, frame_gray) -> Quad:
        state = session.state
        if not args.stabilize or state.locked is None:
            stab_ref["gray"] = None
            return effect.quad
        if stab_ref["gray"] is None or stab_ref["quad"] is not state.locked:
            stab_ref["gray"] = frame_gray
            stab_ref["quad"] = state.locked
            return effect.quad
        reg = register_translation(stab_ref["gray"], frame_gray, args.radius)
        return apply_offset(state.locked, reg)

    posted = {"count": 0, "last_seq": 0}

    def on_stream(effect: StreamEffect, t_ms: int) -> None:
        frame = effect.frame
        quad = effect.quad
        if args.stabilize:
            quad = effective_quad(effect, to_grayscale(frame))
        if not args.max_rate:
            _pace(frame.timestamp_ms)
        packet = FramePacket(
            session_id=args.session,
            seq=frame.seq,
            timestamp_ms=frame.timestamp_ms,
            quad=quad,
            mode=effect.mode,
            image=encode_frame(frame, quality),
        )
        try:
            client.post_packet(packet)
        except (requests.RequestException, RoiStreamError) as exc:
            raise _StreamAbort(frame.seq, exc) from exc
        posted["count"] += 1
        posted["last_seq"] = frame.seq
        print(f"t={t_ms} stream seq={frame.seq} quad={quad.to_json()}")

    start_wall = time.monotonic()

    def _pace(timestamp_ms: int) -> None:
        target = start_wall + timestamp_ms / 1000.0
        delay = target - time.monotonic()
        if delay > 0:
            time.sleep(delay)

    def on_record(frame: Frame) -> None:
        if record_dir:
            write_ppm(record_dir / f"frame_{frame.seq:06d}.ppm", frame)
        print(f"t={frame.timestamp_ms} record seq={frame.seq}")

    def run_detector(frame: Frame):
        if detector is None:
            return None
        return detector(to_grayscale(frame), frame.seq)

    try:
        dispatch = replay(
            session,
            frames,
            events,
            detector=run_detector if not args.no_detect else None,
            on_record=on_record,
            on_stream=on_stream,
        )
    except _StreamAbort as abort:
        print(f"stream failed at seq={abort.seq}: {abort.cause}", file=sys.stderr)
        return EXIT_PROTOCOL
    finally:
        client.close()
    detects = sum(1 for d in dispatch if d.kind == "detect")
    print(
        f"done: {posted['count']} posted (last seq {posted['last_seq']}), "
        f"{detects} detect dispatches",
        file=sys.stderr,
    )
    return EXIT_OK


class _StreamAbort(Exception):
    def __init__(self, seq: int, cause: Exception):
        super().__init__(f"seq {seq}: {cause}")
        self.seq = seq
        self.cause = cause


def cmd_serve(args, cfg: dict) -> int:
    import os

    ui_dir = args.ui_dir
    if ui_dir is None:
        default_ui = Path("frontend/dist")
        if default_ui.is_dir():
            ui_dir = str(default_ui)
    host = args.host or os.environ.get("ROISTREAM_HOST", "127.0.0.1")
    port = args.port if args.port is not None else int(os.environ.get("ROISTREAM_PORT", "8700"))
    quality = args.quality
    if quality is None and "ROISTREAM_QUALITY" in os.environ:
        quality = int(os.environ["ROISTREAM_QUALITY"])
    config = ServerConfig(
        host=host,
        port=port,
        quality=_pick(quality, cfg, "quality", 80),
        output_spec=_output_spec(args, cfg),
        ui_dir=ui_dir,
    )
    try:
        server, hub = build_server(config)
    except OSError as exc:
        print(f"cannot bind {config.host}:{config.port}: {exc}", file=sys.stderr)
        return EXIT_IO
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (ui={'on' if ui_dir else 'off'})")
    try:
        server.serve_forever(poll_interval=0.2)
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
        for line in hub.summary():
            print(line, file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------

_COMMANDS = {
    "synth": cmd_synth,
    "detect": cmd_detect,
    "warp": cmd_warp,
    "stabilize": cmd_stabilize,
    "stream": cmd_stream,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (requests.RequestException,) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except RoiStreamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
