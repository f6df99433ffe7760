"""Synthetic scene and trace generation: the ground-truth factory for tests."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import SpecOutOfBounds
from .geometry import Quad, order_corners_clockwise
from .imaging import Frame

TextureKind = Literal["uniform", "checker", "stripes"]

QUAD_MARGIN = 5

# (base, accent) luma per role; interior stays bright (mean >= 200),
# background stays dark (mean <= 80). Background stripe contrast is high
# enough that dash edges survive Canny hysteresis: the screen boundary must
# be found among many competing edges, not in an empty field.
_INTERIOR_PALETTE = {"uniform": (220, 220), "checker": (205, 235), "stripes": (230, 185)}
_BACKGROUND_PALETTE = {"uniform": (50, 50), "checker": (40, 60), "stripes": (45, 115)}


@dataclass(frozen=True)
class SceneSpec:
    width: int = 640
    height: int = 480
    true_quad: Quad = None  # type: ignore[assignment]
    interior: TextureKind = "uniform"
    background: TextureKind = "stripes"
    noise_sigma: float = 2.0
    drift: tuple[int, int] = (0, 0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.true_quad is None:
            object.__setattr__(
                self, "true_quad", _default_quad(self.width, self.height)
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.interior not in _INTERIOR_PALETTE or self.background not in _BACKGROUND_PALETTE:
            raise ValueError("texture kind must be uniform|checker|stripes")

    @classmethod
    def from_json(cls, obj: dict) -> SceneSpec:
        kwargs = dict(obj)
        if "true_quad" in kwargs and kwargs["true_quad"] is not None:
            kwargs["true_quad"] = Quad.from_json(kwargs["true_quad"])
        if "drift" in kwargs:
            kwargs["drift"] = (int(kwargs["drift"][0]), int(kwargs["drift"][1]))
        return cls(**kwargs)

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "true_quad": self.true_quad.to_json(),
            "interior": self.interior,
            "background": self.background,
            "noise_sigma": self.noise_sigma,
            "drift": list(self.drift),
            "seed": self.seed,
        }


def _default_quad(width: int, height: int) -> Quad:
    # a mildly off-axis view, every side tilted a few degrees
    sx, sy = width / 640.0, height / 480.0
    return Quad(
        (
            (130.0 * sx, 105.0 * sy),
            (515.0 * sx, 85.0 * sy),
            (525.0 * sx, 390.0 * sy),
            (115.0 * sx, 370.0 * sy),
        )
    )


def random_convex_quad(
    rng: np.random.Generator,
    width: int = 640,
    height: int = 480,
    max_tilt_deg: float = 4.0,
    tilt_step_deg: float = 1.0,
) -> Quad:
    """Perspective-distorted quad built from four tilted side lines, the way a
    screen looks from an off-axis hand-held camera: each side keeps a small
    tilt from its axis and the corners are the line intersections.

    Tilts are drawn in tilt_step_deg increments (plus sub-degree noise) so the
    edge population stays spread across distinct orientations. Redraws until
    the corners are convex and in-margin.
    """
    cx, cy = width / 2.0, height / 2.0
    while True:
        # side positions as offsets from center; the quad fills over half the
        # frame each way so every side stays well clear of the frame midlines
        half_w = width * rng.uniform(0.26, 0.31)
        half_h = height * rng.uniform(0.32, 0.38)
        jx = rng.uniform(-20.0, 20.0)
        jy = rng.uniform(-15.0, 15.0)
        # every side gets a visible tilt (at least one step away from its
        # axis); an axis-aligned side would make the scene a plain rectangle
        steps = int(round(max_tilt_deg / tilt_step_deg))
        tilts = [
            float(rng.choice((-1, 1)))
            * (tilt_step_deg * rng.integers(1, steps + 1) + rng.uniform(-0.15, 0.15))
            for _ in range(4)
        ]
        t_top, t_bottom, t_left, t_right = (math.radians(t) for t in tilts)

        # lines in (rho, theta) normal form anchored at the side midpoints;
        # horizontal sides have theta near pi/2, vertical sides near 0
        def through(px, py, theta):
            return (px * math.cos(theta) + py * math.sin(theta), theta)

        top = through(cx, cy - half_h + jy, math.pi / 2 + t_top)
        bottom = through(cx, cy + half_h + jy, math.pi / 2 + t_bottom)
        left = through(cx - half_w + jx, cy, t_left)
        right = through(cx + half_w + jx, cy, t_right)

        def cross(l1, l2):
            r1, th1 = l1
            r2, th2 = l2
            det = math.cos(th1) * math.sin(th2) - math.sin(th1) * math.cos(th2)
            x = (r1 * math.sin(th2) - r2 * math.sin(th1)) / det
            y = (r2 * math.cos(th1) - r1 * math.cos(th2)) / det
            return (x, y)

        corners = (cross(top, left), cross(top, right), cross(bottom, right), cross(bottom, left))
        try:
            quad = Quad(corners)
        except Exception:
            continue
        if all(
            QUAD_MARGIN <= x <= width - QUAD_MARGIN and QUAD_MARGIN <= y <= height - QUAD_MARGIN
            for x, y in corners
        ):
            return quad


def _texture(kind: TextureKind, width: int, height: int, palette: tuple[int, int],
             rng: np.random.Generator) -> np.ndarray:
    base, accent = palette
    img = np.full((height, width), base, dtype=np.float64)
    if kind == "uniform":
        return img
    if kind == "checker":
        block = 8
        yy, xx = np.mgrid[0:height, 0:width]
        img[((yy // block) + (xx // block)) % 2 == 1] = accent
        return img
    # "stripes": rows of text-like dashes at random lengths and gaps
    y = int(rng.integers(2, 8))
    while y < height - 3:
        x = int(rng.integers(0, 12))
        while x < width:
            run = int(rng.integers(6, 30))
            gap = int(rng.integers(3, 10))
            img[y : y + 3, x : min(x + run, width)] = accent
            x += run + gap
        y += int(rng.integers(8, 13))
    return img


def _quad_mask(quad: Quad, width: int, height: int) -> np.ndarray:
    """Pixels whose centers fall inside the (convex, clockwise) quad."""
    yy, xx = np.mgrid[0:height, 0:width]
    cx = xx + 0.5
    cy = yy + 0.5
    mask = np.ones((height, width), dtype=bool)
    for i in range(4):
        ax, ay = quad.corners[i]
        bx, by = quad.corners[(i + 1) % 4]
        mask &= (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) >= 0
    return mask


def _check_margins(quad: Quad, width: int, height: int) -> None:
    for x, y in quad.corners:
        if not (QUAD_MARGIN <= x <= width - QUAD_MARGIN and QUAD_MARGIN <= y <= height - QUAD_MARGIN):
            raise SpecOutOfBounds(
                f"corner ({x:.1f},{y:.1f}) within {QUAD_MARGIN} px of the "
                f"{width}x{height} frame edge"
            )


def _to_rgb_frame(luma: np.ndarray, timestamp_ms: int, seq: int) -> Frame:
    px = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    h, w = px.shape
    return Frame(w, h, np.repeat(px[:, :, None], 3, axis=2), timestamp_ms=timestamp_ms, seq=seq)


def render_scene(
    spec: SceneSpec, n_frames: int, frame_period_ms: int = 100
) -> list[tuple[Frame, Quad]]:
    """Render a deterministic frame sequence with per-frame ground-truth quads.

    Drift models a panning camera: frame k's quad is the spec quad translated
    by k * drift and the whole scene (interior and background textures) rides
    along with it. Noise is drawn from one seeded generator so identical specs
    give byte-identical sequences.
    """
    dx, dy = spec.drift
    truths = []
    for k in range(n_frames):
        quad = spec.true_quad.translate(k * dx, k * dy)
        _check_margins(quad, spec.width, spec.height)
        truths.append(quad)

    rng = np.random.default_rng(spec.seed)
    bg = _texture(spec.background, spec.width, spec.height, _BACKGROUND_PALETTE[spec.background], rng)
    interior = _texture(spec.interior, spec.width, spec.height, _INTERIOR_PALETTE[spec.interior], rng)

    out = []
    for k, quad in enumerate(truths):
        mask = _quad_mask(quad, spec.width, spec.height)
        shift = (k * dy, k * dx)
        luma = np.where(mask, np.roll(interior, shift, axis=(0, 1)),
                        np.roll(bg, shift, axis=(0, 1)))
        if spec.noise_sigma > 0:
            luma = luma + rng.normal(0.0, spec.noise_sigma, size=luma.shape)
        out.append((_to_rgb_frame(luma, timestamp_ms=k * frame_period_ms, seq=k + 1), quad))
    return out


@dataclass(frozen=True)
class LightTagScene:
    frame: Frame
    tags: tuple[tuple[int, int], ...]
    truth: Quad | None  # None when tags merge or do not form a valid quad


def render_light_tag_scene(
    spec: SceneSpec, tag_positions: list[tuple[int, int]], seq: int = 1
) -> LightTagScene:
    """Dark scene with saturated 3x3 blobs centered at the given positions.

    Ground truth is the TL,TR,BR,BL ordering of the positions; it is marked
    invalid (None) when blobs merge into fewer components or the corner set
    is degenerate.
    """
    for x, y in tag_positions:
        if not (1 <= x < spec.width - 1 and 1 <= y < spec.height - 1):
            raise SpecOutOfBounds(f"tag ({x},{y}) does not fit in {spec.width}x{spec.height}")
    rng = np.random.default_rng(spec.seed)
    luma = _texture(spec.background, spec.width, spec.height,
                    _BACKGROUND_PALETTE[spec.background], rng)
    blob_mask = np.zeros(luma.shape, dtype=bool)
    for x, y in tag_positions:
        blob_mask[y - 1 : y + 2, x - 1 : x + 2] = True
    luma[blob_mask] = 255.0

    merged = _count_components(blob_mask) != len(tag_positions)
    if spec.noise_sigma > 0:
        noise = rng.normal(0.0, spec.noise_sigma, size=luma.shape)
        noise[blob_mask] = 0.0  # tags are saturated markers
        luma = luma + noise

    truth: Quad | None = None
    if len(tag_positions) == 4 and not merged:
        try:
            truth = Quad(order_corners_clockwise([(float(x), float(y)) for x, y in tag_positions]))
        except Exception:
            truth = None
    return LightTagScene(
        frame=_to_rgb_frame(luma, timestamp_ms=0, seq=seq),
        tags=tuple((int(x), int(y)) for x, y in tag_positions),
        truth=truth,
    )


def _count_components(mask: np.ndarray) -> int:
    from scipy import ndimage

    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int8)
    _, count = ndimage.label(mask, structure=structure)
    return count
