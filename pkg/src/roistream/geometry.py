"""Quadrilateral ROI type, 4-point homography solve, and perspective warp/crop."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateQuad, EmptyRegion, SingularSystem
from .imaging import Frame

MIN_QUAD_AREA = 64.0

Point = tuple[float, float]


class Rect(NamedTuple):
    """Axis-aligned integer pixel rectangle."""

    x: int
    y: int
    width: int
    height: int


@dataclass(frozen=True)
class Quad:
    """Convex quadrilateral, corners ordered TL, TR, BR, BL, clockwise in image
    coordinates (y down). Area must be at least MIN_QUAD_AREA square pixels.
    """

    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self) -> None:
        corners = tuple((float(x), float(y)) for x, y in self.corners)
        if len(corners) != 4:
            raise DegenerateQuad(f"expected 4 corners, got {len(corners)}")
        object.__setattr__(self, "corners", corners)
        for i in range(4):
            ax, ay = corners[i]
            bx, by = corners[(i + 1) % 4]
            cx, cy = corners[(i + 2) % 4]
            cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            # positive cross for every consecutive edge pair <=> convex and
            # clockwise with y pointing down
            if cross <= 0:
                raise DegenerateQuad(f"corners not convex/clockwise at index {i}")
        if self.area() < MIN_QUAD_AREA:
            raise DegenerateQuad(f"area {self.area():.2f} below {MIN_QUAD_AREA}")

    @classmethod
    def full_frame(cls, width: float, height: float) -> Quad:
        return cls(((0.0, 0.0), (float(width), 0.0), (float(width), float(height)), (0.0, float(height))))

    @classmethod
    def from_rect(cls, x0: float, y0: float, x1: float, y1: float) -> Quad:
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    @classmethod
    def from_json(cls, obj: object) -> Quad:
        if not isinstance(obj, (list, tuple)) or len(obj) != 4:
            raise DegenerateQuad(f"quad JSON must be a 4-element array: {obj!r}")
        corners = []
        for pt in obj:
            if not isinstance(pt, (list, tuple)) or len(pt) != 2:
                raise DegenerateQuad(f"quad corner must be [x, y]: {pt!r}")
            corners.append((float(pt[0]), float(pt[1])))
        return cls(tuple(corners))

    def to_json(self) -> list[list[float]]:
        return [[x, y] for x, y in self.corners]

    def area(self) -> float:
        total = 0.0
        for i in range(4):
            ax, ay = self.corners[i]
            bx, by = self.corners[(i + 1) % 4]
            total += ax * by - bx * ay
        return abs(total) / 2.0

    def center(self) -> Point:
        xs = [c[0] for c in self.corners]
        ys = [c[1] for c in self.corners]
        return (sum(xs) / 4.0, sum(ys) / 4.0)

    def translate(self, dx: float, dy: float) -> Quad:
        return Quad(tuple((x + dx, y + dy) for x, y in self.corners))

    def scaled_about_center(self, factor: float) -> Quad:
        cx, cy = self.center()
        return Quad(tuple((cx + (x - cx) * factor, cy + (y - cy) * factor) for x, y in self.corners))

    def contains(self, x: float, y: float) -> bool:
        for i in range(4):
            ax, ay = self.corners[i]
            bx, by = self.corners[(i + 1) % 4]
            if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < 0:
                return False
        return True

    def bounding_rect(self) -> Rect:
        """Integer pixel bounding box (floor/ceil of the corner extents)."""
        xs = [c[0] for c in self.corners]
        ys = [c[1] for c in self.corners]
        x0 = int(np.floor(min(xs)))
        y0 = int(np.floor(min(ys)))
        x1 = int(np.ceil(max(xs)))
        y1 = int(np.ceil(max(ys)))
        return Rect(x0, y0, x1 - x0, y1 - y0)


def order_corners_clockwise(points: list[Point]) -> tuple[Point, Point, Point, Point]:
    """Order four points TL, TR, BR, BL: sort by angle about their mean
    (ascending atan2 sweeps clockwise when y points down), then rotate so the
    corner with the smallest (y, x) leads."""
    if len(points) != 4:
        raise DegenerateQuad(f"expected 4 points, got {len(points)}")
    mx = sum(p[0] for p in points) / 4.0
    my = sum(p[1] for p in points) / 4.0
    ordered = sorted(points, key=lambda p: np.arctan2(p[1] - my, p[0] - mx))
    start = min(range(4), key=lambda i: (ordered[i][1], ordered[i][0]))
    return tuple(ordered[(start + i) % 4] for i in range(4))


@dataclass(frozen=True)
class OutputSpec:
    """Fixed output raster the ROI is warped onto."""

    out_width: int = 640
    out_height: int = 480

    def __post_init__(self) -> None:
        if self.out_width < 16 or self.out_height < 16:
            raise ValueError("output dimensions must be at least 16x16")

    def corners(self) -> tuple[Point, Point, Point, Point]:
        w, h = float(self.out_width), float(self.out_height)
        return ((0.0, 0.0), (w, 0.0), (w, h), (0.0, h))


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so m[2][2] == 1."""

    m: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise SingularSystem(f"homography must be 3x3, got {m.shape}")
        if abs(m[2, 2]) < 1e-12:
            raise SingularSystem("m[2][2] ~ 0, cannot normalize")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularSystem("homography not invertible")
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def apply(self, x: float, y: float) -> Point:
        v = self.m @ np.array([x, y, 1.0])
        return (v[0] / v[2], v[1] / v[2])

    def inverse(self) -> Homography:
        return Homography(np.linalg.inv(self.m))


def solve_homography(src: Quad, dst: OutputSpec) -> Homography:
    """Solve the 8-unknown linear system mapping src corners to the output rectangle
    corners (0,0), (W,0), (W,H), (0,H) in order.
    """
    a = np.zeros((8, 8), dtype=np.float64)
    b = np.zeros(8, dtype=np.float64)
    for i, ((x, y), (u, v)) in enumerate(zip(src.corners, dst.corners())):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        b[2 * i] = u
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i + 1] = v
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"rank-deficient correspondence system: {exc}") from exc
    m = np.array(
        [[p[0], p[1], p[2]], [p[3], p[4], p[5]], [p[6], p[7], 1.0]], dtype=np.float64
    )
    h = Homography(m)
    for (x, y), (u, v) in zip(src.corners, dst.corners()):
        mx, my = h.apply(x, y)
        if abs(mx - u) > 1e-6 or abs(my - v) > 1e-6:
            raise SingularSystem(
                f"corner ({x},{y}) maps to ({mx},{my}), expected ({u},{v})"
            )
    return h


def _bilinear_sample(pixels: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample (h, w, 3) uint8 pixels at float index positions; outside is black."""
    h, w = pixels.shape[:2]
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    out = np.zeros(sx.shape + (3,), dtype=np.float64)
    src = pixels.astype(np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xc = np.clip(xi, 0, w - 1)
            yc = np.clip(yi, 0, h - 1)
            term = src[yc, xc] * weight[..., None]
            term[~valid] = 0.0
            out += term
    return out


def warp_crop(frame: Frame, quad: Quad, out: OutputSpec) -> Frame:
    """Resample the quad onto the output raster via the inverse homography.

    Output pixel centers are mapped back into the source plane and sampled
    bilinearly; samples falling outside the frame are black. Bilinear sampling
    at an exact integer lattice reproduces source bytes exactly, so a
    full-frame quad is the identity and integer axis-aligned sub-rectangles
    equal the plain crop.
    """
    h = solve_homography(quad, out)
    hinv = h.inverse().m
    us = np.arange(out.out_width, dtype=np.float64) + 0.5
    vs = np.arange(out.out_height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(us, vs)
    denom = hinv[2, 0] * uu + hinv[2, 1] * vv + hinv[2, 2]
    sx = (hinv[0, 0] * uu + hinv[0, 1] * vv + hinv[0, 2]) / denom
    sy = (hinv[1, 0] * uu + hinv[1, 1] * vv + hinv[1, 2]) / denom
    # pixel-center coordinates -> array index space
    sampled = _bilinear_sample(frame.pixels, sx - 0.5, sy - 0.5)
    px = np.clip(np.floor(sampled + 0.5), 0, 255).astype(np.uint8)
    return Frame(
        out.out_width, out.out_height, px, timestamp_ms=frame.timestamp_ms, seq=frame.seq
    )


def crop_axis_aligned(frame: Frame, bbox: Rect) -> Frame:
    """Plain pixel copy of bbox intersected with the frame."""
    x0 = max(bbox.x, 0)
    y0 = max(bbox.y, 0)
    x1 = min(bbox.x + bbox.width, frame.width)
    y1 = min(bbox.y + bbox.height, frame.height)
    if x1 <= x0 or y1 <= y0:
        raise EmptyRegion(f"bbox {bbox} does not intersect {frame.width}x{frame.height} frame")
    px = frame.pixels[y0:y1, x0:x1]
    return Frame(x1 - x0, y1 - y0, px, timestamp_ms=frame.timestamp_ms, seq=frame.seq)
