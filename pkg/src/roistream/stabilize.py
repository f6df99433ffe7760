"""Frame-to-reference translation registration to keep a locked ROI aligned
between explicit detections."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlatImage
from .geometry import Quad
from .imaging import GrayFrame


@dataclass(frozen=True)
class Registration:
    dx: int
    dy: int
    score: float  # zero-mean normalized cross-correlation in [-1, 1]


def register_translation(
    reference: GrayFrame, current: GrayFrame, search_radius: int = 5
) -> Registration:
    """Exhaustive integer-offset search maximizing zero-mean NCC over the
    overlapping region.

    The returned (dx, dy) is the content shift: reference pixel (x, y)
    matches current pixel (x + dx, y + dy). Ties break toward the smaller
    |dx| + |dy|, then raster order (dy, dx).
    """
    if (reference.width, reference.height) != (current.width, current.height):
        raise ValueError("frames must have equal dimensions")
    if search_radius < 1:
        raise ValueError("search_radius must be at least 1")
    ref = reference.pixels.astype(np.float64)
    cur = current.pixels.astype(np.float64)
    h, w = ref.shape
    if w <= 2 * search_radius or h <= 2 * search_radius:
        raise ValueError("frames too small for the search radius")

    best: tuple[float, int, int, int] | None = None  # (-score, |dx|+|dy|, dy, dx)
    best_reg: Registration | None = None
    for dy in range(-search_radius, search_radius + 1):
        for dx in range(-search_radius, search_radius + 1):
            rx0, rx1 = max(0, -dx), min(w, w - dx)
            ry0, ry1 = max(0, -dy), min(h, h - dy)
            a = ref[ry0:ry1, rx0:rx1]
            b = cur[ry0 + dy : ry1 + dy, rx0 + dx : rx1 + dx]
            a = a - a.mean()
            b = b - b.mean()
            denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
            if denom <= 0.0:
                continue  # flat overlap in one of the frames
            score = float(np.sum(a * b) / denom)
            key = (-score, abs(dx) + abs(dy), dy, dx)
            if best is None or key < best:
                best = key
                best_reg = Registration(dx=dx, dy=dy, score=score)
    if best_reg is None:
        raise FlatImage("zero variance in every candidate overlap")
    return best_reg


def apply_offset(quad: Quad, reg: Registration) -> Quad:
    """Translate every corner by the registered offset; translation preserves
    convexity, ordering, and area."""
    return quad.translate(reg.dx, reg.dy)
