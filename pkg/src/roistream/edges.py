"""Canny edge detection and significance-based edge pruning."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .imaging import GrayFrame


class EdgePoint(NamedTuple):
    x: int
    y: int
    magnitude: float


@dataclass(frozen=True)
class EdgeParams:
    gaussian_sigma: float = 1.4
    low_ratio: float = 0.1
    high_ratio: float = 0.3
    keep_fraction: float = 0.05

    def __post_init__(self) -> None:
        if not 0 < self.low_ratio < self.high_ratio <= 1:
            raise ValueError("need 0 < low_ratio < high_ratio <= 1")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("need 0 < keep_fraction <= 1")
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be positive")


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def smooth(gray: GrayFrame, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of the luma plane, float64, reflect-padded."""
    kernel = gaussian_kernel(sigma)
    img = gray.pixels.astype(np.float64)
    img = ndimage.correlate1d(img, kernel, axis=1, mode="reflect")
    img = ndimage.correlate1d(img, kernel, axis=0, mode="reflect")
    return img


def sobel_gradients(smoothed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients (gx, gy) of a smoothed image, y pointing down."""
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
    ky = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)
    gx = ndimage.correlate(smoothed, kx, mode="nearest")
    gy = ndimage.correlate(smoothed, ky, mode="nearest")
    return gx, gy


def canny(gray: GrayFrame, params: EdgeParams = EdgeParams()) -> list[EdgePoint]:
    """Standard Canny pipeline: Gaussian smooth, Sobel gradients, 4-direction
    non-maximum suppression, double-threshold hysteresis.

    Surviving pixels are emitted in raster order with their gradient magnitude.
    A boundary apron (smoothing radius + 2 pixels) is excluded because the
    gradients there depend on padding rather than data.
    """
    height, width = gray.pixels.shape
    smoothed = smooth(gray, params.gaussian_sigma)
    gx, gy = sobel_gradients(smoothed)
    mag = np.hypot(gx, gy)

    margin = int(math.ceil(3.0 * params.gaussian_sigma)) + 2
    if width <= 2 * margin or height <= 2 * margin:
        return []
    valid = np.zeros_like(mag, dtype=bool)
    valid[margin : height - margin, margin : width - margin] = True

    max_mag = float(mag[valid].max()) if valid.any() else 0.0
    if max_mag <= 0.0:
        return []
    high = params.high_ratio * max_mag
    low = params.low_ratio * max_mag

    # quantize gradient direction to 4 bins: 0=E/W, 1=NE/SW, 2=N/S, 3=NW/SE
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(np.int8) % 4

    # neighbor offsets along the gradient direction, (dy, dx); plateau ties
    # resolve to the pixel whose backward neighbor is strictly smaller, so
    # ridges stay one pixel wide
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros_like(mag, dtype=bool)
    inner = np.s_[1:-1, 1:-1]
    for s, (dy, dx) in offsets.items():
        fwd = mag[1 + dy : height - 1 + dy, 1 + dx : width - 1 + dx]
        bwd = mag[1 - dy : height - 1 - dy, 1 - dx : width - 1 - dx]
        m = mag[inner]
        sel = (sector[inner] == s) & (m >= fwd) & (m > bwd) & (m > 0)
        keep[inner] |= sel
    keep &= valid

    weak = keep & (mag >= low)
    strong = keep & (mag >= high)
    if not strong.any():
        return []
    # hysteresis: keep weak pixels 8-connected to a strong pixel
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=np.int8))
    strong_labels = np.unique(labels[strong])
    final = weak & np.isin(labels, strong_labels[strong_labels > 0])

    ys, xs = np.nonzero(final)
    mags = mag[ys, xs]
    return [EdgePoint(int(x), int(y), float(m)) for x, y, m in zip(xs, ys, mags)]


def top_fraction(edges: list[EdgePoint], keep_fraction: float) -> list[EdgePoint]:
    """Keep the ceil(keep_fraction * n) points with the largest magnitudes.

    Ties break by (y, x) ascending so the result is deterministic.
    """
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must be in (0, 1]")
    n = len(edges)
    if n == 0:
        return []
    # tolerance guards against float error flipping an exact product over the ceil
    k = int(math.ceil(keep_fraction * n - 1e-9))
    k = min(max(k, 1), n)
    ranked = sorted(edges, key=lambda p: (-p.magnitude, p.y, p.x))
    return ranked[:k]
