"""Quadrant partitioning, Hough dominant-line fitting, and quad construction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .edges import EdgePoint
from .errors import DegenerateQuad, NoDominantLine, ParallelLines
from .geometry import Point, Quad

# corners may poke this far beyond the frame before the quad is rejected
OUT_OF_FRAME_SLACK = 0.10


class Line(NamedTuple):
    """Normal form: x*cos(theta) + y*sin(theta) = rho, theta in [0, pi)."""

    rho: float
    theta: float


@dataclass(frozen=True)
class HoughParams:
    rho_resolution: float = 1.0
    theta_resolution: float = math.pi / 180.0
    min_votes: int = 8

    def __post_init__(self) -> None:
        if self.rho_resolution <= 0 or self.theta_resolution <= 0:
            raise ValueError("resolutions must be positive")
        if self.min_votes < 2:
            raise ValueError("min_votes must be at least 2")


def partition_halves(
    points: Sequence[EdgePoint], width: int, height: int
) -> tuple[list[EdgePoint], list[EdgePoint], list[EdgePoint], list[EdgePoint]]:
    """Split points into (top, bottom, left, right) half lists.

    Boundary pixels on the exact midline go to bottom/right, so every point
    lands in exactly one vertical half and one horizontal half.
    """
    half_y = height / 2.0
    half_x = width / 2.0
    top = [p for p in points if p.y < half_y]
    bottom = [p for p in points if p.y >= half_y]
    left = [p for p in points if p.x < half_x]
    right = [p for p in points if p.x >= half_x]
    return top, bottom, left, right


def hough_dominant(points: Sequence[EdgePoint], params: HoughParams = HoughParams()) -> Line:
    """Dominant line through a point set via a discretized (rho, theta) accumulator.

    Every point votes once per theta bin at the nearest rho bin; the winning
    bin center is returned. Ties break toward smaller theta, then smaller rho.
    """
    if not points:
        raise NoDominantLine("empty point set")
    xs = np.array([p.x for p in points], dtype=np.float64)
    ys = np.array([p.y for p in points], dtype=np.float64)

    n_theta = int(round(math.pi / params.theta_resolution))
    thetas = np.arange(n_theta, dtype=np.float64) * params.theta_resolution
    cos_t = np.cos(thetas)
    sin_t = np.sin(thetas)

    max_abs_rho = float(np.max(np.hypot(xs, ys))) + params.rho_resolution
    n_rho_half = int(math.ceil(max_abs_rho / params.rho_resolution))
    n_rho = 2 * n_rho_half + 1

    # rho bin index per (point, theta); offset so indices are nonnegative
    rho = xs[:, None] * cos_t[None, :] + ys[:, None] * sin_t[None, :]
    bins = np.rint(rho / params.rho_resolution).astype(np.int64) + n_rho_half

    # theta-major flattening makes argmax's first-hit order match the tie rule
    flat = np.arange(n_theta, dtype=np.int64)[None, :] * n_rho + bins
    acc = np.bincount(flat.ravel(), minlength=n_theta * n_rho)
    best = int(np.argmax(acc))
    votes = int(acc[best])
    if votes < params.min_votes:
        raise NoDominantLine(f"best bin has {votes} votes, need {params.min_votes}")
    theta_idx, rho_idx = divmod(best, n_rho)
    return Line(
        rho=(rho_idx - n_rho_half) * params.rho_resolution,
        theta=theta_idx * params.theta_resolution,
    )


def intersect(l1: Line, l2: Line) -> Point:
    """Intersection point of two lines in normal form."""
    det = math.cos(l1.theta) * math.sin(l2.theta) - math.sin(l1.theta) * math.cos(l2.theta)
    if abs(det) < 1e-6:
        raise ParallelLines(f"lines {l1} and {l2} are (near-)parallel")
    x = (l1.rho * math.sin(l2.theta) - l2.rho * math.sin(l1.theta)) / det
    y = (l2.rho * math.cos(l1.theta) - l1.rho * math.cos(l2.theta)) / det
    return (x, y)


def build_quad(top: Line, bottom: Line, left: Line, right: Line, width: int, height: int) -> Quad:
    """Corner the four side lines: TL, TR, BR, BL by pairwise intersection.

    Corners may extend up to 10% of the frame dimension beyond the frame;
    anything further, or a non-convex/too-small result, is DegenerateQuad.
    """
    tl = intersect(top, left)
    tr = intersect(top, right)
    br = intersect(bottom, right)
    bl = intersect(bottom, left)
    corners = (tl, tr, br, bl)
    slack_x = OUT_OF_FRAME_SLACK * width
    slack_y = OUT_OF_FRAME_SLACK * height
    for x, y in corners:
        if not (-slack_x <= x <= width + slack_x and -slack_y <= y <= height + slack_y):
            raise DegenerateQuad(
                f"corner ({x:.1f},{y:.1f}) beyond {OUT_OF_FRAME_SLACK:.0%} slack "
                f"of {width}x{height} frame"
            )
    return Quad(corners)
