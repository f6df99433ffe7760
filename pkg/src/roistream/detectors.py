"""ROI-source strategies: screen detection, light tags, and a pluggable
blob detector standing in for a platform face detector."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import ndimage

from .edges import EdgeParams, canny, top_fraction
from .errors import DegenerateQuad, NoBlob, NoEdges, TagCountMismatch
from .geometry import Quad, order_corners_clockwise
from .imaging import GrayFrame
from .lines import HoughParams, build_quad, hough_dominant, partition_halves

STUB_BLOB_THRESHOLD = 200


class DetectorKind(str, Enum):
    MANUAL = "manual"
    SCREEN = "screen"
    LIGHTTAG = "lighttag"
    FACE = "face"


@dataclass(frozen=True)
class LightTagParams:
    brightness_threshold: int = 240
    min_blob_area: int = 4
    max_blob_area: int = 400

    def __post_init__(self) -> None:
        if not 0 < self.brightness_threshold <= 255:
            raise ValueError("brightness_threshold must be in 1..255")
        if not 0 < self.min_blob_area <= self.max_blob_area:
            raise ValueError("need 0 < min_blob_area <= max_blob_area")


@dataclass(frozen=True)
class RoiCandidate:
    quad: Quad
    source: DetectorKind
    frame_seq: int = 0


# a detector maps one gray frame to a candidate, raising on "no candidate"
Detector = Callable[[GrayFrame], RoiCandidate]


def detect_screen(
    gray: GrayFrame,
    edge_params: EdgeParams = EdgeParams(),
    hough_params: HoughParams = HoughParams(),
    frame_seq: int = 0,
) -> RoiCandidate:
    """Screen detection: edge detect, prune to the most significant edges,
    split into frame halves, fit the dominant line per half, intersect into
    a quad.
    """
    points = canny(gray, edge_params)
    if not points:
        raise NoEdges("no edges detected")
    points = top_fraction(points, edge_params.keep_fraction)
    top, bottom, left, right = partition_halves(points, gray.width, gray.height)
    top_line = hough_dominant(top, hough_params)
    bottom_line = hough_dominant(bottom, hough_params)
    left_line = hough_dominant(left, hough_params)
    right_line = hough_dominant(right, hough_params)
    quad = build_quad(top_line, bottom_line, left_line, right_line, gray.width, gray.height)
    return RoiCandidate(quad=quad, source=DetectorKind.SCREEN, frame_seq=frame_seq)


def _connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    # 4-connected labeling
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int8)
    return ndimage.label(mask, structure=structure)


def detect_light_tags(
    gray: GrayFrame,
    params: LightTagParams = LightTagParams(),
    frame_seq: int = 0,
) -> RoiCandidate:
    """Find four bright marker blobs and use their centroids as the ROI corners.

    Components within the area band are ranked by peak luma (ties: larger
    area, then centroid raster order); the top four are ordered by angle
    around their mean and rotated so the corner with the smallest (y, x)
    becomes TL.
    """
    px = gray.pixels
    mask = px >= params.brightness_threshold
    labels, count = _connected_components(mask)
    if count == 0:
        raise TagCountMismatch("found 0 qualifying tags, need 4")
    areas = np.bincount(labels.ravel())
    blobs = []
    for label, slc in enumerate(ndimage.find_objects(labels), start=1):
        if slc is None:
            continue
        area = int(areas[label])
        if not params.min_blob_area <= area <= params.max_blob_area:
            continue
        local = labels[slc] == label
        ys, xs = np.nonzero(local)
        peak = int(px[slc][local].max())
        cx = float(xs.mean()) + slc[1].start
        cy = float(ys.mean()) + slc[0].start
        blobs.append((peak, area, cx, cy))
    if len(blobs) < 4:
        raise TagCountMismatch(f"found {len(blobs)} qualifying tags, need 4")
    blobs.sort(key=lambda b: (-b[0], -b[1], b[3], b[2]))
    chosen = [(cx, cy) for _, _, cx, cy in blobs[:4]]
    corners = order_corners_clockwise(chosen)
    quad = Quad(corners)  # raises DegenerateQuad on bad geometry
    return RoiCandidate(quad=quad, source=DetectorKind.LIGHTTAG, frame_seq=frame_seq)


def detect_stub_blob(gray: GrayFrame, frame_seq: int = 0) -> RoiCandidate:
    """Deterministic stand-in for a platform face detector: the axis-aligned
    bounding box of the largest bright blob, as a Quad. Downstream treats this
    source as crop-only (no warp)."""
    mask = gray.pixels >= STUB_BLOB_THRESHOLD
    if not mask.any():
        raise NoBlob(f"no pixel at or above {STUB_BLOB_THRESHOLD}")
    labels, count = _connected_components(mask)
    sizes = np.bincount(labels.ravel())[1:]
    largest = int(np.argmax(sizes)) + 1
    ys, xs = np.nonzero(labels == largest)
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    try:
        quad = Quad.from_rect(float(x0), float(y0), float(x1), float(y1))
    except DegenerateQuad as exc:
        raise NoBlob(f"largest blob bounding box too small: {exc}") from exc
    return RoiCandidate(quad=quad, source=DetectorKind.FACE, frame_seq=frame_seq)


def make_detector(
    kind: DetectorKind,
    edge_params: EdgeParams = EdgeParams(),
    hough_params: HoughParams = HoughParams(),
    tag_params: LightTagParams = LightTagParams(),
) -> Detector | None:
    """Detector for a mode; Manual has none."""
    if kind == DetectorKind.SCREEN:
        return lambda gray, seq=0: detect_screen(gray, edge_params, hough_params, frame_seq=seq)
    if kind == DetectorKind.LIGHTTAG:
        return lambda gray, seq=0: detect_light_tags(gray, tag_params, frame_seq=seq)
    if kind == DetectorKind.FACE:
        return lambda gray, seq=0: detect_stub_blob(gray, frame_seq=seq)
    return None
