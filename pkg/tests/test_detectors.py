import numpy as np
import pytest

from roistream.detectors import (
    DetectorKind,
    LightTagParams,
    detect_light_tags,
    detect_screen,
    detect_stub_blob,
    make_detector,
)
from roistream.errors import (
    DegenerateQuad,
    NoBlob,
    NoEdges,
    TagCountMismatch,
)
from roistream.geometry import Quad
from roistream.imaging import Frame, GrayFrame, to_grayscale
from roistream.synth import SceneSpec, render_light_tag_scene, render_scene, random_convex_quad

from conftest import make_gray


def corner_rms(found: Quad, truth: Quad) -> float:
    d2 = [
        (fx - tx) ** 2 + (fy - ty) ** 2
        for (fx, fy), (tx, ty) in zip(found.corners, truth.corners)
    ]
    return float(np.sqrt(np.mean(d2)))


def gray_with_blobs(blobs, width=640, height=480, background=50):
    """blobs: list of (x, y, w, h, luma) rectangles."""
    px = np.full((height, width), background, dtype=np.uint8)
    for x, y, w, h, luma in blobs:
        px[y : y + h, x : x + w] = luma
    return GrayFrame(width, height, px)


class TestDetectScreen:
    def test_constant_image_no_edges(self):
        with pytest.raises(NoEdges):
            detect_screen(make_gray(64, 64, 128))

    def test_axis_rectangle_on_dark_textured_background(self):
        spec = SceneSpec(
            true_quad=Quad.from_rect(120, 90, 520, 390),
            interior="uniform",
            background="stripes",
            noise_sigma=2.0,
            seed=7,
        )
        (frame, truth), = render_scene(spec, 1)
        cand = detect_screen(to_grayscale(frame))
        assert cand.source == DetectorKind.SCREEN
        for (fx, fy), (tx, ty) in zip(cand.quad.corners, truth.corners):
            assert np.hypot(fx - tx, fy - ty) <= 3.0

    def test_perspective_with_noise(self):
        rng = np.random.default_rng(42)
        quad = random_convex_quad(rng)
        spec = SceneSpec(true_quad=quad, noise_sigma=2.0, seed=42)
        (frame, truth), = render_scene(spec, 1)
        cand = detect_screen(to_grayscale(frame))
        assert corner_rms(cand.quad, truth) <= 3.0

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        spec = SceneSpec(true_quad=random_convex_quad(rng), seed=3)
        (frame, _), = render_scene(spec, 1)
        gray = to_grayscale(frame)
        a = detect_screen(gray, frame_seq=5)
        b = detect_screen(gray, frame_seq=5)
        assert a == b
        assert a.frame_seq == 5


class TestDetectLightTags:
    TAGS = [(50, 50), (500, 60), (510, 400), (60, 390)]

    def test_four_blob_centroids_in_order(self):
        gray = gray_with_blobs([(x - 1, y - 1, 3, 3, 255) for x, y in self.TAGS])
        cand = detect_light_tags(gray)
        assert cand.source == DetectorKind.LIGHTTAG
        # centroid arithmetic oracle: mean of a 3x3 block at (x, y) is (x, y)
        assert cand.quad.corners == ((50, 50), (500, 60), (510, 400), (60, 390))

    def test_three_blobs_rejected(self):
        gray = gray_with_blobs([(x - 1, y - 1, 3, 3, 255) for x, y in self.TAGS[:3]])
        with pytest.raises(TagCountMismatch):
            detect_light_tags(gray)

    def test_five_blobs_brightest_four_chosen(self):
        blobs = [(x - 1, y - 1, 3, 3, 255) for x, y in self.TAGS]
        blobs.append((300, 220, 3, 3, 245))  # dimmer decoy in the middle
        cand = detect_light_tags(gray_with_blobs(blobs))
        assert (300.0, 221.0) not in cand.quad.corners
        assert cand.quad.corners == ((50, 50), (500, 60), (510, 400), (60, 390))

    def test_area_band_filters_blobs(self):
        blobs = [(x - 1, y - 1, 3, 3, 255) for x, y in self.TAGS[:3]]
        blobs.append((200, 200, 30, 30, 255))  # 900 px > max_blob_area
        with pytest.raises(TagCountMismatch):
            detect_light_tags(gray_with_blobs(blobs))

    def test_global_luma_offset_invariant(self):
        params = LightTagParams(brightness_threshold=240)
        base = gray_with_blobs(
            [(x - 1, y - 1, 3, 3, 250) for x, y in self.TAGS], background=40
        )
        shifted = GrayFrame(640, 480, np.clip(base.pixels.astype(int) + 5, 0, 255))
        a = detect_light_tags(base, params)
        b = detect_light_tags(shifted, params)
        assert a.quad == b.quad

    def test_collinear_centroids_degenerate(self):
        blobs = [(100, 100, 3, 3, 255), (200, 100, 3, 3, 255),
                 (300, 100, 3, 3, 255), (400, 100, 3, 3, 255)]
        with pytest.raises(DegenerateQuad):
            detect_light_tags(gray_with_blobs(blobs))

    def test_closed_loop_with_generator(self, rng):
        for trial in range(10):
            tags = [
                (int(rng.integers(30, 280)), int(rng.integers(30, 200))),
                (int(rng.integers(360, 610)), int(rng.integers(30, 200))),
                (int(rng.integers(360, 610)), int(rng.integers(280, 450))),
                (int(rng.integers(30, 280)), int(rng.integers(280, 450))),
            ]
            scene = render_light_tag_scene(
                SceneSpec(background="uniform", seed=trial), tags
            )
            assert scene.truth is not None
            cand = detect_light_tags(to_grayscale(scene.frame))
            for (fx, fy), (tx, ty) in zip(cand.quad.corners, scene.truth.corners):
                assert np.hypot(fx - tx, fy - ty) <= 1.0


class TestDetectStubBlob:
    def test_all_dark_rejected(self):
        with pytest.raises(NoBlob):
            detect_stub_blob(make_gray(64, 64, 50))

    def test_single_rectangle_exact_bbox(self):
        gray = gray_with_blobs([(200, 100, 20, 30, 230)])
        cand = detect_stub_blob(gray)
        assert cand.source == DetectorKind.FACE
        assert cand.quad.corners == ((200, 100), (220, 100), (220, 130), (200, 130))

    def test_largest_of_two_blobs_wins(self):
        # component-area oracle: 10x10=100 beats 10x5=50
        gray = gray_with_blobs([(50, 50, 10, 10, 230), (400, 300, 10, 5, 230)])
        cand = detect_stub_blob(gray)
        assert cand.quad.corners == ((50, 50), (60, 50), (60, 60), (50, 60))


class TestDetectorRegistry:
    def test_manual_has_no_detector(self):
        assert make_detector(DetectorKind.MANUAL) is None

    def test_detectors_return_valid_candidates(self):
        gray = gray_with_blobs([(200, 100, 20, 30, 230)])
        detector = make_detector(DetectorKind.FACE)
        cand = detector(gray, 3)
        assert cand.frame_seq == 3
        assert cand.quad.area() >= 64
