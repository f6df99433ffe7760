import numpy as np
import pytest

from roistream.imaging import Frame, GrayFrame


def make_frame(width=64, height=48, value=(128, 128, 128), seq=1, timestamp_ms=0):
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[:, :] = value
    return Frame(width, height, px, timestamp_ms=timestamp_ms, seq=seq)


def make_gray(width=64, height=48, value=128):
    px = np.full((height, width), value, dtype=np.uint8)
    return GrayFrame(width, height, px)


def random_frame(rng, width=64, height=48, seq=1, timestamp_ms=0):
    px = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return Frame(width, height, px, timestamp_ms=timestamp_ms, seq=seq)


def random_gray(rng, width=64, height=48):
    px = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
    return GrayFrame(width, height, px)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
