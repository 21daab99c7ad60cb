import numpy as np
import pytest

from tinymatch.geometry import Box, BoxSet


def random_box_array(rng: np.random.Generator, n: int,
                     pos_range: float = 200.0,
                     size_lo: float = 1.0, size_hi: float = 64.0) -> np.ndarray:
    """(n, 4) center-form boxes with positive extents."""
    arr = np.empty((n, 4))
    arr[:, 0] = rng.uniform(0.0, pos_range, n)
    arr[:, 1] = rng.uniform(0.0, pos_range, n)
    arr[:, 2] = rng.uniform(size_lo, size_hi, n)
    arr[:, 3] = rng.uniform(size_lo, size_hi, n)
    return arr


def random_boxes(rng: np.random.Generator, n: int, **kwargs) -> list[Box]:
    return [Box(*row) for row in random_box_array(rng, n, **kwargs)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture
def small_sets(rng) -> tuple[BoxSet, BoxSet]:
    gts = BoxSet(random_box_array(rng, 6))
    anchors = BoxSet(random_box_array(rng, 11))
    return gts, anchors
