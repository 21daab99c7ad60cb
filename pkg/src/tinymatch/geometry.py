"""Box representations, coordinate conversions and box-to-Gaussian modeling.

Boxes live in center form ``(cx, cy, w, h)`` with strictly positive extents.
A box is mapped to a 2-D Gaussian whose mean is the box center and whose
diagonal covariance has square roots ``(w/2, h/2)`` (the inscribed ellipse's
semi-axes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidBoxError

__all__ = [
    "Box",
    "GaussianBox",
    "BoxSet",
    "box_to_gaussian",
    "corners_to_center",
    "center_to_corners",
    "box_absolute_size",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in center form.

    Attributes:
        cx: Center x coordinate, in pixels.
        cy: Center y coordinate, in pixels.
        w: Width, in pixels (> 0).
        h: Height, in pixels (> 0).
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidBoxError(f"box field {name!r} is not finite: {value!r}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(
                f"box extents must be positive, got w={self.w}, h={self.h}"
            )

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class GaussianBox:
    """2-D Gaussian modeled from a box: mean vector and diagonal covariance.

    ``sigma`` holds the square roots of the covariance diagonal; the
    covariance matrix is ``diag(sigma[0]**2, sigma[1]**2)`` with zero
    off-diagonals.
    """

    mu: tuple[float, float]
    sigma: tuple[float, float]

    def __post_init__(self) -> None:
        if self.sigma[0] <= 0 or self.sigma[1] <= 0:
            raise InvalidBoxError(f"sigma components must be positive: {self.sigma}")

    def covariance(self) -> np.ndarray:
        """Full 2x2 covariance matrix (diagonal by construction)."""
        sx, sy = self.sigma
        return np.array([[sx * sx, 0.0], [0.0, sy * sy]])


def box_to_gaussian(box: Box) -> GaussianBox:
    """Model a box as a 2-D Gaussian: mean at the center, sigma = half extents."""
    return GaussianBox(mu=(box.cx, box.cy), sigma=(box.w * 0.5, box.h * 0.5))


def corners_to_center(x1: float, y1: float, x2: float, y2: float) -> Box:
    """Convert a corner-form rectangle ``(x1, y1, x2, y2)`` to a Box.

    Raises:
        InvalidBoxError: if the rectangle is degenerate (``x2 <= x1`` or
            ``y2 <= y1``).
    """
    if x2 <= x1 or y2 <= y1:
        raise InvalidBoxError(
            f"degenerate corner rectangle: ({x1}, {y1}, {x2}, {y2})"
        )
    return Box(cx=(x1 + x2) * 0.5, cy=(y1 + y2) * 0.5, w=x2 - x1, h=y2 - y1)


def center_to_corners(box: Box) -> tuple[float, float, float, float]:
    """Inverse of :func:`corners_to_center`."""
    hw = box.w * 0.5
    hh = box.h * 0.5
    return (box.cx - hw, box.cy - hh, box.cx + hw, box.cy + hh)


def box_absolute_size(box: Box) -> float:
    """Absolute object size: the geometric mean of the side lengths."""
    return math.sqrt(box.w * box.h)


class BoxSet:
    """Flat, immutable collection of boxes with optional category labels.

    Serves both as an anchor set (no categories) and a ground-truth set
    (categories attached). Boxes are stored as a C-contiguous ``(n, 4)``
    float64 array in center form, the layout the pairwise kernels consume.
    """

    __slots__ = ("_boxes", "_categories")

    def __init__(
        self,
        boxes: np.ndarray,
        categories: np.ndarray | Sequence[int] | None = None,
    ) -> None:
        arr = np.ascontiguousarray(boxes, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise InvalidBoxError(f"expected an (n, 4) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidBoxError("box array contains non-finite values")
        if arr.shape[0] and (np.any(arr[:, 2] <= 0) or np.any(arr[:, 3] <= 0)):
            bad = int(np.argmax((arr[:, 2] <= 0) | (arr[:, 3] <= 0)))
            raise InvalidBoxError(f"box {bad} has non-positive extent")
        arr.setflags(write=False)
        self._boxes = arr
        if categories is None:
            self._categories = None
        else:
            cats = np.ascontiguousarray(categories, dtype=np.int64)
            if cats.shape != (arr.shape[0],):
                raise InvalidBoxError(
                    f"categories shape {cats.shape} does not match {arr.shape[0]} boxes"
                )
            cats.setflags(write=False)
            self._categories = cats

    @classmethod
    def from_boxes(
        cls, boxes: Iterable[Box], categories: Sequence[int] | None = None
    ) -> "BoxSet":
        arr = np.array([(b.cx, b.cy, b.w, b.h) for b in boxes], dtype=np.float64)
        arr = arr.reshape(-1, 4)
        return cls(arr, categories)

    @classmethod
    def empty(cls, with_categories: bool = False) -> "BoxSet":
        cats = np.zeros(0, dtype=np.int64) if with_categories else None
        return cls(np.zeros((0, 4)), cats)

    @property
    def boxes(self) -> np.ndarray:
        """(n, 4) read-only array of (cx, cy, w, h) rows."""
        return self._boxes

    @property
    def categories(self) -> np.ndarray | None:
        return self._categories

    def absolute_sizes(self) -> np.ndarray:
        """Per-box absolute size sqrt(w * h)."""
        return np.sqrt(self._boxes[:, 2] * self._boxes[:, 3])

    def __len__(self) -> int:
        return self._boxes.shape[0]

    def __getitem__(self, index: int) -> Box:
        cx, cy, w, h = self._boxes[index]
        return Box(cx, cy, w, h)

    def __repr__(self) -> str:
        return f"BoxSet(n={len(self)}, categories={self._categories is not None})"
