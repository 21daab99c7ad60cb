"""Pairwise similarity and distance functions between boxes.

Scalar forms take :class:`~tinymatch.geometry.Box` pairs; :func:`pairwise`
computes the dense gt-by-anchor matrix through the kernel backend and is
bit-identical to the scalar calls.

Similarity kinds (IoU family, NWD) are "higher is better"; GWD is a raw
distance ("smaller is better"). :func:`ranking_scores` flips the sign of
distance kinds so the assigners can treat every metric as a score.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import scalars
from .errors import InvalidParameterError
from .geometry import Box, BoxSet, GaussianBox

__all__ = [
    "MetricKind",
    "MetricMatrix",
    "DEFAULT_C",
    "SIMPLE_C",
    "iou",
    "giou",
    "diou",
    "ciou",
    "wasserstein_sq",
    "gwd",
    "nwd",
    "pairwise",
    "ranking_scores",
]

#: Default NWD normalization constant, the mean absolute object size (in
#: pixels) of the aerial tiny-object corpus this toolkit targets. 12.0 is the
#: rounded-for-simplicity alternative preset.
DEFAULT_C = 12.7
SIMPLE_C = 12.0


class MetricKind(enum.Enum):
    """Box-pair metric selector."""

    IOU = "iou"
    GIOU = "giou"
    DIOU = "diou"
    CIOU = "ciou"
    GWD = "gwd"
    NWD = "nwd"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def is_distance(self) -> bool:
        """True for kinds where smaller values mean more similar boxes."""
        return self is MetricKind.GWD

    @property
    def identity_value(self) -> float:
        """Metric value of a box compared with itself."""
        return 0.0 if self.is_distance else 1.0


_CODES = {
    MetricKind.IOU: scalars.IOU,
    MetricKind.GIOU: scalars.GIOU,
    MetricKind.DIOU: scalars.DIOU,
    MetricKind.CIOU: scalars.CIOU,
    MetricKind.GWD: scalars.GWD,
    MetricKind.NWD: scalars.NWD,
}


@dataclass(frozen=True)
class MetricMatrix:
    """Dense gt-by-anchor metric values, row-major.

    ``values[i, j]`` is the metric of gt ``i`` against anchor ``j``.
    """

    kind: MetricKind
    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def flat(self) -> np.ndarray:
        """Row-major 1-D view of the values."""
        return self.values.reshape(-1)


def iou(a: Box, b: Box) -> float:
    """Intersection over union, in [0, 1]; 0 when disjoint, 1 iff identical."""
    return scalars.iou(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h)


def giou(a: Box, b: Box) -> float:
    """Generalized IoU: IoU minus the enclosing-box dead-area ratio, in (-1, 1]."""
    return scalars.giou(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h)


def diou(a: Box, b: Box) -> float:
    """Distance IoU: IoU minus squared center distance over enclosing diagonal."""
    return scalars.diou(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h)


def ciou(a: Box, b: Box) -> float:
    """Complete IoU: DIoU with an aspect-ratio consistency penalty."""
    return scalars.ciou(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h)


def wasserstein_sq(a: GaussianBox, b: GaussianBox) -> float:
    """Squared 2nd-order Wasserstein distance between two diagonal Gaussians.

    For Gaussians modeled from boxes this collapses to the squared Euclidean
    distance between the 4-vectors (cx, cy, w/2, h/2).
    """
    dx = a.mu[0] - b.mu[0]
    dy = a.mu[1] - b.mu[1]
    dw = a.sigma[0] - b.sigma[0]
    dh = a.sigma[1] - b.sigma[1]
    return dx * dx + dy * dy + dw * dw + dh * dh


def gwd(a: Box, b: Box) -> float:
    """Gaussian Wasserstein distance between the boxes' Gaussian models (>= 0)."""
    return scalars.gwd(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h)


def nwd(a: Box, b: Box, C: float = DEFAULT_C) -> float:
    """Normalized Wasserstein distance: exp(-gwd/C), in (0, 1]; 1 iff a == b.

    Strictly positive for any finite pair, up to floating-point underflow:
    boxes separated by more than ~745*C pixels exhaust the double exponent
    range and come out as exactly 0.

    Args:
        C: Normalization constant in pixels (> 0), typically the mean
            absolute object size of the dataset.
    """
    if not C > 0:
        raise InvalidParameterError(f"C must be positive, got {C}")
    return scalars.nwd(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h, C)


def pairwise(kind: MetricKind, gts: BoxSet, anchors: BoxSet, C: float = DEFAULT_C) -> MetricMatrix:
    """Dense metric matrix between a gt set (rows) and an anchor set (cols).

    Empty inputs yield an empty matrix (0 rows or 0 cols), not an error.
    Entry (i, j) is bit-identical to the corresponding scalar call.
    """
    if kind is MetricKind.NWD and not C > 0:
        raise InvalidParameterError(f"C must be positive, got {C}")
    values = _kernels.pairwise_matrix(kind.code, gts.boxes, anchors.boxes, C)
    return MetricMatrix(kind=kind, values=values)


def ranking_scores(matrix: MetricMatrix) -> np.ndarray:
    """Matrix values as a score where higher always means more similar.

    Similarity kinds pass through; distance kinds (GWD) are negated.
    """
    if matrix.kind.is_distance:
        return -matrix.values
    return matrix.values
