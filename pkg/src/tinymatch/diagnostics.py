"""Assignment diagnostics: metric-deviation curves and per-scale statistics.

The deviation curve places a square box at the origin and slides a second
square along the diagonal by whole pixels, recording the metric at each
offset. Comparing curves across box sizes exposes how sensitive a metric is
to location error at different object scales: IoU curves collapse faster the
smaller the box, NWD curves for equal-size pairs are independent of the box
size altogether.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

from .assignment import AssignmentResult
from .errors import InvalidInputError, InvalidParameterError
from .geometry import Box, BoxSet, box_absolute_size
from .metrics import DEFAULT_C, MetricKind
from ._kernels import scalars

__all__ = [
    "ScaleBucket",
    "DeviationCurve",
    "deviation_curve",
    "per_gt_positive_stats",
    "pos_neg_totals",
]


class ScaleBucket(enum.Enum):
    """Absolute-size strata for tiny-object analysis.

    Bucket of a box is determined by its absolute size sqrt(w*h). Sizes
    below the nominal very-tiny floor of 2 px are folded into ``VERY_TINY``
    so every box is bucketed.
    """

    VERY_TINY = "very_tiny"
    TINY = "tiny"
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"

    @property
    def bounds(self) -> tuple[float, float]:
        """Half-open size range [lo, hi) in pixels."""
        return _BOUNDS[self]

    @classmethod
    def of_size(cls, size: float) -> "ScaleBucket":
        if size < 8.0:
            return cls.VERY_TINY
        if size < 16.0:
            return cls.TINY
        if size < 32.0:
            return cls.SMALL
        if size < 64.0:
            return cls.MEDIUM
        return cls.LARGE

    @classmethod
    def of_box(cls, box: Box) -> "ScaleBucket":
        return cls.of_size(box_absolute_size(box))


_BOUNDS = {
    ScaleBucket.VERY_TINY: (2.0, 8.0),
    ScaleBucket.TINY: (8.0, 16.0),
    ScaleBucket.SMALL: (16.0, 32.0),
    ScaleBucket.MEDIUM: (32.0, 64.0),
    ScaleBucket.LARGE: (64.0, float("inf")),
}


@dataclass(frozen=True)
class DeviationCurve:
    """Metric value versus integer center deviation along the diagonal."""

    metric: MetricKind
    box_scale: float
    size_ratio: float
    points: tuple[tuple[int, float], ...]

    def rows(self) -> Iterator[tuple[int, float]]:
        """(deviation, value) rows in ascending deviation order, CSV-ready."""
        return iter(self.points)


def deviation_curve(
    metric: MetricKind,
    scale: float,
    size_ratio: float = 1.0,
    max_dev: int = 30,
    C: float = DEFAULT_C,
) -> DeviationCurve:
    """Metric between a square of side ``scale`` at the origin and a square
    of side ``scale * size_ratio`` whose center sits at (d, d) for
    d = 0..max_dev.

    Deviations are sampled at whole pixels only: box locations on an image
    grid can only move discretely, which is exactly the regime where the
    per-step metric change matters.
    """
    if scale <= 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    if size_ratio <= 0:
        raise InvalidParameterError(f"size_ratio must be positive, got {size_ratio}")
    if max_dev < 0:
        raise InvalidParameterError(f"max_dev must be >= 0, got {max_dev}")
    side_b = scale * size_ratio
    points = []
    for d in range(max_dev + 1):
        value = scalars.metric_value(
            metric.code, 0.0, 0.0, scale, scale, float(d), float(d), side_b, side_b, C
        )
        points.append((d, value))
    return DeviationCurve(
        metric=metric,
        box_scale=scale,
        size_ratio=size_ratio,
        points=tuple(points),
    )


def per_gt_positive_stats(
    result: AssignmentResult, gts: BoxSet
) -> dict[ScaleBucket, float]:
    """Mean positive-anchor count per gt, grouped by the gt's scale bucket.

    Buckets with no gts are absent from the result, not reported as zero.
    """
    if result.num_gts != len(gts):
        raise InvalidInputError(
            f"result has {result.num_gts} gts but box set has {len(gts)}"
        )
    sums: dict[ScaleBucket, int] = {}
    counts: dict[ScaleBucket, int] = {}
    sizes = gts.absolute_sizes()
    for i in range(len(gts)):
        bucket = ScaleBucket.of_size(float(sizes[i]))
        sums[bucket] = sums.get(bucket, 0) + int(result.pos_count_per_gt[i])
        counts[bucket] = counts.get(bucket, 0) + 1
    return {b: sums[b] / counts[b] for b in sums}


def pos_neg_totals(results: Iterable[AssignmentResult]) -> tuple[int, int]:
    """Exact total positive and negative anchor counts over a dataset pass."""
    total_pos = 0
    total_neg = 0
    for result in results:
        total_pos += result.num_pos
        total_neg += result.num_neg
    return total_pos, total_neg
