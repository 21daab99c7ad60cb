"""Flat-array surface over the tinymatch core.

Detector training loops hold boxes as contiguous float buffers; this
package accepts exactly that — a flat row-major array of ``n x 4`` values
in center form ``(cx, cy, w, h)`` — and returns flat arrays back, so no
per-box objects or file round-trips sit on the hot path.

Every function is a thin shim over the core library: inputs are copied (not
aliased) at the boundary, results are bit-identical to the corresponding
core calls, no state is kept between calls, and core exceptions propagate
with their message unchanged.
"""

from __future__ import annotations

import numpy as np

from tinymatch.assignment import AssignerConfig, Strategy, assign_rka
from tinymatch.dataio import load_annotations
from tinymatch.errors import InvalidBoxError, InvalidParameterError
from tinymatch.evaluation import evaluate, load_detections
from tinymatch.geometry import BoxSet
from tinymatch.metrics import DEFAULT_C, MetricKind, pairwise

__version__ = "0.1.0"

__all__ = ["pairwise_flat", "assign_rka_flat", "evaluate_flat"]


def _boxset_from_flat(values, name: str) -> BoxSet:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if arr.size % 4 != 0:
        raise InvalidBoxError(
            f"{name}: flat length {arr.size} is not divisible by 4"
        )
    boxes = arr.reshape(-1, 4)
    bad_w = np.flatnonzero(boxes[:, 2] <= 0)
    bad_h = np.flatnonzero(boxes[:, 3] <= 0)
    if bad_w.size or bad_h.size:
        index = int(min(
            bad_w[0] if bad_w.size else boxes.shape[0],
            bad_h[0] if bad_h.size else boxes.shape[0],
        ))
        raise InvalidBoxError(
            f"{name}: box {index} has non-positive extent "
            f"(w={boxes[index, 2]}, h={boxes[index, 3]})"
        )
    if not np.all(np.isfinite(boxes)):
        index = int(np.flatnonzero(~np.isfinite(boxes).all(axis=1))[0])
        raise InvalidBoxError(f"{name}: box {index} has non-finite values")
    return BoxSet(boxes)


def _metric_kind(kind) -> MetricKind:
    if isinstance(kind, MetricKind):
        return kind
    try:
        return MetricKind(str(kind).lower())
    except ValueError:
        raise InvalidParameterError(
            f"unknown metric kind {kind!r}; expected one of "
            f"{[m.value for m in MetricKind]}"
        ) from None


def pairwise_flat(kind, gts, anchors, C: float = DEFAULT_C) -> np.ndarray:
    """Row-major flat ``n_gt * n_anchor`` metric matrix.

    Args:
        kind: Metric name ("iou", "giou", "diou", "ciou", "gwd", "nwd").
        gts: Flat float array of gt boxes, length divisible by 4.
        anchors: Flat float array of anchor boxes.
        C: NWD normalization constant in pixels.

    Returns:
        1-D float64 array; entry ``i * n_anchor + j`` is the metric of gt
        ``i`` against anchor ``j``, bit-identical to the core matrix op.
    """
    gt_set = _boxset_from_flat(gts, "gts")
    anchor_set = _boxset_from_flat(anchors, "anchors")
    matrix = pairwise(_metric_kind(kind), gt_set, anchor_set, C)
    return matrix.values.reshape(-1).copy()


def assign_rka_flat(gts, anchors, k: int = 2, C: float = DEFAULT_C) -> np.ndarray:
    """Ranking-based assignment labels over flat box arrays.

    Returns:
        int64 array with one entry per anchor: the positive gt index, or -1
        for negative anchors. Identical to the core ranking assigner.
    """
    gt_set = _boxset_from_flat(gts, "gts")
    anchor_set = _boxset_from_flat(anchors, "anchors")
    cfg = AssignerConfig(strategy=Strategy.RKA, metric=MetricKind.NWD, k=k, C=C)
    result = assign_rka(cfg, gt_set, anchor_set)
    return result.labels.copy()


def evaluate_flat(ann_path, det_path, max_det: int = 1500) -> dict:
    """Scale-stratified AP/AR report for COCO-format files on disk.

    Returns the same mapping the command-line ``evaluate`` subcommand writes
    as JSON. File problems surface as the core's typed exceptions.
    """
    ann = load_annotations(ann_path)
    dets = load_detections(det_path)
    return evaluate(dets, ann, max_det=max_det).to_json_dict()
