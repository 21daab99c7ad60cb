"""Detection post-processing and scale-stratified AP/AR evaluation.

The evaluator follows the COCO protocol: greedy score-ordered matching at
IoU thresholds 0.50:0.05:0.95, 101-point interpolated average precision,
per-category averaging, and the area-range ignore rules for the scale
strata (out-of-stratum gts absorb matches without credit; unmatched
detections outside the stratum are not counted as false positives). Strata
are keyed on absolute size sqrt(w*h) rather than raw area.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import Annotation, AnnotationSet
from .diagnostics import ScaleBucket
from .errors import AnnotationError, InvalidParameterError
from .geometry import Box, box_absolute_size
from .metrics import iou as box_iou

__all__ = [
    "Detection",
    "EvalReport",
    "IOU_THRESHOLDS",
    "nms",
    "score_filter",
    "match",
    "average_precision",
    "evaluate",
    "load_detections",
]

logger = logging.getLogger(__name__)

#: The ten matching thresholds 0.50, 0.55, ..., 0.95.
IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
_RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class Detection:
    """One scored detection box on one image."""

    image_id: int
    category_id: int
    box: Box
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise InvalidParameterError(f"detection score not finite: {self.score}")


@dataclass(frozen=True)
class EvalReport:
    """COCO-style scores; ``None`` marks a stratum with no ground truth."""

    ap: float | None
    ap50: float | None
    ap75: float | None
    ap_vt: float | None
    ap_t: float | None
    ap_s: float | None
    ap_m: float | None
    ar: float | None
    max_det: int
    per_category: dict[str, float | None]

    def to_json_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap_vt": self.ap_vt,
            "ap_t": self.ap_t,
            "ap_s": self.ap_s,
            "ap_m": self.ap_m,
            f"ar_{self.max_det}": self.ar,
            "per_category": self.per_category,
        }

    def table(self) -> str:
        """Aligned one-row table in the conventional column order."""
        headers = ["AP", "AP50", "AP75", "AP_vt", "AP_t", "AP_s", "AP_m",
                   f"AR^{self.max_det}"]
        values = [self.ap, self.ap50, self.ap75, self.ap_vt, self.ap_t,
                  self.ap_s, self.ap_m, self.ar]
        cells = ["  -  " if v is None else f"{v:.3f}" for v in values]
        widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        row = "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return head + "\n" + row


def nms(
    dets: Sequence[Detection],
    iou_thresh: float = 0.5,
    per_category: bool = True,
) -> list[Detection]:
    """Greedy non-maximum suppression in descending score order.

    A detection is suppressed when its IoU with an already-kept detection of
    the same image (and same category, when ``per_category`` is set) exceeds
    ``iou_thresh``. Ties are broken by (score desc, input index asc); the
    result is returned in that order.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[int] = []
    for i in order:
        candidate = dets[i]
        suppressed = False
        for j in kept:
            other = dets[j]
            if other.image_id != candidate.image_id:
                continue
            if per_category and other.category_id != candidate.category_id:
                continue
            if box_iou(candidate.box, other.box) > iou_thresh:
                suppressed = True
                break
        if not suppressed:
            kept.append(i)
    return [dets[i] for i in kept]


def score_filter(
    dets: Sequence[Detection],
    min_score: float = 0.05,
    max_per_image: int = 3000,
) -> list[Detection]:
    """Drop detections below ``min_score``; cap each image at the
    ``max_per_image`` highest-scoring survivors. Input order is preserved."""
    surviving = [i for i, d in enumerate(dets) if d.score >= min_score]
    by_image: dict[int, list[int]] = {}
    for i in surviving:
        by_image.setdefault(dets[i].image_id, []).append(i)
    keep: set[int] = set()
    for indices in by_image.values():
        ranked = sorted(indices, key=lambda i: (-dets[i].score, i))
        keep.update(ranked[:max_per_image])
    return [dets[i] for i in sorted(keep)]


def match(
    dets: Sequence[Detection],
    gts: Sequence[Annotation],
    iou_thresh: float,
) -> np.ndarray:
    """Greedy one-to-one TP/FP flags for score-sorted detections.

    Each detection matches the unmatched ground truth of the same image and
    category with the highest IoU >= ``iou_thresh`` (ties to the earlier gt
    in list order); every gt is matched at most once.
    """
    matched = [False] * len(gts)
    flags = np.zeros(len(dets), dtype=bool)
    for d_idx, det in enumerate(dets):
        best = -1
        best_iou = iou_thresh
        for g_idx, gt in enumerate(gts):
            if matched[g_idx]:
                continue
            if gt.image_id != det.image_id or gt.category_id != det.category_id:
                continue
            value = box_iou(det.box, gt.box)
            if value > best_iou or (best < 0 and value >= iou_thresh):
                best = g_idx
                best_iou = value
        if best >= 0:
            matched[best] = True
            flags[d_idx] = True
    return flags


def average_precision(tp: Sequence[bool] | np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from score-ordered TP flags.

    Returns NaN when ``n_gt`` is zero (no PR curve exists).
    """
    if n_gt == 0:
        return float("nan")
    tp_arr = np.asarray(tp, dtype=np.float64)
    if tp_arr.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp_arr)
    fp_cum = np.cumsum(1.0 - tp_arr)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    # interpolate: precision at recall r is the max precision at recall >= r
    for i in range(precision.size - 1, 0, -1):
        if precision[i - 1] < precision[i]:
            precision[i - 1] = precision[i]
    indices = np.searchsorted(recall, _RECALL_POINTS, side="left")
    sampled = np.where(
        indices < precision.size,
        precision[np.minimum(indices, precision.size - 1)],
        0.0,
    )
    return float(sampled.mean())


# ---------------------------------------------------------------------------
# full evaluator


def _stratum_ranges() -> dict[str, tuple[float, float]]:
    ranges = {"all": (0.0, float("inf"))}
    for bucket in (ScaleBucket.VERY_TINY, ScaleBucket.TINY, ScaleBucket.SMALL,
                   ScaleBucket.MEDIUM):
        ranges[bucket.value] = bucket.bounds
    return ranges


class _CatImageCell:
    """Per (category, image) matching inputs with precomputed IoUs."""

    __slots__ = ("image_id", "dets", "gts", "gt_sizes", "det_sizes",
                 "gt_crowd", "ious")

    def __init__(self, image_id: int, dets: list[Detection], gts: list[Annotation]):
        self.image_id = image_id
        self.dets = dets
        self.gts = gts
        self.gt_sizes = [box_absolute_size(g.box) for g in gts]
        self.det_sizes = [box_absolute_size(d.box) for d in dets]
        self.gt_crowd = [g.iscrowd for g in gts]
        self.ious = [
            [box_iou(d.box, g.box) for g in gts] for d in dets
        ]

    def match(self, thresh: float, gt_ignore: list[bool]) -> tuple[list[int], list[bool]]:
        """COCO-style greedy matching; detections are already score-sorted.

        Non-ignored gts are preferred; an ignored gt can still absorb an
        otherwise unmatched detection, and crowd gts may absorb several.
        Returns (matched gt index or -1 per det, det-ignored flags).
        """
        order = sorted(range(len(self.gts)), key=lambda g: gt_ignore[g])
        gt_matched = [False] * len(self.gts)
        det_match = [-1] * len(self.dets)
        det_ignored = [False] * len(self.dets)
        for d in range(len(self.dets)):
            best = -1
            best_iou = thresh
            for g in order:
                if gt_matched[g] and not self.gt_crowd[g]:
                    continue
                if best >= 0 and not gt_ignore[best] and gt_ignore[g]:
                    break  # a real match exists; don't trade it for an ignored gt
                value = self.ious[d][g]
                if value > best_iou or (best < 0 and value >= thresh):
                    best = g
                    best_iou = value
            if best >= 0:
                det_match[d] = best
                det_ignored[d] = gt_ignore[best]
                if not self.gt_crowd[best]:
                    gt_matched[best] = True
        return det_match, det_ignored


def _ap_for_stratum(
    cells: list[_CatImageCell],
    thresh: float,
    lo: float,
    hi: float,
    by_size: bool,
) -> tuple[float, float] | None:
    """(AP, recall) for one category at one threshold and stratum, or None
    when the stratum holds no countable ground truth for this category."""
    records: list[tuple[float, int, int, bool]] = []
    n_gt = 0
    n_matched = 0
    for cell in cells:
        if by_size:
            gt_ignore = [
                crowd or not (lo <= size < hi)
                for crowd, size in zip(cell.gt_crowd, cell.gt_sizes)
            ]
        else:
            gt_ignore = list(cell.gt_crowd)
        n_gt += sum(1 for ig in gt_ignore if not ig)
        det_match, det_ignored = cell.match(thresh, gt_ignore)
        for d_idx, det in enumerate(cell.dets):
            if det_match[d_idx] >= 0:
                if det_ignored[d_idx]:
                    continue  # matched an out-of-stratum or crowd gt
                records.append((det.score, cell.image_id, d_idx, True))
                n_matched += 1
            else:
                if by_size and not (lo <= cell.det_sizes[d_idx] < hi):
                    continue  # unmatched and out of stratum: not a counted FP
                records.append((det.score, cell.image_id, d_idx, False))
    if n_gt == 0:
        return None
    records.sort(key=lambda r: (-r[0], r[1], r[2]))
    tp_flags = np.array([r[3] for r in records], dtype=bool)
    return average_precision(tp_flags, n_gt), n_matched / n_gt


def evaluate(
    dets: Sequence[Detection],
    ann: AnnotationSet,
    max_det: int = 1500,
    iou_thresholds: Sequence[float] = IOU_THRESHOLDS,
) -> EvalReport:
    """Full scale-stratified evaluation of detections against annotations.

    AP values are means over categories that have ground truth in the
    stratum; a stratum with no ground truth anywhere reports ``None``. AR is
    the mean recall over categories and thresholds with at most ``max_det``
    detections per image and category.
    """
    known_cats = {c.id for c in ann.categories}
    cat_names = {c.id: c.name for c in ann.categories}
    for det in dets:
        if det.category_id not in known_cats:
            logger.warning(
                "detection on image %s has unknown category_id %s; it can "
                "never match and counts as a false positive",
                det.image_id, det.category_id,
            )

    dets_by_cat_img: dict[int, dict[int, list[Detection]]] = {}
    for idx in sorted(range(len(dets)), key=lambda i: (-dets[i].score, i)):
        det = dets[idx]
        if det.category_id not in known_cats:
            continue
        dets_by_cat_img.setdefault(det.category_id, {}).setdefault(
            det.image_id, []
        ).append(det)
    for per_img in dets_by_cat_img.values():
        for lst in per_img.values():
            del lst[max_det:]

    gts_by_cat_img: dict[int, dict[int, list[Annotation]]] = {}
    for a in ann.annotations:
        gts_by_cat_img.setdefault(a.category_id, {}).setdefault(
            a.image_id, []
        ).append(a)

    cells_by_cat: dict[int, list[_CatImageCell]] = {}
    for cat in sorted(known_cats):
        cat_gts = gts_by_cat_img.get(cat, {})
        cat_dets = dets_by_cat_img.get(cat, {})
        cells_by_cat[cat] = [
            _CatImageCell(
                image_id, cat_dets.get(image_id, []), cat_gts.get(image_id, [])
            )
            for image_id in sorted(set(cat_gts) | set(cat_dets))
        ]

    strata = _stratum_ranges()
    thresholds = list(iou_thresholds)
    ap_values: dict[str, list[list[float]]] = {
        s: [[] for _ in thresholds] for s in strata
    }
    recall_values: list[float] = []
    per_category: dict[str, float | None] = {}

    for cat in sorted(known_cats):
        cells = cells_by_cat[cat]
        cat_aps = []
        for t_idx, thresh in enumerate(thresholds):
            for stratum, (lo, hi) in strata.items():
                outcome = _ap_for_stratum(
                    cells, thresh, lo, hi, by_size=stratum != "all"
                )
                if outcome is None:
                    continue
                ap, recall = outcome
                ap_values[stratum][t_idx].append(ap)
                if stratum == "all":
                    cat_aps.append(ap)
                    recall_values.append(recall)
        per_category[cat_names[cat]] = (
            float(np.mean(cat_aps)) if cat_aps else None
        )

    def _mean_over(stratum: str, t_indices: Sequence[int]) -> float | None:
        values = [v for t in t_indices for v in ap_values[stratum][t]]
        if not values:
            return None
        return float(np.mean(values))

    all_t = list(range(len(thresholds)))
    t50 = thresholds.index(0.5) if 0.5 in thresholds else None
    t75 = thresholds.index(0.75) if 0.75 in thresholds else None
    return EvalReport(
        ap=_mean_over("all", all_t),
        ap50=_mean_over("all", [t50]) if t50 is not None else None,
        ap75=_mean_over("all", [t75]) if t75 is not None else None,
        ap_vt=_mean_over(ScaleBucket.VERY_TINY.value, all_t),
        ap_t=_mean_over(ScaleBucket.TINY.value, all_t),
        ap_s=_mean_over(ScaleBucket.SMALL.value, all_t),
        ap_m=_mean_over(ScaleBucket.MEDIUM.value, all_t),
        ar=float(np.mean(recall_values)) if recall_values else None,
        max_det=max_det,
        per_category=per_category,
    )


def load_detections(path: str | os.PathLike) -> list[Detection]:
    """Parse a COCO-format detection results file (a JSON array)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise AnnotationError(
            f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc
    if not isinstance(data, list):
        raise AnnotationError(f"{path}: detection results must be a JSON array")
    dets = []
    for i, entry in enumerate(data):
        try:
            x, y, w, h = (float(v) for v in entry["bbox"])
            dets.append(
                Detection(
                    image_id=int(entry["image_id"]),
                    category_id=int(entry["category_id"]),
                    box=Box(cx=x + w * 0.5, cy=y + h * 0.5, w=w, h=h),
                    score=float(entry["score"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"{path}: bad detection entry {i}: {exc}") from exc
    return dets
