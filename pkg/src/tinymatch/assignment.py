"""Anchor generation and positive/negative label assignment.

Two assigners are provided:

* :func:`assign_threshold` — the classic two-threshold rule: anchors whose
  best score clears ``theta_p`` become positive for their best gt, anchors
  below ``theta_n`` become negative, the band in between is ignored, and
  each gt's single best anchor is forced positive (sample compensation).
* :func:`assign_rka` — ranking-based assignment: each gt's top-k anchors by
  score become positive, everything else is negative. There is no ignore
  band, and every gt claims candidates by rank rather than by threshold, so
  gts that overlap no anchor at all still receive training samples when the
  metric (NWD) keeps discriminating at zero overlap.

Both assigners are pure functions of (config, gts, anchors) and resolve
multi-gt conflicts deterministically: an anchor wanted by several gts goes
to the gt with the highest score for it, ties to the lower gt index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidConfigError, InvalidParameterError
from .geometry import BoxSet
from .metrics import DEFAULT_C, MetricKind, MetricMatrix, pairwise, ranking_scores

__all__ = [
    "NEGATIVE",
    "IGNORE",
    "Strategy",
    "AnchorConfig",
    "AssignerConfig",
    "AssignmentResult",
    "generate_anchors",
    "assign",
    "assign_threshold",
    "assign_rka",
    "sample",
]

#: Label value for anchors assigned to no gt.
NEGATIVE = -1
#: Label value for anchors excluded from training (threshold assigner only).
IGNORE = -2


class Strategy(enum.Enum):
    """Label assignment strategy selector."""

    THRESHOLD = "threshold"
    RKA = "rka"


@dataclass(frozen=True)
class AnchorConfig:
    """Anchor grid over a feature pyramid.

    One anchor per (level, cell, ratio): centered on the cell, with area
    ``(anchor_scale * stride)**2`` and aspect ratio ``r`` realized
    area-preservingly as ``w = s*sqrt(r), h = s/sqrt(r)``.
    """

    strides: tuple[int, ...] = (4, 8, 16, 32, 64)
    anchor_scale: float = 8.0
    ratios: tuple[float, ...] = (0.5, 1.0, 2.0)
    clip_border: bool = False

    def __post_init__(self) -> None:
        if len(self.strides) == 0:
            raise InvalidConfigError("strides must be non-empty")
        if any(s <= 0 for s in self.strides):
            raise InvalidConfigError(f"strides must be positive: {self.strides}")
        if any(b <= a for a, b in zip(self.strides, self.strides[1:])):
            raise InvalidConfigError(
                f"strides must be strictly increasing: {self.strides}"
            )
        if not self.anchor_scale > 0:
            raise InvalidConfigError(f"anchor_scale must be > 0: {self.anchor_scale}")
        if len(self.ratios) == 0 or any(r <= 0 for r in self.ratios):
            raise InvalidConfigError(f"ratios must be positive: {self.ratios}")

    def feature_sizes(self, image_w: float, image_h: float) -> list[tuple[int, int]]:
        """Per-level (rows, cols) grid dimensions covering the image."""
        return [
            (int(math.ceil(image_h / s)), int(math.ceil(image_w / s)))
            for s in self.strides
        ]


@dataclass(frozen=True)
class AssignerConfig:
    """Parameters of both assignment strategies.

    ``theta_p``/``theta_n`` apply to the threshold strategy, ``k`` to the
    ranking strategy, ``C`` to the NWD metric.
    """

    strategy: Strategy = Strategy.RKA
    metric: MetricKind = MetricKind.NWD
    theta_p: float = 0.7
    theta_n: float = 0.3
    k: int = 2
    C: float = DEFAULT_C

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta_n <= self.theta_p <= 1.0):
            raise InvalidConfigError(
                f"need 0 <= theta_n <= theta_p <= 1, got "
                f"theta_n={self.theta_n}, theta_p={self.theta_p}"
            )
        if self.k < 1:
            raise InvalidConfigError(f"k must be >= 1, got {self.k}")
        if not self.C > 0:
            raise InvalidConfigError(f"C must be positive, got {self.C}")


@dataclass(frozen=True)
class AssignmentResult:
    """Per-anchor labels plus per-gt positive statistics.

    ``labels[j] >= 0`` means anchor ``j`` is positive for that gt index;
    ``NEGATIVE`` (-1) and ``IGNORE`` (-2) mark the other two states.
    ``max_metric_per_gt`` holds each gt's most favorable raw metric value
    over all anchors (NaN when there are no anchors).
    """

    labels: np.ndarray
    pos_count_per_gt: np.ndarray
    max_metric_per_gt: np.ndarray

    @property
    def num_anchors(self) -> int:
        return self.labels.shape[0]

    @property
    def num_gts(self) -> int:
        return self.pos_count_per_gt.shape[0]

    @property
    def num_pos(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))

    @property
    def num_neg(self) -> int:
        return int(np.count_nonzero(self.labels == NEGATIVE))

    @property
    def num_ignore(self) -> int:
        return int(np.count_nonzero(self.labels == IGNORE))


def generate_anchors(config: AnchorConfig, image_w: float, image_h: float) -> BoxSet:
    """Dense anchor set over the pyramid grid of an image.

    Ordering is deterministic: level-major, then row-major over cells, with
    the ratios innermost.
    """
    if image_w <= 0 or image_h <= 0:
        raise InvalidParameterError(
            f"image dims must be positive, got {image_w}x{image_h}"
        )
    ratios = np.asarray(config.ratios, dtype=np.float64)
    level_arrays = []
    for stride, (rows, cols) in zip(
        config.strides, config.feature_sizes(image_w, image_h)
    ):
        side = config.anchor_scale * stride
        ws = side * np.sqrt(ratios)
        hs = side / np.sqrt(ratios)
        cxs = (np.arange(cols, dtype=np.float64) + 0.5) * stride
        cys = (np.arange(rows, dtype=np.float64) + 0.5) * stride
        # (rows*cols, 2) centers in row-major order
        centers = np.stack(
            [np.tile(cxs, rows), np.repeat(cys, cols)], axis=1
        )
        n_cells = centers.shape[0]
        n_ratios = ratios.shape[0]
        level = np.empty((n_cells * n_ratios, 4), dtype=np.float64)
        level[:, :2] = np.repeat(centers, n_ratios, axis=0)
        level[:, 2] = np.tile(ws, n_cells)
        level[:, 3] = np.tile(hs, n_cells)
        level_arrays.append(level)
    anchors = np.concatenate(level_arrays, axis=0)
    if config.clip_border:
        # an anchor fully outside the image would clip to zero extent; keep
        # an epsilon sliver at the border so the set stays valid
        eps = 1e-6
        x1 = np.clip(anchors[:, 0] - anchors[:, 2] * 0.5, 0.0, image_w - eps)
        y1 = np.clip(anchors[:, 1] - anchors[:, 3] * 0.5, 0.0, image_h - eps)
        x2 = np.maximum(
            np.clip(anchors[:, 0] + anchors[:, 2] * 0.5, 0.0, image_w), x1 + eps
        )
        y2 = np.maximum(
            np.clip(anchors[:, 1] + anchors[:, 3] * 0.5, 0.0, image_h), y1 + eps
        )
        anchors = np.stack(
            [(x1 + x2) * 0.5, (y1 + y2) * 0.5, x2 - x1, y2 - y1], axis=1
        )
    return BoxSet(anchors)


def _best_metric_per_gt(matrix: MetricMatrix) -> np.ndarray:
    if matrix.cols == 0:
        return np.full(matrix.rows, np.nan)
    if matrix.kind.is_distance:
        return matrix.values.min(axis=1)
    return matrix.values.max(axis=1)


def assign(cfg: AssignerConfig, gts: BoxSet, anchors: BoxSet) -> AssignmentResult:
    """Dispatch to the configured strategy."""
    if cfg.strategy is Strategy.THRESHOLD:
        return assign_threshold(cfg, gts, anchors)
    return assign_rka(cfg, gts, anchors)


def assign_threshold(cfg: AssignerConfig, gts: BoxSet, anchors: BoxSet) -> AssignmentResult:
    """Two-threshold assignment with per-gt sample compensation.

    An anchor whose best score is >= ``theta_p`` is positive for its
    highest-scoring gt (ties to the lower gt index); below ``theta_n`` it is
    negative; in between it is ignored. Afterwards every gt's single best
    anchor (ties to the lower anchor index) is forced positive unless that
    anchor is already positive for another gt — compensation overrides only
    negative/ignore labels, so gts sharing a best anchor can still end up
    with zero positives. For a distance metric (GWD) the thresholds compare
    against the negated distance, which in practice makes compensation the
    only source of positives.
    """
    n_gt = len(gts)
    n_anchor = len(anchors)
    labels = np.full(n_anchor, NEGATIVE, dtype=np.int64)
    if n_gt == 0 or n_anchor == 0:
        matrix = pairwise(cfg.metric, gts, anchors, cfg.C)
        return AssignmentResult(
            labels=labels,
            pos_count_per_gt=np.zeros(n_gt, dtype=np.int64),
            max_metric_per_gt=_best_metric_per_gt(matrix),
        )

    matrix = pairwise(cfg.metric, gts, anchors, cfg.C)
    scores = ranking_scores(matrix)

    # np.argmax returns the first occurrence, i.e. the lowest gt index on ties.
    best_gt = scores.argmax(axis=0)
    best_score = scores[best_gt, np.arange(n_anchor)]
    labels[best_score >= cfg.theta_p] = best_gt[best_score >= cfg.theta_p]
    ignore_mask = (labels == NEGATIVE) & (best_score >= cfg.theta_n)
    labels[ignore_mask] = IGNORE

    # Sample compensation: each gt claims its single best anchor. Claims on
    # the same anchor are won by the higher score (lower gt index on ties);
    # an anchor already positive via the threshold rule is never overridden.
    gt_best_anchor = scores.argmax(axis=1)
    claim_winner: dict[int, int] = {}
    for i in range(n_gt):
        j = int(gt_best_anchor[i])
        current = claim_winner.get(j)
        if current is None or scores[i, j] > scores[current, j]:
            claim_winner[j] = i
    for j, i in claim_winner.items():
        if labels[j] < 0:
            labels[j] = i

    pos_count = np.bincount(labels[labels >= 0], minlength=n_gt)
    return AssignmentResult(
        labels=labels,
        pos_count_per_gt=pos_count.astype(np.int64),
        max_metric_per_gt=_best_metric_per_gt(matrix),
    )


def assign_rka(cfg: AssignerConfig, gts: BoxSet, anchors: BoxSet) -> AssignmentResult:
    """Ranking-based assignment: each gt's top-k anchors become positive.

    All anchors in no gt's top-k are negative; there is no ignore band. An
    anchor ranked by several gts goes to the one scoring it highest (ties to
    the lower gt index). With fewer than k anchors every anchor is a
    candidate for every gt and the same conflict rule applies.

    Because a similarity metric keeps discriminating at zero overlap, every
    gt has a usable ranking and receives positives even when no anchor
    overlaps it. The one exception is a gt nested inside another whose top-k
    candidates are all outscored by the enclosing gt; distinct, separated
    objects always keep at least one candidate in practice.
    """
    n_gt = len(gts)
    n_anchor = len(anchors)
    labels = np.full(n_anchor, NEGATIVE, dtype=np.int64)
    if n_gt == 0 or n_anchor == 0:
        matrix = pairwise(cfg.metric, gts, anchors, cfg.C)
        return AssignmentResult(
            labels=labels,
            pos_count_per_gt=np.zeros(n_gt, dtype=np.int64),
            max_metric_per_gt=_best_metric_per_gt(matrix),
        )

    matrix = pairwise(cfg.metric, gts, anchors, cfg.C)
    scores = ranking_scores(matrix)
    topk = _kernels.topk_per_row(scores, cfg.k)

    owner = np.full(n_anchor, NEGATIVE, dtype=np.int64)
    owner_score = np.full(n_anchor, -np.inf)
    for i in range(n_gt):
        for j in topk[i]:
            s = scores[i, j]
            # strict > keeps the earlier (lower) gt index on ties
            if s > owner_score[j]:
                owner_score[j] = s
                owner[j] = i
    claimed = owner >= 0
    labels[claimed] = owner[claimed]

    pos_count = np.bincount(labels[labels >= 0], minlength=n_gt)
    return AssignmentResult(
        labels=labels,
        pos_count_per_gt=pos_count.astype(np.int64),
        max_metric_per_gt=_best_metric_per_gt(matrix),
    )


def sample(
    result: AssignmentResult,
    batch: int = 256,
    pos_fraction: float = 1.0 / 3.0,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Random positive/negative training batch from an assignment.

    Draws up to ``int(batch * pos_fraction)`` positives uniformly without
    replacement and fills the remainder of the batch with negatives.
    Reproducible from ``seed`` (required; no hidden global randomness).

    Returns:
        Sorted index arrays ``(positives, negatives)``.
    """
    if seed is None:
        raise InvalidParameterError("sample requires an explicit seed")
    if batch < 0:
        raise InvalidParameterError(f"batch must be >= 0, got {batch}")
    if not (0.0 <= pos_fraction <= 1.0):
        raise InvalidParameterError(f"pos_fraction out of [0, 1]: {pos_fraction}")
    empty = np.zeros(0, dtype=np.int64)
    if batch == 0:
        return empty, empty
    rng = np.random.default_rng(seed)
    pos_pool = np.flatnonzero(result.labels >= 0)
    neg_pool = np.flatnonzero(result.labels == NEGATIVE)
    n_pos = min(int(batch * pos_fraction), pos_pool.shape[0])
    pos = np.sort(rng.choice(pos_pool, size=n_pos, replace=False)) if n_pos else empty
    n_neg = min(batch - n_pos, neg_pool.shape[0])
    neg = np.sort(rng.choice(neg_pool, size=n_neg, replace=False)) if n_neg else empty
    return pos.astype(np.int64), neg.astype(np.int64)
