"""COCO-format annotation ingestion, synthetic scenes, dataset statistics.

Boxes are converted from COCO's top-left ``[x, y, w, h]`` to center form at
the parsing boundary and back on serialization. Zero-area boxes are dropped
with a counted warning rather than failing the whole file.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diagnostics import ScaleBucket
from .errors import AnnotationError, InvalidParameterError
from .geometry import Box, BoxSet

__all__ = [
    "ImageInfo",
    "Annotation",
    "Category",
    "AnnotationSet",
    "DatasetStats",
    "load_annotations",
    "save_annotations",
    "compute_stats",
    "synth_scene",
    "export_csv",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int
    file_name: str


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    box: Box
    iscrowd: bool = False


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class AnnotationSet:
    """Validated COCO-style annotation collection.

    ``dropped_boxes`` counts annotations discarded at parse time for having
    zero or negative extent.
    """

    images: tuple[ImageInfo, ...]
    annotations: tuple[Annotation, ...]
    categories: tuple[Category, ...]
    dropped_boxes: int = 0

    def image_ids(self) -> list[int]:
        return [im.id for im in self.images]

    def by_image(self) -> dict[int, list[Annotation]]:
        """Annotations grouped by image id (images without any included)."""
        grouped: dict[int, list[Annotation]] = {im.id: [] for im in self.images}
        for ann in self.annotations:
            grouped[ann.image_id].append(ann)
        return grouped

    def gt_boxset(self, image_id: int) -> BoxSet:
        """Boxes of one image as a BoxSet with category labels."""
        anns = [a for a in self.annotations if a.image_id == image_id]
        if not anns:
            return BoxSet.empty(with_categories=True)
        return BoxSet.from_boxes(
            (a.box for a in anns), [a.category_id for a in anns]
        )

    def sizes(self) -> np.ndarray:
        """Absolute size sqrt(w*h) of every annotation."""
        if not self.annotations:
            return np.zeros(0)
        wh = np.array([(a.box.w, a.box.h) for a in self.annotations])
        return np.sqrt(wh[:, 0] * wh[:, 1])

    def to_coco_dict(self) -> dict:
        return {
            "images": [
                {
                    "id": im.id,
                    "width": im.width,
                    "height": im.height,
                    "file_name": im.file_name,
                }
                for im in self.images
            ],
            "annotations": [
                {
                    "id": a.id,
                    "image_id": a.image_id,
                    "category_id": a.category_id,
                    "bbox": [
                        a.box.cx - a.box.w * 0.5,
                        a.box.cy - a.box.h * 0.5,
                        a.box.w,
                        a.box.h,
                    ],
                    "iscrowd": int(a.iscrowd),
                }
                for a in self.annotations
            ],
            "categories": [
                {"id": c.id, "name": c.name} for c in self.categories
            ],
        }


@dataclass(frozen=True)
class DatasetStats:
    """Instance counts, size statistics and scale-bucket shares of a split."""

    total_instances: int
    per_category: dict[str, int]
    size_mean: float | None
    size_std: float | None
    bucket_percentages: dict[str, float]
    instances_per_image: dict[int, int]

    def to_json_dict(self) -> dict:
        return {
            "total_instances": self.total_instances,
            "per_category": self.per_category,
            "size_mean": self.size_mean,
            "size_std": self.size_std,
            "bucket_percentages": self.bucket_percentages,
            "instances_per_image": {
                str(k): v for k, v in sorted(self.instances_per_image.items())
            },
        }


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise AnnotationError(message)


def load_annotations(path: str | os.PathLike) -> AnnotationSet:
    """Parse and validate a COCO-format annotation file.

    Raises:
        AnnotationError: malformed JSON (with byte offset), missing keys,
            duplicate ids, or dangling foreign keys (naming the annotation).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise AnnotationError(
            f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc
    _require(isinstance(data, dict), f"{path}: top level must be an object")
    for key in ("images", "annotations", "categories"):
        _require(
            isinstance(data.get(key), list), f"{path}: missing or non-list {key!r}"
        )

    images = []
    seen_img = set()
    for entry in data["images"]:
        img = ImageInfo(
            id=int(entry["id"]),
            width=int(entry["width"]),
            height=int(entry["height"]),
            file_name=str(entry.get("file_name", "")),
        )
        _require(img.id not in seen_img, f"{path}: duplicate image id {img.id}")
        seen_img.add(img.id)
        images.append(img)

    categories = []
    seen_cat = set()
    for entry in data["categories"]:
        cat = Category(id=int(entry["id"]), name=str(entry.get("name", "")))
        _require(cat.id not in seen_cat, f"{path}: duplicate category id {cat.id}")
        seen_cat.add(cat.id)
        categories.append(cat)

    annotations = []
    seen_ann = set()
    dropped = 0
    for entry in data["annotations"]:
        ann_id = int(entry["id"])
        _require(ann_id not in seen_ann, f"{path}: duplicate annotation id {ann_id}")
        seen_ann.add(ann_id)
        image_id = int(entry["image_id"])
        _require(
            image_id in seen_img,
            f"{path}: annotation {ann_id} references unknown image_id {image_id}",
        )
        category_id = int(entry["category_id"])
        _require(
            category_id in seen_cat,
            f"{path}: annotation {ann_id} references unknown category_id {category_id}",
        )
        bbox = entry["bbox"]
        _require(
            isinstance(bbox, list) and len(bbox) == 4,
            f"{path}: annotation {ann_id} bbox must be [x, y, w, h]",
        )
        x, y, w, h = (float(v) for v in bbox)
        if not all(map(math.isfinite, (x, y, w, h))):
            raise AnnotationError(
                f"{path}: annotation {ann_id} bbox has non-finite values"
            )
        if w <= 0 or h <= 0:
            dropped += 1
            continue
        annotations.append(
            Annotation(
                id=ann_id,
                image_id=image_id,
                category_id=category_id,
                box=Box(cx=x + w * 0.5, cy=y + h * 0.5, w=w, h=h),
                iscrowd=bool(entry.get("iscrowd", 0)),
            )
        )
    if dropped:
        logger.warning("%s: dropped %d zero-area boxes", path, dropped)

    return AnnotationSet(
        images=tuple(images),
        annotations=tuple(annotations),
        categories=tuple(categories),
        dropped_boxes=dropped,
    )


def save_annotations(ann: AnnotationSet, path: str | os.PathLike) -> None:
    """Serialize back to COCO JSON (atomic write)."""
    _atomic_write_text(path, json.dumps(ann.to_coco_dict()))


def compute_stats(ann: AnnotationSet) -> DatasetStats:
    """Size and count statistics of an annotation set.

    The size standard deviation is the population form. Bucket percentages
    are shares of all instances; very-tiny through medium plus large sum to
    100 when there are any instances.
    """
    name_by_id = {c.id: c.name for c in ann.categories}
    per_category = {c.name: 0 for c in ann.categories}
    for a in ann.annotations:
        per_category[name_by_id[a.category_id]] += 1

    per_image: dict[int, int] = {im.id: 0 for im in ann.images}
    for a in ann.annotations:
        per_image[a.image_id] += 1
    histogram: dict[int, int] = {}
    for count in per_image.values():
        histogram[count] = histogram.get(count, 0) + 1

    total = len(ann.annotations)
    if total == 0:
        return DatasetStats(
            total_instances=0,
            per_category=per_category,
            size_mean=None,
            size_std=None,
            bucket_percentages={},
            instances_per_image=histogram,
        )

    sizes = ann.sizes()
    bucket_counts = {b: 0 for b in ScaleBucket}
    for s in sizes:
        bucket_counts[ScaleBucket.of_size(float(s))] += 1
    percentages = {
        b.value: 100.0 * bucket_counts[b] / total
        for b in ScaleBucket
        if bucket_counts[b]
    }
    return DatasetStats(
        total_instances=total,
        per_category=per_category,
        size_mean=float(sizes.mean()),
        size_std=float(sizes.std()),
        bucket_percentages=percentages,
        instances_per_image=histogram,
    )


_SYNTH_DRAW_RANGES = {
    ScaleBucket.VERY_TINY: (2.0, 8.0),
    ScaleBucket.TINY: (8.0, 16.0),
    ScaleBucket.SMALL: (16.0, 32.0),
    ScaleBucket.MEDIUM: (32.0, 64.0),
    # the large bucket is unbounded above; draws are capped for placement
    ScaleBucket.LARGE: (64.0, 128.0),
}
_MAX_PLACE_RETRIES = 32


def synth_scene(
    spec: Mapping[ScaleBucket | str, int],
    image_size: tuple[int, int] | int,
    seed: int,
) -> AnnotationSet:
    """Random single-image scene with the requested per-bucket gt counts.

    Absolute sizes are uniform within each bucket's range and aspect ratios
    are drawn log-uniformly in [0.5, 2], which keeps the drawn size exact.
    Boxes are placed uniformly inside the image; placements that cannot fit
    are re-drawn a bounded number of times and clipped as a last resort.
    """
    if isinstance(image_size, int):
        image_w = image_h = image_size
    else:
        image_w, image_h = image_size
    if image_w <= 0 or image_h <= 0:
        raise InvalidParameterError(f"bad image size {image_size}")
    rng = np.random.default_rng(seed)
    annotations = []
    ann_id = 1
    for bucket_key in sorted(spec, key=lambda b: _bucket_of(b).value):
        count = spec[bucket_key]
        if count < 0:
            raise InvalidParameterError(f"negative count for {bucket_key}")
        bucket = _bucket_of(bucket_key)
        lo, hi = _SYNTH_DRAW_RANGES[bucket]
        for _ in range(count):
            box = _draw_box(rng, lo, hi, image_w, image_h)
            annotations.append(
                Annotation(
                    id=ann_id, image_id=1, category_id=1, box=box, iscrowd=False
                )
            )
            ann_id += 1
    return AnnotationSet(
        images=(
            ImageInfo(
                id=1, width=image_w, height=image_h, file_name="synthetic_000001.png"
            ),
        ),
        annotations=tuple(annotations),
        categories=(Category(id=1, name="object"),),
    )


def _bucket_of(key: ScaleBucket | str) -> ScaleBucket:
    return key if isinstance(key, ScaleBucket) else ScaleBucket(key)


def _draw_box(
    rng: np.random.Generator, lo: float, hi: float, image_w: int, image_h: int
) -> Box:
    for _ in range(_MAX_PLACE_RETRIES):
        size = rng.uniform(lo, hi)
        ratio = math.exp(rng.uniform(math.log(0.5), math.log(2.0)))
        w = size * math.sqrt(ratio)
        h = size / math.sqrt(ratio)
        if w <= image_w and h <= image_h:
            cx = rng.uniform(w * 0.5, image_w - w * 0.5)
            cy = rng.uniform(h * 0.5, image_h - h * 0.5)
            return Box(cx=cx, cy=cy, w=w, h=h)
    # Last resort: center a clipped box; only reachable when a bucket cannot
    # fit the image at any ratio.
    w = min(float(image_w), hi)
    h = min(float(image_h), hi)
    return Box(cx=image_w * 0.5, cy=image_h * 0.5, w=w, h=h)


def export_csv(
    rows: Iterable[Sequence],
    path: str | os.PathLike,
    header: Sequence[str],
) -> None:
    """Write rows as UTF-8 CSV: header line, LF endings, floats to 6
    significant digits. The write is atomic (temp file + rename)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (np.floating,)):
        return f"{float(value):.6g}"
    return str(value)


def _atomic_write_text(path: str | os.PathLike, text: str) -> None:
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
