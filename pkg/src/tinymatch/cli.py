"""Command-line surface: curves, assignment statistics, evaluation, sweeps.

Exit codes: 0 on success, 1 on runtime or I/O failure, 2 on usage errors.
Defaults can be overridden by a plain ``key = value`` config file passed via
``--config``; explicit flags win over the config file.

The sweep command reproduces assignment-level statistics only. Detector AP
sweeps require training a detector and are out of scope here; what the
sweep shows is how the label assignment itself reacts to the parameter.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from . import __version__
from .assignment import (
    AnchorConfig,
    AssignerConfig,
    Strategy,
    assign,
    generate_anchors,
)
from .dataio import compute_stats, export_csv, load_annotations
from .diagnostics import ScaleBucket, deviation_curve
from .errors import TinymatchError
from .evaluation import evaluate, load_detections
from .geometry import BoxSet
from .metrics import DEFAULT_C, MetricKind

_CONFIG_KEYS = {
    "strategy", "metric", "k", "C", "theta_p", "theta_n",
    "anchor_scale", "strides", "ratios",
}


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise TinymatchError(
                    f"{path}:{lineno}: expected 'key = value', got {line!r}"
                )
            key, value = (part.strip() for part in stripped.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise TinymatchError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value
    return values


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _assigner_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file with defaults")
    parser.add_argument("--strategy", choices=[s.value for s in Strategy],
                        help="assignment strategy (default: rka)")
    parser.add_argument("--metric", choices=[m.value for m in MetricKind],
                        help="box metric (default: nwd)")
    parser.add_argument("--k", type=int, help="positives per gt for rka (default: 2)")
    parser.add_argument("--C", type=float, dest="C",
                        help=f"NWD normalization constant (default: {DEFAULT_C})")
    parser.add_argument("--theta-p", type=float,
                        help="positive threshold (default: 0.7)")
    parser.add_argument("--theta-n", type=float,
                        help="negative threshold (default: 0.3)")
    parser.add_argument("--anchor-scale", type=float,
                        help="anchor side = scale * stride (default: 8)")
    parser.add_argument("--strides",
                        help="comma-separated pyramid strides (default: 4,8,16,32,64)")
    parser.add_argument("--ratios",
                        help="comma-separated aspect ratios (default: 0.5,1,2)")


def _resolve_configs(args) -> tuple[AssignerConfig, AnchorConfig]:
    file_values = _parse_config_file(args.config) if args.config else {}

    def pick(flag_value, key: str, convert, default):
        if flag_value is not None:
            return flag_value
        if key in file_values:
            return convert(file_values[key])
        return default

    assigner = AssignerConfig(
        strategy=Strategy(pick(args.strategy, "strategy", str, Strategy.RKA.value)),
        metric=MetricKind(pick(args.metric, "metric", str, MetricKind.NWD.value)),
        theta_p=pick(args.theta_p, "theta_p", float, 0.7),
        theta_n=pick(args.theta_n, "theta_n", float, 0.3),
        k=pick(args.k, "k", int, 2),
        C=pick(args.C, "C", float, DEFAULT_C),
    )
    anchors = AnchorConfig(
        strides=pick(args.strides and _ints(args.strides), "strides", _ints,
                     (4, 8, 16, 32, 64)),
        anchor_scale=pick(args.anchor_scale, "anchor_scale", float, 8.0),
        ratios=pick(args.ratios and _floats(args.ratios), "ratios", _floats,
                    (0.5, 1.0, 2.0)),
    )
    return assigner, anchors


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
        return
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cmd_curve(args) -> int:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    for metric_name in args.metric:
        metric = MetricKind(metric_name)
        for scale in args.scale:
            curve = deviation_curve(
                metric, scale, size_ratio=args.ratio, max_dev=args.max_dev, C=args.C
            )
            name = f"curve_{metric.value}_scale{scale:g}.csv"
            export_csv(curve.rows(), os.path.join(out_dir, name),
                       header=("deviation", "value"))
    return 0


def _assignment_report(args) -> dict:
    assigner_cfg, anchor_cfg = _resolve_configs(args)
    ann = load_annotations(args.ann)
    grouped = ann.by_image()
    anchor_cache: dict[tuple[int, int], object] = {}
    bucket_sums: dict[str, int] = {}
    bucket_counts: dict[str, int] = {}
    total_pos = 0
    total_neg = 0
    total_gts = 0
    for image in ann.images:
        anns = grouped[image.id]
        if anns:
            gts = BoxSet.from_boxes(
                (a.box for a in anns), [a.category_id for a in anns]
            )
        else:
            gts = BoxSet.empty(with_categories=True)
        key = (image.width, image.height)
        if key not in anchor_cache:
            anchor_cache[key] = generate_anchors(
                anchor_cfg, image.width, image.height
            )
        anchors = anchor_cache[key]
        result = assign(assigner_cfg, gts, anchors)
        total_pos += result.num_pos
        total_neg += result.num_neg
        total_gts += len(gts)
        sizes = gts.absolute_sizes()
        for i in range(len(gts)):
            name = ScaleBucket.of_size(float(sizes[i])).value
            bucket_sums[name] = bucket_sums.get(name, 0) + int(result.pos_count_per_gt[i])
            bucket_counts[name] = bucket_counts.get(name, 0) + 1
    means = {
        name: bucket_sums[name] / bucket_counts[name] for name in bucket_sums
    }
    return {
        "strategy": assigner_cfg.strategy.value,
        "metric": assigner_cfg.metric.value,
        "k": assigner_cfg.k,
        "C": assigner_cfg.C,
        "theta_p": assigner_cfg.theta_p,
        "theta_n": assigner_cfg.theta_n,
        "anchor_scale": anchor_cfg.anchor_scale,
        "strides": list(anchor_cfg.strides),
        "num_images": len(ann.images),
        "num_gts": total_gts,
        "bucket_mean_positives": means,
        "totals": {"positives": total_pos, "negatives": total_neg},
    }


def _cmd_assign_stats(args) -> int:
    _write_json(_assignment_report(args), args.out)
    return 0


def _cmd_evaluate(args) -> int:
    ann = load_annotations(args.ann)
    dets = load_detections(args.dets)
    report = evaluate(dets, ann, max_det=args.max_det)
    print(report.table())
    if args.out:
        _write_json(report.to_json_dict(), args.out)
    return 0


def _cmd_dataset_stats(args) -> int:
    ann = load_annotations(args.ann)
    payload = compute_stats(ann).to_json_dict()
    payload["dropped_boxes"] = ann.dropped_boxes
    _write_json(payload, args.out)
    return 0


_SWEEP_FLAGS = {"C": "C", "k": "k", "anchor-scale": "anchor_scale"}


def _cmd_sweep(args) -> int:
    values = args.values.split(",")
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    flag = _SWEEP_FLAGS[args.param]
    summary_rows = []
    bucket_names = [b.value for b in ScaleBucket]
    for raw in values:
        value = int(raw) if args.param == "k" else float(raw)
        run_args = argparse.Namespace(**vars(args))
        setattr(run_args, flag, value)
        report = _assignment_report(run_args)
        _write_json(report, os.path.join(out_dir, f"report_{flag}_{raw.strip()}.json"))
        means = report["bucket_mean_positives"]
        summary_rows.append(
            [value]
            + [means.get(name, "") for name in bucket_names]
            + [report["totals"]["positives"], report["totals"]["negatives"]]
        )
    export_csv(
        summary_rows,
        os.path.join(out_dir, "sweep_summary.csv"),
        header=[args.param] + [f"mean_pos_{n}" for n in bucket_names]
        + ["total_pos", "total_neg"],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tinymatch",
        description="Box similarity metrics, label assignment diagnostics and "
        "scale-stratified detection evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_curve = sub.add_parser(
        "curve", help="write metric-vs-deviation CSV curves"
    )
    p_curve.add_argument("--metric", action="append", required=True,
                         choices=[m.value for m in MetricKind],
                         help="metric kind; repeat for several curves")
    p_curve.add_argument("--scale", action="append", type=float, required=True,
                         help="square box side in pixels; repeat for several curves")
    p_curve.add_argument("--ratio", type=float, default=1.0,
                         help="side ratio of the moving box (default: 1)")
    p_curve.add_argument("--max-dev", type=int, default=30,
                         help="largest diagonal deviation in pixels (default: 30)")
    p_curve.add_argument("--C", type=float, default=DEFAULT_C, dest="C",
                         help=f"NWD normalization constant (default: {DEFAULT_C})")
    p_curve.add_argument("--out", default=".", help="output directory")
    p_curve.set_defaults(func=_cmd_curve)

    p_assign = sub.add_parser(
        "assign-stats",
        help="per-scale-bucket positive-sample statistics over a dataset",
    )
    p_assign.add_argument("--ann", required=True, help="COCO annotation file")
    _assigner_flags(p_assign)
    p_assign.add_argument("--out", help="report JSON path (default: stdout)")
    p_assign.set_defaults(func=_cmd_assign_stats)

    p_eval = sub.add_parser(
        "evaluate", help="COCO-style scale-stratified AP/AR evaluation"
    )
    p_eval.add_argument("--ann", required=True, help="COCO annotation file")
    p_eval.add_argument("--dets", required=True, help="COCO detection results JSON")
    p_eval.add_argument("--max-det", type=int, default=1500,
                        help="max detections per image and category (default: 1500)")
    p_eval.add_argument("--out", help="report JSON path (optional)")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_stats = sub.add_parser(
        "dataset-stats", help="instance counts, size mean/std, bucket shares"
    )
    p_stats.add_argument("--ann", required=True, help="COCO annotation file")
    p_stats.add_argument("--out", help="stats JSON path (default: stdout)")
    p_stats.set_defaults(func=_cmd_dataset_stats)

    p_sweep = sub.add_parser(
        "sweep",
        help="run assign-stats over a parameter range (assignment statistics "
        "only, not detector AP)",
    )
    p_sweep.add_argument("--param", required=True, choices=sorted(_SWEEP_FLAGS),
                         help="parameter to sweep")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated parameter values")
    p_sweep.add_argument("--ann", required=True, help="COCO annotation file")
    _assigner_flags(p_sweep)
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TinymatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
