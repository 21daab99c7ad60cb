"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths (dense pairwise metric matrix, per-row top-k) on a
realistic single-image assignment workload and verifies that both backends
produce identical bits.

Usage:
    python benchmarks/bench_kernels.py [--image 512] [--gts 20] [--repeat 3]
"""

import argparse
import time

import numpy as np

from tinymatch._kernels import pure, scalars
from tinymatch.assignment import AnchorConfig, generate_anchors

try:
    from tinymatch._kernels import _ext as ext
except ImportError:
    ext = None

KINDS = {"iou": scalars.IOU, "nwd": scalars.NWD, "ciou": scalars.CIOU}


def run_once(impl, kind, gts, anchors, k):
    start = time.perf_counter()
    matrix = impl.pairwise_matrix(kind, gts, anchors, 12.7)
    mid = time.perf_counter()
    topk = impl.topk_per_row(matrix, k)
    end = time.perf_counter()
    return matrix, topk, mid - start, end - mid


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--image", type=int, default=512,
                        help="square image side driving the anchor count")
    parser.add_argument("--gts", type=int, default=20)
    parser.add_argument("--k", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    gts = np.empty((args.gts, 4))
    gts[:, :2] = rng.uniform(0, args.image, (args.gts, 2))
    gts[:, 2:] = rng.uniform(2, 32, (args.gts, 2))
    anchors = generate_anchors(AnchorConfig(), args.image, args.image).boxes
    anchors = np.ascontiguousarray(anchors)
    print(f"workload: {args.gts} gts x {anchors.shape[0]} anchors, "
          f"top-{args.k} per gt\n")

    backends = [("pure", pure)] + ([("ext", ext)] if ext is not None else [])
    if ext is None:
        print("note: compiled extension not built; timing pure only\n")

    header = f"{'metric':8} {'backend':8} {'pairwise':>12} {'topk':>12}"
    print(header)
    print("-" * len(header))
    times = {}
    for kind_name, kind in KINDS.items():
        outputs = {}
        for name, impl in backends:
            best_pair = best_topk = float("inf")
            for _ in range(args.repeat):
                matrix, topk, t_pair, t_topk = run_once(
                    impl, kind, gts, anchors, args.k
                )
                best_pair = min(best_pair, t_pair)
                best_topk = min(best_topk, t_topk)
            outputs[name] = (matrix, topk)
            times[(kind_name, name)] = (best_pair, best_topk)
            print(f"{kind_name:8} {name:8} {best_pair * 1e3:9.2f} ms "
                  f"{best_topk * 1e3:9.2f} ms")
        if len(outputs) == 2:
            same_matrix = (outputs["pure"][0] == outputs["ext"][0]).all()
            same_topk = (outputs["pure"][1] == outputs["ext"][1]).all()
            assert same_matrix and same_topk, f"{kind_name}: backends disagree"
    if ext is not None:
        print("\nbit-identical outputs across backends: yes")
        for kind_name in KINDS:
            pair_speedup = times[(kind_name, "pure")][0] / times[(kind_name, "ext")][0]
            print(f"{kind_name}: pairwise speedup x{pair_speedup:.0f}")


if __name__ == "__main__":
    main()
