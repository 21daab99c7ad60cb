"""Pure-Python batch kernels: loops over the scalar reference formulas.

Slow but dependency-free; used when the compiled extension is unavailable.
Bit-identical to the scalar path by construction.
"""

import numpy as np

from . import scalars


def pairwise_matrix(kind: int, gts: np.ndarray, anchors: np.ndarray, c: float) -> np.ndarray:
    """(n_gt, n_anchor) matrix of metric values, row-major."""
    n_gt = gts.shape[0]
    n_anchor = anchors.shape[0]
    out = np.empty((n_gt, n_anchor), dtype=np.float64)
    fn = scalars.metric_value
    for i in range(n_gt):
        gcx, gcy, gw, gh = gts[i]
        row = out[i]
        for j in range(n_anchor):
            acx, acy, aw, ah = anchors[j]
            row[j] = fn(kind, gcx, gcy, gw, gh, acx, acy, aw, ah, c)
    return out


def topk_per_row(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries per row, ties broken by lower index.

    Returns an (n_rows, min(k, n_cols)) int64 array with each row's selected
    column indices ordered by (value desc, index asc).
    """
    n_rows, n_cols = scores.shape
    kk = min(k, n_cols)
    out = np.empty((n_rows, kk), dtype=np.int64)
    for i in range(n_rows):
        row = scores[i]
        order = sorted(range(n_cols), key=lambda j: (-row[j], j))
        out[i] = order[:kk]
    return out
