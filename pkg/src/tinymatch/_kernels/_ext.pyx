# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels.

Mirrors ``scalars.py`` operation for operation: same expression order, same
libm functions, compiled without FMA contraction, so every entry is
bit-identical to the pure scalar path.
"""

from libc.math cimport atan, exp, sqrt, M_PI
from libc.stdlib cimport free, malloc

import numpy as np

ctypedef double (*metric_fn)(double, double, double, double,
                             double, double, double, double, double) noexcept nogil

cdef double FOUR_OVER_PI_SQ = 4.0 / (M_PI * M_PI)


cdef inline double dmin(double a, double b) noexcept nogil:
    return a if a < b else b


cdef inline double dmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef double c_iou(double acx, double acy, double aw, double ah,
                  double bcx, double bcy, double bw, double bh,
                  double c) noexcept nogil:
    cdef double ax1 = acx - aw * 0.5
    cdef double ay1 = acy - ah * 0.5
    cdef double ax2 = acx + aw * 0.5
    cdef double ay2 = acy + ah * 0.5
    cdef double bx1 = bcx - bw * 0.5
    cdef double by1 = bcy - bh * 0.5
    cdef double bx2 = bcx + bw * 0.5
    cdef double by2 = bcy + bh * 0.5
    cdef double iw = dmin(ax2, bx2) - dmax(ax1, bx1)
    cdef double ih = dmin(ay2, by2) - dmax(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    cdef double inter = iw * ih
    # areas from derived corners: keeps m(a, a) == 1.0 bit-for-bit
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union_


cdef double c_giou(double acx, double acy, double aw, double ah,
                   double bcx, double bcy, double bw, double bh,
                   double c) noexcept nogil:
    cdef double ax1 = acx - aw * 0.5
    cdef double ay1 = acy - ah * 0.5
    cdef double ax2 = acx + aw * 0.5
    cdef double ay2 = acy + ah * 0.5
    cdef double bx1 = bcx - bw * 0.5
    cdef double by1 = bcy - bh * 0.5
    cdef double bx2 = bcx + bw * 0.5
    cdef double by2 = bcy + bh * 0.5
    cdef double iw = dmin(ax2, bx2) - dmax(ax1, bx1)
    cdef double ih = dmin(ay2, by2) - dmax(ay1, by1)
    cdef double inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    cdef double iou_v = inter / union_
    cdef double ew = dmax(ax2, bx2) - dmin(ax1, bx1)
    cdef double eh = dmax(ay2, by2) - dmin(ay1, by1)
    cdef double enclose = ew * eh
    return iou_v - (enclose - union_) / enclose


cdef double c_diou(double acx, double acy, double aw, double ah,
                   double bcx, double bcy, double bw, double bh,
                   double c) noexcept nogil:
    cdef double ax1 = acx - aw * 0.5
    cdef double ay1 = acy - ah * 0.5
    cdef double ax2 = acx + aw * 0.5
    cdef double ay2 = acy + ah * 0.5
    cdef double bx1 = bcx - bw * 0.5
    cdef double by1 = bcy - bh * 0.5
    cdef double bx2 = bcx + bw * 0.5
    cdef double by2 = bcy + bh * 0.5
    cdef double iw = dmin(ax2, bx2) - dmax(ax1, bx1)
    cdef double ih = dmin(ay2, by2) - dmax(ay1, by1)
    cdef double inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    cdef double iou_v = inter / union_
    cdef double ew = dmax(ax2, bx2) - dmin(ax1, bx1)
    cdef double eh = dmax(ay2, by2) - dmin(ay1, by1)
    cdef double rho2 = (acx - bcx) * (acx - bcx) + (acy - bcy) * (acy - bcy)
    cdef double c2 = ew * ew + eh * eh
    return iou_v - rho2 / c2


cdef double c_ciou(double acx, double acy, double aw, double ah,
                   double bcx, double bcy, double bw, double bh,
                   double c) noexcept nogil:
    cdef double diou_v = c_diou(acx, acy, aw, ah, bcx, bcy, bw, bh, c)
    cdef double d = atan(aw / ah) - atan(bw / bh)
    cdef double v = FOUR_OVER_PI_SQ * (d * d)
    if v == 0.0:
        return diou_v
    cdef double iou_v = c_iou(acx, acy, aw, ah, bcx, bcy, bw, bh, c)
    cdef double alpha = v / ((1.0 - iou_v) + v)
    return diou_v - alpha * v


cdef inline double c_w2sq(double acx, double acy, double aw, double ah,
                          double bcx, double bcy, double bw, double bh) noexcept nogil:
    cdef double dx = acx - bcx
    cdef double dy = acy - bcy
    cdef double dw = aw * 0.5 - bw * 0.5
    cdef double dh = ah * 0.5 - bh * 0.5
    return dx * dx + dy * dy + dw * dw + dh * dh


cdef double c_gwd(double acx, double acy, double aw, double ah,
                  double bcx, double bcy, double bw, double bh,
                  double c) noexcept nogil:
    return sqrt(c_w2sq(acx, acy, aw, ah, bcx, bcy, bw, bh))


cdef double c_nwd(double acx, double acy, double aw, double ah,
                  double bcx, double bcy, double bw, double bh,
                  double c) noexcept nogil:
    cdef double w2 = c_w2sq(acx, acy, aw, ah, bcx, bcy, bw, bh)
    return exp(-sqrt(w2) / c)


cdef metric_fn _dispatch(int kind) except NULL:
    if kind == 0:
        return c_iou
    if kind == 1:
        return c_giou
    if kind == 2:
        return c_diou
    if kind == 3:
        return c_ciou
    if kind == 4:
        return c_gwd
    if kind == 5:
        return c_nwd
    raise ValueError(f"unknown metric code {kind}")


def pairwise_matrix(int kind, const double[:, ::1] gts, const double[:, ::1] anchors, double c):
    """(n_gt, n_anchor) matrix of metric values, row-major."""
    cdef Py_ssize_t n_gt = gts.shape[0]
    cdef Py_ssize_t n_anchor = anchors.shape[0]
    cdef metric_fn fn = _dispatch(kind)
    out = np.empty((n_gt, n_anchor), dtype=np.float64)
    cdef double[:, ::1] mv = out
    cdef Py_ssize_t i, j
    cdef double gcx, gcy, gw, gh
    with nogil:
        for i in range(n_gt):
            gcx = gts[i, 0]
            gcy = gts[i, 1]
            gw = gts[i, 2]
            gh = gts[i, 3]
            for j in range(n_anchor):
                mv[i, j] = fn(gcx, gcy, gw, gh,
                              anchors[j, 0], anchors[j, 1],
                              anchors[j, 2], anchors[j, 3], c)
    return out


def topk_per_row(const double[:, ::1] scores, int k):
    """Indices of the k largest entries per row, ties broken by lower index."""
    cdef Py_ssize_t n_rows = scores.shape[0]
    cdef Py_ssize_t n_cols = scores.shape[1]
    cdef Py_ssize_t kk = k if k < n_cols else n_cols
    out = np.empty((n_rows, kk), dtype=np.int64)
    if kk == 0:
        return out
    cdef long long[:, ::1] mv = out
    cdef double* vals = <double*> malloc(kk * sizeof(double))
    cdef Py_ssize_t* idxs = <Py_ssize_t*> malloc(kk * sizeof(Py_ssize_t))
    if vals == NULL or idxs == NULL:
        free(vals)
        free(idxs)
        raise MemoryError()
    cdef Py_ssize_t i, j, count, pos, m
    cdef double v
    try:
        with nogil:
            for i in range(n_rows):
                count = 0
                for j in range(n_cols):
                    v = scores[i, j]
                    if count < kk:
                        pos = count
                        while pos > 0 and vals[pos - 1] < v:
                            pos -= 1
                        for m in range(count, pos, -1):
                            vals[m] = vals[m - 1]
                            idxs[m] = idxs[m - 1]
                        vals[pos] = v
                        idxs[pos] = j
                        count += 1
                    elif v > vals[kk - 1]:
                        pos = kk - 1
                        while pos > 0 and vals[pos - 1] < v:
                            pos -= 1
                        for m in range(kk - 1, pos, -1):
                            vals[m] = vals[m - 1]
                            idxs[m] = idxs[m - 1]
                        vals[pos] = v
                        idxs[pos] = j
                for j in range(kk):
                    mv[i, j] = idxs[j]
    finally:
        free(vals)
        free(idxs)
    return out
