"""Scalar metric formulas on plain floats.

These are the reference implementations of every pairwise metric. The
compiled kernel in ``_ext.pyx`` mirrors the arithmetic here operation for
operation (same expression order, same libm calls), which is what makes the
batch path bit-identical to these scalars. Editing a formula in one file
requires the same edit in the other.
"""

import math

# Metric codes shared with the compiled kernel.
IOU = 0
GIOU = 1
DIOU = 2
CIOU = 3
GWD = 4
NWD = 5

_FOUR_OVER_PI_SQ = 4.0 / (math.pi * math.pi)


def iou(acx, acy, aw, ah, bcx, bcy, bw, bh):
    ax1 = acx - aw * 0.5
    ay1 = acy - ah * 0.5
    ax2 = acx + aw * 0.5
    ay2 = acy + ah * 0.5
    bx1 = bcx - bw * 0.5
    by1 = bcy - bh * 0.5
    bx2 = bcx + bw * 0.5
    by2 = bcy + bh * 0.5
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    # areas from the derived corners so that identical boxes give
    # inter == union exactly and m(a, a) is 1.0 bit-for-bit
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def giou(acx, acy, aw, ah, bcx, bcy, bw, bh):
    ax1 = acx - aw * 0.5
    ay1 = acy - ah * 0.5
    ax2 = acx + aw * 0.5
    ay2 = acy + ah * 0.5
    bx1 = bcx - bw * 0.5
    by1 = bcy - bh * 0.5
    bx2 = bcx + bw * 0.5
    by2 = bcy + bh * 0.5
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    iou_v = inter / union
    ew = max(ax2, bx2) - min(ax1, bx1)
    eh = max(ay2, by2) - min(ay1, by1)
    enclose = ew * eh
    return iou_v - (enclose - union) / enclose


def diou(acx, acy, aw, ah, bcx, bcy, bw, bh):
    ax1 = acx - aw * 0.5
    ay1 = acy - ah * 0.5
    ax2 = acx + aw * 0.5
    ay2 = acy + ah * 0.5
    bx1 = bcx - bw * 0.5
    by1 = bcy - bh * 0.5
    bx2 = bcx + bw * 0.5
    by2 = bcy + bh * 0.5
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    iou_v = inter / union
    ew = max(ax2, bx2) - min(ax1, bx1)
    eh = max(ay2, by2) - min(ay1, by1)
    rho2 = (acx - bcx) * (acx - bcx) + (acy - bcy) * (acy - bcy)
    c2 = ew * ew + eh * eh
    return iou_v - rho2 / c2


def ciou(acx, acy, aw, ah, bcx, bcy, bw, bh):
    diou_v = diou(acx, acy, aw, ah, bcx, bcy, bw, bh)
    d = math.atan(aw / ah) - math.atan(bw / bh)
    v = _FOUR_OVER_PI_SQ * (d * d)
    if v == 0.0:
        return diou_v
    # iou recomputed rather than threaded through so diou stays reusable;
    # identical arithmetic, identical result.
    iou_v = iou(acx, acy, aw, ah, bcx, bcy, bw, bh)
    alpha = v / ((1.0 - iou_v) + v)
    return diou_v - alpha * v


def wasserstein_sq(acx, acy, aw, ah, bcx, bcy, bw, bh):
    dx = acx - bcx
    dy = acy - bcy
    dw = aw * 0.5 - bw * 0.5
    dh = ah * 0.5 - bh * 0.5
    return dx * dx + dy * dy + dw * dw + dh * dh


def gwd(acx, acy, aw, ah, bcx, bcy, bw, bh):
    return math.sqrt(wasserstein_sq(acx, acy, aw, ah, bcx, bcy, bw, bh))


def nwd(acx, acy, aw, ah, bcx, bcy, bw, bh, c):
    w2 = wasserstein_sq(acx, acy, aw, ah, bcx, bcy, bw, bh)
    return math.exp(-math.sqrt(w2) / c)


def metric_value(kind, acx, acy, aw, ah, bcx, bcy, bw, bh, c):
    """Dispatch on the integer metric code; `c` is used by NWD only."""
    if kind == IOU:
        return iou(acx, acy, aw, ah, bcx, bcy, bw, bh)
    if kind == GIOU:
        return giou(acx, acy, aw, ah, bcx, bcy, bw, bh)
    if kind == DIOU:
        return diou(acx, acy, aw, ah, bcx, bcy, bw, bh)
    if kind == CIOU:
        return ciou(acx, acy, aw, ah, bcx, bcy, bw, bh)
    if kind == GWD:
        return gwd(acx, acy, aw, ah, bcx, bcy, bw, bh)
    if kind == NWD:
        return nwd(acx, acy, aw, ah, bcx, bcy, bw, bh, c)
    raise ValueError(f"unknown metric code {kind}")
