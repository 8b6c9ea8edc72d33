"""Independent brute-force oracles used by unit and acceptance tests.

These deliberately avoid the library's computation paths: the IoU oracle
counts unit cells on a raster, the curve oracles loop per threshold with
plain Python accumulation, and the AP oracle integrates the precision
envelope by explicit evaluation at each recall level.
"""

from __future__ import annotations

import numpy as np

from uavbench.geometry import Box, center_error, iou, normalized_center_error


def raster_iou(a: Box, b: Box) -> float:
    """IoU of integer-coordinate boxes by painting and counting unit cells."""
    xs = [a.x, a.x + a.w, b.x, b.x + b.w]
    ys = [a.y, a.y + a.h, b.y, b.y + b.h]
    x0, y0 = int(min(xs)), int(min(ys))
    w, h = int(max(xs)) - x0, int(max(ys)) - y0
    ga = np.zeros((h, w), dtype=bool)
    gb = np.zeros((h, w), dtype=bool)
    ga[int(a.y) - y0:int(a.y + a.h) - y0, int(a.x) - x0:int(a.x + a.w) - x0] = True
    gb[int(b.y) - y0:int(b.y + b.h) - y0, int(b.x) - x0:int(b.x + b.w) - x0] = True
    inter = int(np.count_nonzero(ga & gb))
    union = int(np.count_nonzero(ga | gb))
    return float(inter) / float(union)


def success_oracle(pairs):
    """(values, auc) recomputed with plain per-threshold loops."""
    thresholds = [i / 20.0 for i in range(21)]
    ious = [iou(p, g) for p, g in pairs]
    values = [sum(1 for v in ious if v > t) / len(ious) for t in thresholds]
    return values, sum(values) / len(values)


def precision_oracle(pairs):
    thresholds = [float(i) for i in range(51)]
    errs = [center_error(p, g) for p, g in pairs]
    values = [sum(1 for e in errs if e <= t) / len(errs) for t in thresholds]
    return values, values[20]


def norm_precision_oracle(pairs):
    thresholds = [i / 100.0 for i in range(51)]
    errs = [normalized_center_error(p, g) for p, g in pairs]
    values = [sum(1 for e in errs if e <= t) / len(errs) for t in thresholds]
    return values, sum(values) / len(values)


def ap_envelope_oracle(predictions, gts, iou_thr: float) -> float:
    """AP by explicit precision-envelope evaluation at every recall level."""
    flat = []
    for img_idx, preds in enumerate(predictions):
        for order_idx, p in enumerate(preds):
            flat.append((img_idx, order_idx, p))
    n_gt = sum(len(g) for g in gts)
    if not flat:
        return 0.0
    # stable sort by descending score, preserving input order on ties
    flat.sort(key=lambda item: (-item[2].score, item[0], item[1]))
    matched = [set() for _ in gts]
    precisions, recalls = [], []
    tp = 0
    for rank, (img_idx, _, pred) in enumerate(flat, start=1):
        best_iou, best_gt = 0.0, None
        for gi, gbox in enumerate(gts[img_idx]):
            if gi in matched[img_idx]:
                continue
            ov = iou(pred.box, gbox)
            if ov > best_iou:
                best_iou, best_gt = ov, gi
        if best_gt is not None and best_iou >= iou_thr:
            matched[img_idx].add(best_gt)
            tp += 1
        precisions.append(tp / rank)
        recalls.append(tp / n_gt)

    def p_interp(r):
        vals = [p for p, rec in zip(precisions, recalls) if rec >= r]
        return max(vals) if vals else 0.0

    levels = sorted(set(recalls))
    ap, prev = 0.0, 0.0
    for r in levels:
        ap += (r - prev) * p_interp(r)
        prev = r
    return ap


def random_box(rng, lo=0, hi=30, max_side=20) -> Box:
    x = int(rng.integers(lo, hi))
    y = int(rng.integers(lo, hi))
    w = int(rng.integers(1, max_side + 1))
    h = int(rng.integers(1, max_side + 1))
    return Box(float(x), float(y), float(w), float(h))


def random_result_set(rng, n_min=1, n_max=30, absent_prob=0.15):
    """(pred, gt-or-None) pairs with at least one present ground truth."""
    n = int(rng.integers(n_min, n_max + 1))
    pairs = []
    for _ in range(n):
        pred = random_box(rng)
        if rng.random() < absent_prob:
            pairs.append((pred, None))
        else:
            gt = random_box(rng)
            pairs.append((pred, gt))
    if all(g is None for _, g in pairs):
        pairs[0] = (pairs[0][0], random_box(rng))
    return pairs
