"""Tracking metric curves (Success / Precision / Normalized Precision) and
detection metrics (AP, mAP, P-R curves, FPS).

Conventions, pinned so numbers are reproducible across tools:
  - Success: 21 thresholds 0.00..1.00, a frame counts at threshold t when
    IoU > t (strict). AUC = arithmetic mean of the sampled values.
  - Precision: 51 pixel thresholds 0..50, a frame counts when
    center error <= t. The scalar is the value at 20 px.
  - Normalized precision: 51 thresholds 0..0.5, frame counts when
    normalized center error <= t. AUC = mean of values.
  - Frames whose ground truth is absent are excluded from all three curves;
    the excluded count is always reported.
  - AP: predictions sorted globally by descending score (stable), greedy
    per-image matching against unmatched ground truth at IoU >= iou_thr,
    all-point interpolated area under the precision envelope.

All computations are pure: same inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEvaluationError, InvalidInputError, MeasurementError
from .geometry import Box, center_error, iou, normalized_center_error

__all__ = [
    "Curve",
    "PRCurve",
    "TrackingSummary",
    "TrackingResult",
    "DetectionSummary",
    "success_thresholds",
    "precision_thresholds",
    "norm_precision_thresholds",
    "map_default_thresholds",
    "success_curve",
    "precision_curve",
    "norm_precision_curve",
    "evaluate_tracking",
    "mean_curve",
    "detection_ap",
    "detection_map",
    "throughput_fps",
]


def success_thresholds() -> np.ndarray:
    """21 evenly spaced IoU thresholds 0.00, 0.05, ..., 1.00."""
    return np.arange(21) / 20.0


def precision_thresholds() -> np.ndarray:
    """51 pixel thresholds 0, 1, ..., 50."""
    return np.arange(51, dtype=np.float64)


def norm_precision_thresholds() -> np.ndarray:
    """51 evenly spaced thresholds 0.00, 0.01, ..., 0.50."""
    return np.arange(51) / 100.0


def map_default_thresholds() -> list[float]:
    """COCO-style IoU threshold set 0.50:0.05:0.95."""
    return [(50 + 5 * i) / 100.0 for i in range(10)]


@dataclass(frozen=True)
class Curve:
    """Threshold-indexed metric curve; thresholds strictly increasing,
    values in [0, 1]."""

    thresholds: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.values):
            raise InvalidInputError("curve thresholds/values length mismatch")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise InvalidInputError("curve thresholds must be strictly increasing")
        if any(not (0.0 <= v <= 1.0) for v in self.values):
            raise InvalidInputError("curve values must lie in [0, 1]")

    @property
    def auc(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class PRCurve:
    """Precision-recall points of score-ranked detections, in rank order."""

    recalls: tuple[float, ...]
    precisions: tuple[float, ...]


@dataclass(frozen=True)
class TrackingSummary:
    success_auc: float
    precision_at_20: float
    norm_precision_auc: float


@dataclass(frozen=True)
class TrackingResult:
    """All three tracking curves plus the scalar summary for one result set."""

    summary: TrackingSummary
    success: Curve
    precision: Curve
    norm_precision: Curve
    n_evaluated: int
    n_excluded: int


@dataclass(frozen=True)
class DetectionSummary:
    """AP per IoU threshold plus their mean; fps is attached by the driver
    after timing and is None for pure metric computations."""

    ap_per_iou: dict[float, float] = field(default_factory=dict)
    map_score: float = 0.0
    fps: float | None = None


def _present_pairs(results):
    pairs = [(p, g) for p, g in results if g is not None]
    if not pairs:
        raise EmptyEvaluationError("no frames with present ground truth")
    return pairs


def success_curve(results, thresholds=None) -> tuple[Curve, float]:
    """Fraction of evaluated frames with IoU strictly above each threshold.

    ``results`` is a list of (predicted Box, ground-truth Box or None);
    absent-GT frames are excluded. Returns (curve, AUC).
    """
    thr = success_thresholds() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    pairs = _present_pairs(results)
    ious = np.array([iou(p, g) for p, g in pairs])
    values = np.array([np.mean(ious > t) for t in thr])
    curve = Curve(tuple(thr.tolist()), tuple(values.tolist()))
    return curve, curve.auc


def precision_curve(results, thresholds=None) -> tuple[Curve, float]:
    """Fraction of frames whose center error is within each pixel threshold.

    Returns (curve, precision at 20 px).
    """
    thr = precision_thresholds() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    pairs = _present_pairs(results)
    errs = np.array([center_error(p, g) for p, g in pairs])
    values = np.array([np.mean(errs <= t) for t in thr])
    curve = Curve(tuple(thr.tolist()), tuple(values.tolist()))
    at20 = np.searchsorted(thr, 20.0)
    if at20 >= len(thr) or thr[at20] != 20.0:
        raise InvalidInputError("precision thresholds must include 20 px")
    return curve, float(values[at20])


def norm_precision_curve(results, thresholds=None) -> tuple[Curve, float]:
    """Precision over center error normalized by ground-truth dimensions,
    thresholds spanning [0, 0.5]. Returns (curve, AUC)."""
    thr = norm_precision_thresholds() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    pairs = _present_pairs(results)
    errs = np.array([normalized_center_error(p, g) for p, g in pairs])
    values = np.array([np.mean(errs <= t) for t in thr])
    curve = Curve(tuple(thr.tolist()), tuple(values.tolist()))
    return curve, curve.auc


def evaluate_tracking(results) -> TrackingResult:
    """Compute all three tracking curves over one result set."""
    n_excluded = sum(1 for _, g in results if g is None)
    succ, succ_auc = success_curve(results)
    prec, prec20 = precision_curve(results)
    nprec, nprec_auc = norm_precision_curve(results)
    return TrackingResult(
        summary=TrackingSummary(succ_auc, prec20, nprec_auc),
        success=succ,
        precision=prec,
        norm_precision=nprec,
        n_evaluated=len(results) - n_excluded,
        n_excluded=n_excluded,
    )


def mean_curve(curves: list[Curve]) -> Curve:
    """Equal-weight average of curves sharing one threshold grid. Used to
    aggregate per-sequence curves into an overall plot."""
    if not curves:
        raise EmptyEvaluationError("no curves to average")
    thr = curves[0].thresholds
    for c in curves[1:]:
        if c.thresholds != thr:
            raise InvalidInputError("cannot average curves on different grids")
    stacked = np.array([c.values for c in curves])
    return Curve(thr, tuple(np.mean(stacked, axis=0).tolist()))


def detection_ap(predictions, gts, iou_thr: float) -> tuple[float, PRCurve]:
    """All-point interpolated average precision at one IoU threshold.

    ``predictions``: per-image lists of ScoredBox-like objects (``.box``,
    ``.score``). ``gts``: per-image lists of Box. A prediction is a true
    positive when its IoU with some still-unmatched ground-truth box of the
    same image is >= iou_thr (the highest-IoU unmatched one is consumed).
    """
    if len(predictions) != len(gts):
        raise InvalidInputError("predictions/gts image count mismatch")
    n_gt = sum(len(g) for g in gts)
    if n_gt == 0:
        raise EmptyEvaluationError("no ground-truth objects")

    flat = []  # (image index, prediction) in input order
    for img_idx, preds in enumerate(predictions):
        for p in preds:
            flat.append((img_idx, p))
    if not flat:
        return 0.0, PRCurve((), ())

    scores = np.array([p.score for _, p in flat])
    order = np.argsort(-scores, kind="stable")  # ties keep input order

    matched = [np.zeros(len(g), dtype=bool) for g in gts]
    tp = np.zeros(len(flat), dtype=np.float64)
    for rank, idx in enumerate(order):
        img_idx, pred = flat[idx]
        best_iou, best_gt = 0.0, -1
        for gi, gbox in enumerate(gts[img_idx]):
            if matched[img_idx][gi]:
                continue
            ov = iou(pred.box, gbox)
            if ov > best_iou:
                best_iou, best_gt = ov, gi
        if best_gt >= 0 and best_iou >= iou_thr:
            matched[img_idx][best_gt] = True
            tp[rank] = 1.0

    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(flat) + 1, dtype=np.float64)
    precisions = cum_tp / ranks
    recalls = cum_tp / n_gt
    pr = PRCurve(tuple(recalls.tolist()), tuple(precisions.tolist()))

    # All-point interpolation: area under the running-max precision envelope.
    mrec = np.concatenate(([0.0], recalls, [1.0]))
    mpre = np.concatenate(([0.0], precisions, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    changed = np.where(mrec[1:] != mrec[:-1])[0]
    ap = float(np.sum((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]))
    return ap, pr


def detection_map(predictions, gts, thresholds=None) -> tuple[DetectionSummary, dict[float, PRCurve]]:
    """AP at each IoU threshold in the set, plus their mean (the mAP).

    Default set is 0.50:0.05:0.95; pass a single-element set such as [0.5]
    to reproduce single-threshold P-R figure settings.
    """
    thrs = map_default_thresholds() if thresholds is None else list(thresholds)
    if not thrs:
        raise InvalidInputError("empty mAP threshold set")
    ap_per_iou: dict[float, float] = {}
    curves: dict[float, PRCurve] = {}
    for t in thrs:
        ap, pr = detection_ap(predictions, gts, t)
        ap_per_iou[t] = ap
        curves[t] = pr
    map_score = math.fsum(ap_per_iou.values()) / len(ap_per_iou)
    return DetectionSummary(ap_per_iou=ap_per_iou, map_score=map_score), curves


def throughput_fps(n_tasks: int, duration_seconds: float) -> float:
    """Tasks per second of wall-clock time over the measured phase."""
    if n_tasks < 1:
        raise MeasurementError("need at least one timed task")
    if duration_seconds <= 0.0:
        raise MeasurementError("non-positive measured duration")
    return n_tasks / duration_seconds
