"""Axis-aligned box arithmetic: IoU, center error, normalized center error.

Boxes are (x, y, w, h) reals with a top-left image origin (y grows downward).
x/y may be negative (targets partially outside the frame are representable);
w/h must be strictly positive for any box that represents a present target.
All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidBoxError

__all__ = ["Box", "iou", "center_error", "normalized_center_error"]


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixel coordinates, (x, y) = top-left corner."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def is_valid(self) -> bool:
        vals = (self.x, self.y, self.w, self.h)
        return all(math.isfinite(v) for v in vals) and self.w > 0 and self.h > 0

    def validate(self) -> "Box":
        if not self.is_valid():
            raise InvalidBoxError(f"invalid box {self.as_tuple()}")
        return self

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    @staticmethod
    def from_xyxy(x1: float, y1: float, x2: float, y2: float) -> "Box":
        return Box(x1, y1, x2 - x1, y2 - y1)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1].

    Overlap uses half-open interval semantics on real coordinates
    (overlap length = max(0, min(r1, r2) - max(l1, l2))), which agrees
    with unit-cell counting for integer-coordinate boxes.
    """
    a.validate()
    b.validate()
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def center_error(pred: Box, gt: Box) -> float:
    """Euclidean distance in pixels between the two box centers."""
    pred.validate()
    gt.validate()
    px, py = pred.center
    gx, gy = gt.center
    return math.hypot(px - gx, py - gy)


def normalized_center_error(pred: Box, gt: Box) -> float:
    """Center offset divided component-wise by the ground-truth box
    dimensions, then L2-normed. Invariant under uniform rescaling of both
    boxes, so it is unaffected by target size and image resolution.
    """
    pred.validate()
    gt.validate()
    px, py = pred.center
    gx, gy = gt.center
    return math.hypot((px - gx) / gt.w, (py - gy) / gt.h)
