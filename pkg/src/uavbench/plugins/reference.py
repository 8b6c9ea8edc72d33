"""Deterministic in-process reference plug-ins.

These are dependency-light stand-ins for the deep trackers/detectors that
attach via the external-process protocol: a multi-scale NCC tracker and a
multi-scale NCC sliding-window detector. They are deterministic (identical
inputs give bit-identical outputs) and show genuine confidence collapse
under drift, which is what the fusion engine needs exercised.
"""

from __future__ import annotations

import numpy as np

from ..errors import UninitializedTrackerError
from ..geometry import Box, iou
from . import BaseDetector, BaseTracker, ScoredBox
from .matching import crop_template, load_gray, ncc_response, peak_position, scale_template

DEFAULT_SCALES = (0.96, 1.0, 1.04)


def _clip_score(ncc: float) -> float:
    """Confidence from an NCC value: negative correlation means no
    confidence, so clip into [0, 1] rather than shifting the range (an
    affine map would give uncorrelated noise a score near 0.5)."""
    return min(1.0, max(0.0, ncc))


class NccTracker(BaseTracker):
    """Normalized cross-correlation tracker.

    The grayscale frame-0 template is searched inside a window of twice the
    previous box, at scale candidates relative to the current scale. The
    reported box follows the winning scale; the score is the clipped peak
    NCC. The template itself is never updated.
    """

    def __init__(self, scales=DEFAULT_SCALES, window_factor: float = 2.0):
        self.scales = tuple(scales)
        self.window_factor = window_factor
        self._template = None

    def init(self, image_path, box: Box) -> None:
        box.validate()
        img = load_gray(image_path)
        template = crop_template(img, box)
        # full session reset: a second init behaves like a fresh handle
        self._template = template
        th, tw = template.shape
        x0 = max(0, int(round(box.x)))
        y0 = max(0, int(round(box.y)))
        self._center = (x0 + tw / 2.0, y0 + th / 2.0)
        self._size = (float(tw), float(th))
        self._scale = 1.0

    def _current_box(self) -> Box:
        cx, cy = self._center
        w, h = self._size
        return Box(cx - w / 2.0, cy - h / 2.0, w, h)

    def track(self, image_path) -> ScoredBox:
        if self._template is None:
            raise UninitializedTrackerError("track() before init()")
        img = load_gray(image_path)
        ih, iw = img.shape
        cx, cy = self._center
        w, h = self._size
        wl = max(0, int(round(cx - self.window_factor * w / 2.0)))
        wt = max(0, int(round(cy - self.window_factor * h / 2.0)))
        wr = min(iw, int(round(cx + self.window_factor * w / 2.0)))
        wb = min(ih, int(round(cy + self.window_factor * h / 2.0)))
        window = img[wt:wb, wl:wr]

        best = None  # (ncc, x, y, tw, th, scale)
        for s in self.scales:
            tpl = scale_template(self._template, self._scale * s)
            th_s, tw_s = tpl.shape
            if th_s < 2 or tw_s < 2 or th_s > window.shape[0] or tw_s > window.shape[1]:
                continue
            dx, dy, ncc = peak_position(ncc_response(window, tpl))
            if best is None or ncc > best[0]:
                best = (ncc, wl + dx, wt + dy, float(tw_s), float(th_s), self._scale * s)
        if best is None:
            # window collapsed below every template candidate: hold position
            return ScoredBox(self._current_box(), 0.0)

        ncc, x, y, tw_s, th_s, scale = best
        box = Box(float(x), float(y), tw_s, th_s)
        self._center = box.center
        self._size = (tw_s, th_s)
        self._scale = scale
        return ScoredBox(box, _clip_score(ncc))


class TemplateDetector(BaseDetector):
    """Multi-scale NCC sliding search over the whole frame.

    Response peaks above ``score_threshold`` become candidates; candidates
    are taken greedily by descending score, suppressing any that overlap a
    kept detection at IoU above ``suppress_iou``.
    """

    def __init__(self, template: np.ndarray, score_threshold: float = 0.55,
                 suppress_iou: float = 0.3, scales=DEFAULT_SCALES,
                 max_detections: int = 50, max_candidates: int = 10000):
        self.template = np.asarray(template, dtype=np.float64)
        self.score_threshold = score_threshold
        self.suppress_iou = suppress_iou
        self.scales = tuple(scales)
        self.max_detections = max_detections
        self.max_candidates = max_candidates

    @classmethod
    def from_image(cls, image_path, box: Box, **kwargs) -> "TemplateDetector":
        """Build the template by cropping a reference image."""
        return cls(crop_template(load_gray(image_path), box), **kwargs)

    def detect(self, image_path) -> list[ScoredBox]:
        img = load_gray(image_path)
        scores, boxes = [], []
        for s in self.scales:
            tpl = scale_template(self.template, s)
            th, tw = tpl.shape
            if th < 2 or tw < 2 or th > img.shape[0] or tw > img.shape[1]:
                continue
            resp = ncc_response(img, tpl)
            ys, xs = np.nonzero(resp > self.score_threshold)
            for y, x in zip(ys.tolist(), xs.tolist()):
                scores.append(float(resp[y, x]))
                boxes.append(Box(float(x), float(y), float(tw), float(th)))
        if not scores:
            return []
        order = np.argsort(-np.asarray(scores), kind="stable")[: self.max_candidates]
        kept: list[ScoredBox] = []
        for idx in order:
            cand = boxes[idx]
            if any(iou(cand, k.box) > self.suppress_iou for k in kept):
                continue
            kept.append(ScoredBox(cand, _clip_score(scores[idx])))
            if len(kept) >= self.max_detections:
                break
        return kept
