"""Deterministic synthetic datasets for tests and desk-scale runs.

All fixtures are written in the canonical dataset layout so the normal
loaders and CLI commands work on them unchanged. Every random choice flows
from one explicit seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import save_tracking_gt, save_detection_annotations, ImageAnnotation
from .geometry import Box

BACKGROUND_GRAY = 128


def write_image(path, array: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(array, dtype=np.uint8), mode="L").save(path)


def write_noise_image(path, image_size, seed: int) -> None:
    """Uniform random grayscale frame (for confidence-collapse tests)."""
    h, w = image_size
    rng = np.random.default_rng(seed)
    write_image(path, rng.integers(0, 256, size=(h, w), dtype=np.uint8))


def _patch(rng, h: int, w: int) -> np.ndarray:
    """High-variance texture patch that NCC locks onto."""
    return rng.integers(0, 256, size=(h, w), dtype=np.uint8)


def _plant(frame: np.ndarray, patch: np.ndarray, x: int, y: int) -> None:
    ph, pw = patch.shape
    frame[y:y + ph, x:x + pw] = patch


@dataclass(frozen=True)
class SequenceFixture:
    sequence_dir: Path
    gt_boxes: tuple[Box, ...]
    template_box: Box          # frame-0 target box
    frame0: Path


def make_identity_sequence(root, name: str = "identity", n_frames: int = 3,
                           image_size=(120, 160), box: Box = Box(60, 40, 24, 20),
                           seed: int = 0) -> SequenceFixture:
    """Sequence whose frames are all identical to frame 0."""
    root = Path(root)
    seq_dir = root / "tracking" / name
    rng = np.random.default_rng(seed)
    h, w = image_size
    frame = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
    for t in range(n_frames):
        write_image(seq_dir / "img" / f"{t:04d}.png", frame)
    gts = [box] * n_frames
    save_tracking_gt(gts, seq_dir / "groundtruth.txt")
    return SequenceFixture(seq_dir, tuple(gts), box, seq_dir / "img" / "0000.png")


@dataclass(frozen=True)
class DriftFixture:
    sequence_dir: Path
    gt_boxes: tuple[Box, ...]
    template_box: Box
    frame0: Path
    script_path: Path          # scripted-tracker steps
    switch_frame: int
    wrong_box: Box

    @property
    def detector_spec(self) -> str:
        b = self.template_box
        return f"template:{self.frame0}:{b.x},{b.y},{b.w},{b.h}"

    @property
    def tracker_spec(self) -> str:
        return f"scripted:{self.script_path}"


def make_drift_fixture(root, n_frames: int = 100, switch_frame: int = 50,
                       image_size=(120, 160), patch_size=(16, 20),
                       seed: int = 0) -> DriftFixture:
    """Tracking sequence with a textured patch moving over a flat background,
    plus a scripted tracker that follows the target confidently (score 0.95)
    until ``switch_frame`` and then reports a wrong corner box with score
    0.3. A template detector built from frame 0 re-finds the patch exactly,
    so fusion recovers every late frame.
    """
    root = Path(root)
    seq_dir = root / "tracking" / "drift"
    rng = np.random.default_rng(seed)
    h, w = image_size
    ph, pw = patch_size
    patch = _patch(rng, ph, pw)

    gts = []
    denom = max(1, n_frames - 1)
    for t in range(n_frames):
        x = 40 + round(60 * t / denom)
        y = 30 + round(40 * t / denom)
        frame = np.full((h, w), BACKGROUND_GRAY, dtype=np.uint8)
        _plant(frame, patch, x, y)
        write_image(seq_dir / "img" / f"{t:04d}.png", frame)
        gts.append(Box(float(x), float(y), float(pw), float(ph)))
    save_tracking_gt(gts, seq_dir / "groundtruth.txt")

    wrong = Box(2.0, 2.0, float(pw), float(ph))
    steps = []
    for t in range(1, n_frames):
        if t < switch_frame:
            b, s = gts[t], 0.95
        else:
            b, s = wrong, 0.3
        steps.append([b.x, b.y, b.w, b.h, s])
    script_path = seq_dir / "tracker_script.json"
    script_path.write_text(json.dumps({"steps": steps}), encoding="utf-8")

    return DriftFixture(
        sequence_dir=seq_dir,
        gt_boxes=tuple(gts),
        template_box=gts[0],
        frame0=seq_dir / "img" / "0000.png",
        script_path=script_path,
        switch_frame=switch_frame,
        wrong_box=wrong,
    )


@dataclass(frozen=True)
class DetectionFixture:
    split_dir: Path
    split: str
    template_image: Path
    template_box: Box
    n_objects: int

    @property
    def detector_spec(self) -> str:
        b = self.template_box
        return f"template:{self.template_image}:{b.x},{b.y},{b.w},{b.h}"


def make_detection_fixture(root, split: str = "test", n_images: int = 10,
                           image_size=(100, 140), patch_size=(14, 18),
                           seed: int = 0) -> DetectionFixture:
    """Detection split with 0-2 planted copies of one patch per image."""
    root = Path(root)
    split_dir = root / "detection" / split
    rng = np.random.default_rng(seed)
    h, w = image_size
    ph, pw = patch_size
    patch = _patch(rng, ph, pw)

    template_image = split_dir / "template.png"
    write_image(template_image, patch)

    entries = []
    total = 0
    for i in range(n_images):
        frame = np.full((h, w), BACKGROUND_GRAY, dtype=np.uint8)
        n_objects = int(rng.integers(0, 3))
        if i == 0:
            n_objects = max(1, n_objects)  # the split always has ground truth
        boxes = []
        # non-overlapping slots keep the planted copies disjoint
        slots = [(10, 10), (w - pw - 10, h - ph - 10)]
        for k in range(n_objects):
            x0, y0 = slots[k]
            x = x0 + int(rng.integers(0, 6))
            y = y0 + int(rng.integers(0, 6))
            _plant(frame, patch, x, y)
            boxes.append(Box(float(x), float(y), float(pw), float(ph)))
        total += n_objects
        rel = f"images/{i:04d}.png"
        write_image(split_dir / rel, frame)
        entries.append(ImageAnnotation(split_dir / rel, (h, w), tuple(boxes)))
    save_detection_annotations(entries, split_dir)
    return DetectionFixture(split_dir, split, template_image,
                            Box(0.0, 0.0, float(pw), float(ph)), total)
