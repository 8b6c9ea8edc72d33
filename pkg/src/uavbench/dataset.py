"""Dataset model, ingestion and statistics.

Canonical on-disk layout::

    <root>/
      detection/
        train/  annotations.jsonl  + images (paths relative to the split dir)
        test/   ...
        val/    ...
      tracking/
        <sequence>/
          groundtruth.txt          one line per frame: "x,y,w,h" or "absent"
          img/                     frame images, sorted by filename

Detection annotations are line-delimited JSON records::

    {"image": "images/0001.jpg", "size": [H, W], "objects": [[x,y,w,h], ...]}

Image dimensions are read from the image files at ingestion (header-only
read), not trusted from annotation records; mismatches are reported on the
index's warning channel. For tracking sequences the frame-0 size is used
for the whole sequence (sequences are constant-resolution as released).

Ingestion is safe to parallelize across files; the resulting index is
immutable. Statistics are pure folds over it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .errors import (
    DatasetError,
    EmptyDatasetError,
    InvalidBoxError,
    InvalidInputError,
    MissingSplitError,
)
from .geometry import Box

logger = logging.getLogger(__name__)

SPLITS = ("detection-train", "detection-test", "detection-val", "tracking")
ABSENT_TOKEN = "absent"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

__all__ = [
    "SPLITS",
    "ImageAnnotation",
    "Frame",
    "Sequence",
    "DatasetIndex",
    "AttributeReport",
    "DatasetReport",
    "read_image_size",
    "load_dataset",
    "load_sequence",
    "parse_tracking_gt",
    "save_tracking_gt",
    "save_detection_annotations",
    "read_otb_groundtruth",
    "import_coco_detection",
    "area_ratio",
    "aspect_ratio",
    "relative_center",
    "attribute_report",
]


@dataclass(frozen=True)
class ImageAnnotation:
    """Detection ground truth for one image (may hold multiple objects)."""

    image_path: Path
    image_size: tuple[int, int]  # (height, width)
    objects: tuple[Box, ...]


@dataclass(frozen=True)
class Frame:
    image_path: Path
    gt: Box | None  # None when the target is out of view


@dataclass(frozen=True)
class Sequence:
    """Tracking ground truth: ordered frames, frame 0 must have a box."""

    name: str
    frames: tuple[Frame, ...]
    image_size: tuple[int, int]  # (height, width), read from frame 0

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def initial_gt(self) -> Box:
        return self.frames[0].gt


@dataclass(frozen=True)
class DatasetIndex:
    split: str
    entries: tuple  # ImageAnnotation for detection splits, Sequence for tracking
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class AttributeReport:
    """Aggregate attributes of one object population (a split or sequence)."""

    object_count: int
    image_size_max: tuple[int, int]
    image_size_min: tuple[int, int]
    area_ratio_max: float
    area_ratio_avg: float
    area_ratio_min: float
    aspect_ratio_max: float
    aspect_ratio_avg: float
    aspect_ratio_min: float


@dataclass(frozen=True)
class DatasetReport:
    """Per-row attribute reports plus raw per-object values for the
    histogram and scatter exports."""

    split: str
    rows: tuple[tuple[str, AttributeReport], ...]  # ends with ("All", overall)
    overall: AttributeReport
    area_ratios: tuple[float, ...]
    aspect_ratios: tuple[float, ...]
    centers: tuple[tuple[float, float], ...]


# ---------------------------------------------------------------------------
# ingestion


def read_image_size(path) -> tuple[int, int]:
    """(height, width) from the image header, without decoding pixels."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError("referenced image does not exist", path=path)
    try:
        with Image.open(path) as im:
            w, h = im.size
    except Exception as exc:
        raise DatasetError(f"unreadable image: {exc}", path=path) from exc
    return (h, w)


def _parse_gt_line(text: str, path, line_no: int) -> Box | None:
    text = text.strip()
    if text == ABSENT_TOKEN:
        return None
    parts = text.split(",")
    if len(parts) != 4:
        raise DatasetError(f"expected 'x,y,w,h' or '{ABSENT_TOKEN}', got {text!r}",
                           path=path, line=line_no)
    try:
        x, y, w, h = (float(p) for p in parts)
    except ValueError as exc:
        raise DatasetError(f"non-numeric coordinate in {text!r}", path=path, line=line_no) from exc
    if not all(math.isfinite(v) for v in (x, y, w, h)) or w <= 0 or h <= 0:
        raise DatasetError(f"degenerate box {text!r}", path=path, line=line_no)
    return Box(x, y, w, h)


def parse_tracking_gt(path) -> list[Box | None]:
    """Parse a canonical tracking ground-truth file, one entry per frame."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError("ground-truth file missing", path=path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            out.append(_parse_gt_line(line, path, line_no))
    return out


def save_tracking_gt(gts, path) -> None:
    """Write boxes (or None for absent frames) in the canonical line format."""
    lines = []
    for g in gts:
        if g is None:
            lines.append(ABSENT_TOKEN)
        else:
            lines.append(f"{g.x!r},{g.y!r},{g.w!r},{g.h!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sorted_frame_files(img_dir: Path) -> list[Path]:
    return sorted(p for p in img_dir.iterdir()
                  if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def load_sequence(seq_dir, name: str | None = None) -> Sequence:
    """Load one canonical tracking sequence directory."""
    seq_dir = Path(seq_dir)
    name = name or seq_dir.name
    img_dir = seq_dir / "img"
    if not img_dir.is_dir():
        raise DatasetError("sequence has no img/ directory", path=seq_dir)
    frames = _sorted_frame_files(img_dir)
    gts = parse_tracking_gt(seq_dir / "groundtruth.txt")
    if len(gts) != len(frames):
        raise DatasetError(
            f"{len(frames)} frames but {len(gts)} annotation lines",
            path=seq_dir / "groundtruth.txt")
    if not frames:
        raise DatasetError("sequence has no frames", path=seq_dir)
    if gts[0] is None:
        raise DatasetError("frame 0 must have a present ground-truth box",
                           path=seq_dir / "groundtruth.txt", line=1)
    size = read_image_size(frames[0])
    return Sequence(
        name=name,
        frames=tuple(Frame(p, g) for p, g in zip(frames, gts)),
        image_size=size,
    )


def _load_detection_split(split_dir: Path) -> tuple[tuple[ImageAnnotation, ...], tuple[str, ...]]:
    ann_path = split_dir / "annotations.jsonl"
    if not ann_path.is_file():
        raise MissingSplitError("no annotations.jsonl in split", path=split_dir)
    entries = []
    warnings = []
    with open(ann_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed record: {exc}", path=ann_path, line=line_no) from exc
            try:
                rel = rec["image"]
                rec_h, rec_w = rec["size"]
                raw_objects = rec["objects"]
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"record missing image/size/objects: {exc}",
                                   path=ann_path, line=line_no) from exc
            image_path = split_dir / rel
            size = read_image_size(image_path)
            if size != (rec_h, rec_w):
                msg = (f"{rel}: annotated size {(rec_h, rec_w)} != actual {size}; "
                       "using actual")
                warnings.append(msg)
                logger.warning("%s: %s", ann_path, msg)
            objects = []
            for obj in raw_objects:
                if len(obj) != 4:
                    raise DatasetError(f"object is not [x,y,w,h]: {obj!r}",
                                       path=ann_path, line=line_no)
                x, y, w, h = (float(v) for v in obj)
                if w <= 0 or h <= 0:
                    raise DatasetError(f"degenerate object box {obj!r}",
                                       path=ann_path, line=line_no)
                objects.append(Box(x, y, w, h))
            entries.append(ImageAnnotation(image_path, size, tuple(objects)))
    if not entries:
        raise MissingSplitError("split has no annotated images", path=split_dir)
    return tuple(entries), tuple(warnings)


def load_dataset(root, split: str) -> DatasetIndex:
    """Materialize one split into an immutable index.

    ``split`` is one of ``detection-train``, ``detection-test``,
    ``detection-val``, ``tracking``. Every referenced image is verified
    to exist. Raises MissingSplitError / DatasetError with path and line
    context on any inconsistency.
    """
    if split not in SPLITS:
        raise InvalidInputError(f"unknown split {split!r}; expected one of {SPLITS}")
    root = Path(root)
    if split == "tracking":
        track_dir = root / "tracking"
        if not track_dir.is_dir():
            raise MissingSplitError("tracking directory missing", path=track_dir)
        seq_dirs = sorted(p for p in track_dir.iterdir() if p.is_dir())
        if not seq_dirs:
            raise MissingSplitError("tracking split holds no sequences", path=track_dir)
        sequences = tuple(load_sequence(d) for d in seq_dirs)
        return DatasetIndex(split=split, entries=sequences)
    subset = split.split("-", 1)[1]
    split_dir = root / "detection" / subset
    if not split_dir.is_dir():
        raise MissingSplitError(f"detection split {subset!r} missing", path=split_dir)
    entries, warnings = _load_detection_split(split_dir)
    return DatasetIndex(split=split, entries=entries, warnings=warnings)


def save_detection_annotations(entries, split_dir) -> None:
    """Write canonical annotations.jsonl for a detection split; image paths
    are stored relative to ``split_dir``."""
    split_dir = Path(split_dir)
    split_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for e in entries:
        rec = {
            "image": Path(e.image_path).relative_to(split_dir).as_posix(),
            "size": [e.image_size[0], e.image_size[1]],
            "objects": [[b.x, b.y, b.w, b.h] for b in e.objects],
        }
        lines.append(json.dumps(rec, sort_keys=True))
    (split_dir / "annotations.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# third-party importers


def read_otb_groundtruth(path) -> list[Box | None]:
    """Parse an OTB/LaSOT-style groundtruth_rect.txt: x,y,w,h per line,
    separated by commas, tabs or whitespace; NaN or zero-size rows mean
    the target is absent."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            for sep in (",", "\t"):
                if sep in text:
                    parts = text.split(sep)
                    break
            else:
                parts = text.split()
            if len(parts) != 4:
                raise DatasetError(f"expected 4 fields, got {text!r}", path=path, line=line_no)
            vals = [float(p) for p in parts]
            if any(math.isnan(v) for v in vals) or vals[2] <= 0 or vals[3] <= 0:
                out.append(None)
            else:
                out.append(Box(*vals))
    return out


def import_coco_detection(json_path, images_root) -> list[ImageAnnotation]:
    """Convert a COCO-style instances JSON into ImageAnnotation entries.

    All categories are kept (the harness is single-class). Images without
    annotations are included with empty object lists.
    """
    json_path = Path(json_path)
    images_root = Path(images_root)
    with open(json_path, encoding="utf-8") as fh:
        data = json.load(fh)
    by_image: dict[int, list[Box]] = {img["id"]: [] for img in data.get("images", [])}
    for ann in data.get("annotations", []):
        x, y, w, h = ann["bbox"]
        if w <= 0 or h <= 0:
            continue
        by_image.setdefault(ann["image_id"], []).append(Box(float(x), float(y), float(w), float(h)))
    entries = []
    for img in data.get("images", []):
        path = images_root / img["file_name"]
        size = read_image_size(path)
        entries.append(ImageAnnotation(path, size, tuple(by_image[img["id"]])))
    return entries


# ---------------------------------------------------------------------------
# statistics


def area_ratio(obj: Box, image_size) -> float:
    """Object area divided by full image area."""
    obj.validate()
    h, w = image_size
    if h <= 0 or w <= 0:
        raise InvalidInputError(f"degenerate image size {image_size!r}")
    return (obj.w * obj.h) / (w * h)


def aspect_ratio(obj: Box) -> float:
    """Orientation-free aspect ratio max(w, h) / min(w, h), always >= 1."""
    if obj.w <= 0 or obj.h <= 0:
        raise InvalidBoxError(f"degenerate box {obj.as_tuple()}")
    return max(obj.w, obj.h) / min(obj.w, obj.h)


def relative_center(obj: Box, image_size) -> tuple[float, float]:
    """Box center in image-relative coordinates; not clamped, so centers
    outside the frame land outside [0, 1]."""
    obj.validate()
    h, w = image_size
    if h <= 0 or w <= 0:
        raise InvalidInputError(f"degenerate image size {image_size!r}")
    cx, cy = obj.center
    return (cx / w, cy / h)


def _iter_objects(entry):
    """Yield (box, image_size) for every annotated object in an entry."""
    if isinstance(entry, Sequence):
        for frame in entry.frames:
            if frame.gt is not None:
                yield frame.gt, entry.image_size
    else:
        for box in entry.objects:
            yield box, entry.image_size


def _aggregate(objects) -> AttributeReport:
    """Min/avg/max fold over (box, image_size) pairs. Averages use fsum so
    the result does not depend on accumulation order."""
    areas, aspects, sizes = [], [], []
    for box, size in objects:
        areas.append(area_ratio(box, size))
        aspects.append(aspect_ratio(box))
        sizes.append(size)
    if not areas:
        raise EmptyDatasetError("no annotated objects to aggregate")
    n = len(areas)
    return AttributeReport(
        object_count=n,
        image_size_max=max(sizes, key=lambda s: s[0] * s[1]),
        image_size_min=min(sizes, key=lambda s: s[0] * s[1]),
        area_ratio_max=max(areas),
        area_ratio_avg=math.fsum(areas) / n,
        area_ratio_min=min(areas),
        aspect_ratio_max=max(aspects),
        aspect_ratio_avg=math.fsum(aspects) / n,
        aspect_ratio_min=min(aspects),
    )


def attribute_report(index: DatasetIndex) -> DatasetReport:
    """Aggregate object statistics for one split.

    For the tracking split the report holds one row per sequence plus a
    final "All" row; detection splits report a single "All" row. Raw
    per-object area ratios, aspect ratios and relative centers are carried
    along for the histogram and scatter exports.
    """
    if not index.entries:
        raise EmptyDatasetError(f"empty index for split {index.split!r}")
    all_objects = []
    for entry in index.entries:
        all_objects.extend(_iter_objects(entry))
    overall = _aggregate(all_objects)
    rows = []
    if index.split == "tracking":
        for seq in index.entries:
            rows.append((seq.name, _aggregate(_iter_objects(seq))))
    rows.append(("All", overall))
    return DatasetReport(
        split=index.split,
        rows=tuple(rows),
        overall=overall,
        area_ratios=tuple(area_ratio(b, s) for b, s in all_objects),
        aspect_ratios=tuple(aspect_ratio(b) for b, _ in all_objects),
        centers=tuple(relative_center(b, s) for b, s in all_objects),
    )
