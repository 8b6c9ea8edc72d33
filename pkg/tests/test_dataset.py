import json
import math

import numpy as np
import pytest

from uavbench.dataset import (
    ImageAnnotation,
    Sequence,
    DatasetIndex,
    area_ratio,
    aspect_ratio,
    attribute_report,
    import_coco_detection,
    load_dataset,
    load_sequence,
    parse_tracking_gt,
    read_otb_groundtruth,
    relative_center,
    save_detection_annotations,
    save_tracking_gt,
)
from uavbench.errors import (
    DatasetError,
    EmptyDatasetError,
    InvalidBoxError,
    InvalidInputError,
    MissingSplitError,
)
from uavbench.fixtures import write_image
from uavbench.geometry import Box

from helpers import random_box


def _blank(path, h=40, w=60):
    write_image(path, np.zeros((h, w), dtype=np.uint8))


# --- tracking ingestion -----------------------------------------------------

def _make_seq(root, name="seq01", gts=None):
    seq_dir = root / "tracking" / name
    gts = gts if gts is not None else [Box(1, 2, 5, 6), Box(2, 3, 5, 6), None]
    for t in range(len(gts)):
        _blank(seq_dir / "img" / f"{t:03d}.png")
    save_tracking_gt(gts, seq_dir / "groundtruth.txt")
    return seq_dir, gts


def test_load_tracking_split(tmp_path):
    _make_seq(tmp_path, "seq01")
    _make_seq(tmp_path, "seq02", gts=[Box(0, 0, 4, 4)])
    index = load_dataset(tmp_path, "tracking")
    assert index.split == "tracking"
    assert [s.name for s in index.entries] == ["seq01", "seq02"]
    seq = index.entries[0]
    assert len(seq) == 3
    assert seq.frames[2].gt is None
    assert seq.initial_gt == Box(1, 2, 5, 6)
    assert seq.image_size == (40, 60)


def test_gt_roundtrip(tmp_path):
    gts = [Box(1.5, -2.0, 3.25, 4.0), None, Box(0, 0, 1, 1)]
    save_tracking_gt(gts, tmp_path / "gt.txt")
    assert parse_tracking_gt(tmp_path / "gt.txt") == gts


def test_missing_root_and_empty_dir(tmp_path):
    with pytest.raises(MissingSplitError):
        load_dataset(tmp_path / "nope", "tracking")
    (tmp_path / "tracking").mkdir()
    with pytest.raises(MissingSplitError):
        load_dataset(tmp_path, "tracking")


def test_unknown_split(tmp_path):
    with pytest.raises(InvalidInputError):
        load_dataset(tmp_path, "detection-weird")


def test_frame_annotation_count_mismatch(tmp_path):
    seq_dir, _ = _make_seq(tmp_path)
    (seq_dir / "img" / "999.png").unlink(missing_ok=True)
    _blank(seq_dir / "img" / "003.png")  # extra frame, 4 images vs 3 lines
    with pytest.raises(DatasetError, match="annotation lines"):
        load_sequence(seq_dir)


def test_malformed_gt_line_reports_location(tmp_path):
    seq_dir, _ = _make_seq(tmp_path)
    (seq_dir / "groundtruth.txt").write_text("1,2,5,6\nbogus\n1,2,5,6\n")
    with pytest.raises(DatasetError) as exc:
        load_sequence(seq_dir)
    assert exc.value.line == 2
    assert "groundtruth.txt" in str(exc.value)


def test_frame0_must_have_box(tmp_path):
    seq_dir, _ = _make_seq(tmp_path)
    (seq_dir / "groundtruth.txt").write_text("absent\n1,2,5,6\n1,2,5,6\n")
    with pytest.raises(DatasetError, match="frame 0"):
        load_sequence(seq_dir)


def test_degenerate_box_rejected(tmp_path):
    seq_dir, _ = _make_seq(tmp_path)
    (seq_dir / "groundtruth.txt").write_text("1,2,0,6\n1,2,5,6\n1,2,5,6\n")
    with pytest.raises(DatasetError, match="degenerate"):
        load_sequence(seq_dir)


# --- detection ingestion ----------------------------------------------------

def _make_detection_split(root, subset="train"):
    split_dir = root / "detection" / subset
    entries = []
    specs = [((40, 60), [Box(1, 2, 10, 20)]),
             ((40, 60), [Box(0, 0, 5, 5), Box(20, 10, 8, 4)]),
             ((30, 30), [])]
    for i, (size, objs) in enumerate(specs):
        rel = f"images/{i:03d}.png"
        _blank(split_dir / rel, *size)
        entries.append(ImageAnnotation(split_dir / rel, size, tuple(objs)))
    save_detection_annotations(entries, split_dir)
    return split_dir, entries


def test_load_detection_split(tmp_path):
    _, entries = _make_detection_split(tmp_path)
    index = load_dataset(tmp_path, "detection-train")
    assert len(index.entries) == 3
    assert index.entries[1].objects == entries[1].objects
    assert index.entries[0].image_size == (40, 60)
    assert index.warnings == ()


def test_detection_roundtrip_is_idempotent(tmp_path):
    split_dir, _ = _make_detection_split(tmp_path)
    first = load_dataset(tmp_path, "detection-train")
    save_detection_annotations(first.entries, split_dir)
    second = load_dataset(tmp_path, "detection-train")
    assert first.entries == second.entries


def test_detection_size_mismatch_warns(tmp_path):
    split_dir, _ = _make_detection_split(tmp_path)
    lines = (split_dir / "annotations.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    rec["size"] = [999, 999]
    lines[0] = json.dumps(rec)
    (split_dir / "annotations.jsonl").write_text("\n".join(lines) + "\n")
    index = load_dataset(tmp_path, "detection-train")
    assert len(index.warnings) == 1
    assert index.entries[0].image_size == (40, 60)  # actual size wins


def test_detection_missing_image(tmp_path):
    split_dir, _ = _make_detection_split(tmp_path)
    (split_dir / "images" / "000.png").unlink()
    with pytest.raises(DatasetError, match="does not exist"):
        load_dataset(tmp_path, "detection-train")


def test_detection_malformed_record(tmp_path):
    split_dir, _ = _make_detection_split(tmp_path)
    with open(split_dir / "annotations.jsonl", "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(DatasetError) as exc:
        load_dataset(tmp_path, "detection-train")
    assert exc.value.line == 4


# --- importers ---------------------------------------------------------------

@pytest.mark.parametrize("sep", [",", "\t", " "])
def test_otb_groundtruth_separators(tmp_path, sep):
    (tmp_path / "gt.txt").write_text(f"1{sep}2{sep}3{sep}4\nNaN{sep}NaN{sep}NaN{sep}NaN\n")
    out = read_otb_groundtruth(tmp_path / "gt.txt")
    assert out == [Box(1, 2, 3, 4), None]


def test_coco_import(tmp_path):
    _blank(tmp_path / "img0.png")
    _blank(tmp_path / "img1.png")
    coco = {
        "images": [{"id": 1, "file_name": "img0.png"},
                   {"id": 2, "file_name": "img1.png"}],
        "annotations": [
            {"image_id": 1, "bbox": [1, 2, 3, 4]},
            {"image_id": 1, "bbox": [5, 6, 7, 8]},
        ],
    }
    (tmp_path / "coco.json").write_text(json.dumps(coco))
    entries = import_coco_detection(tmp_path / "coco.json", tmp_path)
    assert len(entries) == 2
    assert entries[0].objects == (Box(1, 2, 3, 4), Box(5, 6, 7, 8))
    assert entries[1].objects == ()


# --- statistics ---------------------------------------------------------------

def test_area_ratio_examples():
    assert area_ratio(Box(0, 0, 10, 20), (100, 200)) == 0.01
    assert area_ratio(Box(0, 0, 200, 100), (100, 200)) == 1.0
    with pytest.raises(InvalidInputError):
        area_ratio(Box(0, 0, 1, 1), (0, 100))


def test_aspect_ratio_examples():
    assert aspect_ratio(Box(0, 0, 7, 7)) == 1.0
    assert aspect_ratio(Box(0, 0, 10, 20)) == 2.0
    assert aspect_ratio(Box(0, 0, 20, 10)) == 2.0  # orientation-free
    with pytest.raises(InvalidBoxError):
        aspect_ratio(Box(0, 0, 0, 10))


def test_relative_center_examples():
    assert relative_center(Box(45, 45, 10, 10), (100, 100)) == (0.5, 0.5)
    assert relative_center(Box(0, 0, 10, 10), (100, 100)) == (0.05, 0.05)
    assert relative_center(Box(90, 0, 20, 10), (100, 100)) == (1.0, 0.05)
    with pytest.raises(InvalidInputError):
        relative_center(Box(0, 0, 1, 1), (100, 0))


def test_report_single_object():
    entry = ImageAnnotation("x.png", (100, 200), (Box(0, 0, 10, 20),))
    report = attribute_report(DatasetIndex("detection-train", (entry,)))
    r = report.overall
    assert r.object_count == 1
    assert (r.area_ratio_min, r.area_ratio_avg, r.area_ratio_max) == (0.01, 0.01, 0.01)
    assert (r.aspect_ratio_min, r.aspect_ratio_avg, r.aspect_ratio_max) == (2.0, 2.0, 2.0)
    assert report.rows == (("All", r),)


def test_report_mean_aspect():
    entry = ImageAnnotation("x.png", (100, 100),
                            (Box(0, 0, 10, 10), Box(0, 0, 10, 30)))
    r = attribute_report(DatasetIndex("detection-train", (entry,))).overall
    assert r.aspect_ratio_avg == 2.0  # mean of 1.0 and 3.0


def test_report_empty_index():
    with pytest.raises(EmptyDatasetError):
        attribute_report(DatasetIndex("detection-train", ()))


def test_tracking_report_rows_consistent(tmp_path):
    _make_seq(tmp_path, "a", gts=[Box(0, 0, 4, 8), Box(1, 1, 4, 8)])
    _make_seq(tmp_path, "b", gts=[Box(0, 0, 6, 6), None, Box(2, 2, 6, 6)])
    index = load_dataset(tmp_path, "tracking")
    report = attribute_report(index)
    names = [n for n, _ in report.rows]
    assert names == ["a", "b", "All"]
    per_seq = [r for n, r in report.rows if n != "All"]
    total = report.overall
    assert sum(r.object_count for r in per_seq) == total.object_count == 4
    assert max(r.area_ratio_max for r in per_seq) == total.area_ratio_max
    assert min(r.aspect_ratio_min for r in per_seq) == total.aspect_ratio_min
    assert len(report.centers) == total.object_count


def test_report_matches_bruteforce():
    rng = np.random.default_rng(31)
    entries = []
    boxes = []
    for i in range(20):
        size = (int(rng.integers(50, 200)), int(rng.integers(50, 200)))
        objs = tuple(random_box(rng, hi=30, max_side=20) for _ in range(int(rng.integers(1, 4))))
        entries.append(ImageAnnotation(f"{i}.png", size, objs))
        boxes.extend((b, size) for b in objs)
    report = attribute_report(DatasetIndex("detection-val", tuple(entries))).overall

    areas = [(b.w * b.h) / (s[0] * s[1]) for b, s in boxes]
    aspects = [max(b.w, b.h) / min(b.w, b.h) for b, _ in boxes]
    assert report.object_count == len(boxes)
    assert report.area_ratio_max == max(areas)
    assert report.area_ratio_min == min(areas)
    assert report.area_ratio_avg == math.fsum(areas) / len(areas)
    assert report.aspect_ratio_avg == math.fsum(aspects) / len(aspects)
    # invariant: every loaded object satisfies the ratio ranges
    assert all(0 < a <= 1 for a in areas)
    assert all(a >= 1 for a in aspects)
