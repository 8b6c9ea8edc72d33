"""Run-directory files: tabular exports and their loaders.

Every file the harness writes is re-parseable by the loaders here. CSVs
use a header row, LF line endings and shortest round-trip float formatting,
so identical inputs yield byte-identical files. Measured wall-clock values
live only in the run record, wrapped as {"value": v, "measured": true};
``strip_measured`` removes them for determinism comparisons.

Column orders (bit-exact contract):
  curve:     threshold,value
  pr curve:  recall,precision
  trace:     frame,source,x,y,w,h,score_t,detector_invoked,score_d,detection_count
  report:    name,object_count,image_h_max,image_w_max,image_h_min,image_w_min,
             area_ratio_max,area_ratio_avg,area_ratio_min,
             aspect_ratio_max,aspect_ratio_avg,aspect_ratio_min
  scatter:   u,v
  histogram: bin_left,bin_right,count
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dataset import AttributeReport
from .errors import DatasetError
from .geometry import Box
from .metrics import Curve, PRCurve
from .fusion import FusionTrace, TraceRow

INIT_SOURCE = "init"

TRACE_HEADER = ["frame", "source", "x", "y", "w", "h", "score_t",
                "detector_invoked", "score_d", "detection_count"]
REPORT_HEADER = ["name", "object_count", "image_h_max", "image_w_max",
                 "image_h_min", "image_w_min", "area_ratio_max", "area_ratio_avg",
                 "area_ratio_min", "aspect_ratio_max", "aspect_ratio_avg",
                 "aspect_ratio_min"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path, expected_header=None):
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty tabular file", path=path)
        if expected_header is not None and header != list(expected_header):
            raise DatasetError(f"unexpected header {header!r}", path=path, line=1)
        return header, [row for row in reader]


def write_curve(path, curve: Curve) -> None:
    write_csv(path, ["threshold", "value"], zip(curve.thresholds, curve.values))


def load_curve(path) -> Curve:
    _, rows = read_csv(path, ["threshold", "value"])
    return Curve(tuple(float(r[0]) for r in rows), tuple(float(r[1]) for r in rows))


def write_pr_curve(path, pr: PRCurve) -> None:
    write_csv(path, ["recall", "precision"], zip(pr.recalls, pr.precisions))


def load_pr_curve(path) -> PRCurve:
    _, rows = read_csv(path, ["recall", "precision"])
    return PRCurve(tuple(float(r[0]) for r in rows), tuple(float(r[1]) for r in rows))


def write_trace(path, trace: FusionTrace) -> None:
    """One row per frame; frame 0 is the ground-truth seed row."""
    b = trace.init_box
    rows = [[0, INIT_SOURCE, b.x, b.y, b.w, b.h, None, False, None, 0]]
    for r in trace.rows:
        rows.append([r.frame, r.source, r.box.x, r.box.y, r.box.w, r.box.h,
                     r.score_t, r.detector_invoked, r.score_d, r.detection_count])
    write_csv(path, TRACE_HEADER, rows)


def load_trace(path) -> FusionTrace:
    _, rows = read_csv(path, TRACE_HEADER)
    if not rows or rows[0][1] != INIT_SOURCE:
        raise DatasetError("trace must start with the frame-0 init row", path=path, line=2)
    init_box = Box(*(float(v) for v in rows[0][2:6]))
    out = []
    for row in rows[1:]:
        out.append(TraceRow(
            frame=int(row[0]),
            source=row[1],
            box=Box(*(float(v) for v in row[2:6])),
            score_t=float(row[6]),
            detector_invoked=row[7] == "true",
            score_d=None if row[8] == "" else float(row[8]),
            detection_count=int(row[9]),
        ))
    return FusionTrace(init_box, tuple(out))


def write_report(path, rows) -> None:
    """``rows`` is a list of (name, AttributeReport)."""
    out = []
    for name, r in rows:
        out.append([name, r.object_count,
                    r.image_size_max[0], r.image_size_max[1],
                    r.image_size_min[0], r.image_size_min[1],
                    r.area_ratio_max, r.area_ratio_avg, r.area_ratio_min,
                    r.aspect_ratio_max, r.aspect_ratio_avg, r.aspect_ratio_min])
    write_csv(path, REPORT_HEADER, out)


def load_report(path):
    _, rows = read_csv(path, REPORT_HEADER)
    out = []
    for row in rows:
        out.append((row[0], AttributeReport(
            object_count=int(row[1]),
            image_size_max=(int(row[2]), int(row[3])),
            image_size_min=(int(row[4]), int(row[5])),
            area_ratio_max=float(row[6]),
            area_ratio_avg=float(row[7]),
            area_ratio_min=float(row[8]),
            aspect_ratio_max=float(row[9]),
            aspect_ratio_avg=float(row[10]),
            aspect_ratio_min=float(row[11]),
        )))
    return out


def write_scatter(path, centers) -> None:
    write_csv(path, ["u", "v"], centers)


def load_scatter(path):
    _, rows = read_csv(path, ["u", "v"])
    return [(float(r[0]), float(r[1])) for r in rows]


def write_histogram(path, values, bins: int, lo: float, hi: float) -> None:
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64),
                                 bins=bins, range=(lo, hi))
    rows = [[edges[i], edges[i + 1], int(counts[i])] for i in range(len(counts))]
    write_csv(path, ["bin_left", "bin_right", "count"], rows)


def load_histogram(path):
    _, rows = read_csv(path, ["bin_left", "bin_right", "count"])
    return [(float(r[0]), float(r[1]), int(r[2])) for r in rows]


def measured(value: float) -> dict:
    """Wrap a wall-clock measurement so comparisons can exclude it."""
    return {"value": value, "measured": True}


def strip_measured(record):
    """Recursively drop measured-value entries from a run record."""
    if isinstance(record, dict):
        if record.get("measured") is True:
            return None
        return {k: strip_measured(v) for k, v in record.items()
                if not (isinstance(v, dict) and v.get("measured") is True)}
    if isinstance(record, list):
        return [strip_measured(v) for v in record]
    return record


def write_run_record(path, record: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_run_record(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
