"""Operator surface: evaluations, sweeps and dataset reports.

    uavbench eval-track  --dataset D --tracker ncc [--detector SPEC] --out R
    uavbench eval-detect --dataset D --split detection-test --detector SPEC --out R
    uavbench stats       --dataset D --split tracking --out R
    uavbench sweep       --dataset D --tracker SPEC --detector SPEC \
                         --tau-t-grid 0.1,0.5,0.9 --tau-d-grid 0.9 --out R
    uavbench make-fixture drift --out D [--seed S]

Options resolve as: config file (--config, authoritative) > command-line
flags > UAVBENCH_* environment variables > built-in defaults. Every run
writes one output directory with a run.json record plus tabular exports;
all files re-parse with uavbench.runio loaders. Failures exit nonzero with
one machine-readable JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import fixtures as synth
from . import runio
from .dataset import attribute_report, load_dataset
from .errors import ConfigError, HarnessError
from .fusion import (
    FusionConfig,
    FusionRunError,
    evaluate_trace,
    fuse_sequence,
    threshold_sweep,
)
from .metrics import detection_map, mean_curve, throughput_fps
from .plugins import resolve_detector, resolve_tracker, validate_output

ENV_PREFIX = "UAVBENCH_"


@dataclass
class RunConfig:
    """Effective options for one command invocation."""

    dataset: str | None = None
    split: str | None = None
    tracker: str | None = None
    detector: str | None = None
    tau_t: float = 0.9
    tau_d: float = 0.9
    out: str | None = None
    workers: int = 1
    seed: int = 0
    map_thresholds: str | None = None
    tau_t_grid: str | None = None
    tau_d_grid: str | None = None

    def public(self) -> dict:
        """Config echo for run records; drops the output path so identical
        runs into different directories write identical records."""
        record = {f.name: getattr(self, f.name) for f in fields(self)}
        record.pop("out")
        return record


_FIELD_TYPES = {"tau_t": float, "tau_d": float, "workers": int, "seed": int}


def _coerce(name: str, value):
    if value is None:
        return None
    caster = _FIELD_TYPES.get(name, str)
    try:
        return caster(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r}") from exc


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file > flags > environment > defaults."""
    cfg = RunConfig()
    field_names = [f.name for f in fields(RunConfig)]
    for name in field_names:
        env = os.environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            setattr(cfg, name, _coerce(name, env))
    for name in field_names:
        flag = getattr(args, name, None)
        if flag is not None:
            setattr(cfg, name, _coerce(name, flag))
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        for name, value in file_cfg.items():
            if name not in field_names:
                raise ConfigError(f"unknown config key {name!r}")
            setattr(cfg, name, _coerce(name, value))
    return cfg


def parse_threshold_list(text: str | None, default):
    """Parse '0.5,0.75' or '0.5:0.05:0.95' into a threshold list."""
    if text is None:
        return list(default)
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range form is start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"bad threshold range {text!r}")
        out, v = [], start
        while v <= stop + 1e-9:
            out.append(round(v, 10))
            v += step
        return out
    try:
        return [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad threshold list {text!r}") from exc


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) in (None, ""):
            raise ConfigError(f"--{name.replace('_', '-')} is required for this command")


class _HandlePool:
    """Per-thread plug-in handles, created lazily and closed at the end."""

    def __init__(self, tracker_spec: str | None, detector_spec: str | None):
        self._tracker_spec = tracker_spec
        self._detector_spec = detector_spec
        self._local = threading.local()
        self._all = []
        self._lock = threading.Lock()

    def get(self):
        if not hasattr(self._local, "handles"):
            tracker = resolve_tracker(self._tracker_spec) if self._tracker_spec else None
            detector = resolve_detector(self._detector_spec) if self._detector_spec else None
            self._local.handles = (tracker, detector)
            with self._lock:
                self._all.append(self._local.handles)
        return self._local.handles

    def close(self):
        for tracker, detector in self._all:
            for h in (tracker, detector):
                if h is not None:
                    h.close()


def _summary_dict(result) -> dict:
    return {
        "success_auc": result.summary.success_auc,
        "precision_at_20": result.summary.precision_at_20,
        "norm_precision_auc": result.summary.norm_precision_auc,
        "n_evaluated": result.n_evaluated,
        "n_excluded": result.n_excluded,
    }


def cmd_eval_track(cfg: RunConfig) -> int:
    _require(cfg, "dataset", "tracker", "out")
    split = cfg.split or "tracking"
    if split != "tracking":
        raise ConfigError("eval-track runs on the tracking split")
    index = load_dataset(cfg.dataset, split)
    fusion_cfg = FusionConfig(tau_t=cfg.tau_t, tau_d=cfg.tau_d).validate()
    out = Path(cfg.out)
    started = time.perf_counter()

    pool = _HandlePool(cfg.tracker, cfg.detector)

    def run_one(seq):
        tracker, detector = pool.get()
        trace = fuse_sequence(seq, tracker, detector, fusion_cfg)
        return trace, evaluate_trace(seq, trace)

    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as ex:
            results = list(ex.map(run_one, index.entries))
    except FusionRunError as exc:
        # keep the partial trace on disk for diagnosis, then fail the run
        name = exc.sequence_name or "unknown"
        runio.write_trace(out / "partial" / f"{name}.trace.csv", exc.partial_trace)
        raise
    finally:
        pool.close()

    per_seq = {}
    for seq, (trace, result) in zip(index.entries, results):
        seq_dir = out / "sequences" / seq.name
        runio.write_curve(seq_dir / "success.csv", result.success)
        runio.write_curve(seq_dir / "precision.csv", result.precision)
        runio.write_curve(seq_dir / "norm_precision.csv", result.norm_precision)
        runio.write_trace(seq_dir / "trace.csv", trace)
        per_seq[seq.name] = _summary_dict(result)

    all_results = [r for _, r in results]
    overall_success = mean_curve([r.success for r in all_results])
    overall_precision = mean_curve([r.precision for r in all_results])
    overall_nprec = mean_curve([r.norm_precision for r in all_results])
    runio.write_curve(out / "success.csv", overall_success)
    runio.write_curve(out / "precision.csv", overall_precision)
    runio.write_curve(out / "norm_precision.csv", overall_nprec)

    overall = {
        "success_auc": overall_success.auc,
        "precision_at_20": overall_precision.values[20],
        "norm_precision_auc": overall_nprec.auc,
        "n_evaluated": sum(r.n_evaluated for r in all_results),
        "n_excluded": sum(r.n_excluded for r in all_results),
    }
    runio.write_csv(out / "summary.csv",
                    ["tracker", "detector", "success_auc", "norm_precision_auc",
                     "precision_at_20", "n_sequences", "n_evaluated", "n_excluded"],
                    [[cfg.tracker, cfg.detector or "noDET", overall["success_auc"],
                      overall["norm_precision_auc"], overall["precision_at_20"],
                      len(index.entries), overall["n_evaluated"], overall["n_excluded"]]])
    runio.write_run_record(out / "run.json", {
        "command": "eval-track",
        "config": cfg.public(),
        "overall": overall,
        "sequences": per_seq,
        "timing": {"wall_seconds": runio.measured(time.perf_counter() - started)},
    })
    print(f"eval-track: {len(index.entries)} sequences, "
          f"success_auc={overall['success_auc']:.4f} -> {out}")
    return 0


def cmd_eval_detect(cfg: RunConfig) -> int:
    _require(cfg, "dataset", "detector", "out")
    split = cfg.split or "detection-test"
    if not split.startswith("detection-"):
        raise ConfigError("eval-detect runs on a detection split")
    index = load_dataset(cfg.dataset, split)
    thresholds = parse_threshold_list(cfg.map_thresholds,
                                      default=[(50 + 5 * i) / 100.0 for i in range(10)])
    out = Path(cfg.out)
    started = time.perf_counter()

    pool = _HandlePool(None, cfg.detector)

    def run_one(entry):
        _, detector = pool.get()
        return [validate_output(d, origin="detector")
                for d in detector.detect(str(entry.image_path))]

    detect_started = time.perf_counter()
    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as ex:
            predictions = list(ex.map(run_one, index.entries))
    finally:
        pool.close()
    detect_seconds = time.perf_counter() - detect_started

    gts = [list(e.objects) for e in index.entries]
    summary, pr_curves = detection_map(predictions, gts, thresholds)
    fps = throughput_fps(len(index.entries), detect_seconds)

    runio.write_csv(out / "ap.csv", ["iou", "ap"],
                    [[t, summary.ap_per_iou[t]] for t in thresholds])
    for t in thresholds:
        runio.write_pr_curve(out / f"pr_iou{t:.2f}.csv", pr_curves[t])
    runio.write_csv(out / "summary.csv", ["detector", "map_score", "fps"],
                    [[cfg.detector, summary.map_score, fps]])
    runio.write_run_record(out / "run.json", {
        "command": "eval-detect",
        "config": cfg.public(),
        "map_thresholds": thresholds,
        "ap_per_iou": {f"{t:.2f}": summary.ap_per_iou[t] for t in thresholds},
        "map_score": summary.map_score,
        "n_images": len(index.entries),
        "n_objects": sum(len(g) for g in gts),
        "timing": {
            "wall_seconds": runio.measured(time.perf_counter() - started),
            "detect_seconds": runio.measured(detect_seconds),
            "fps": runio.measured(fps),
        },
    })
    print(f"eval-detect: {len(index.entries)} images, mAP={summary.map_score:.4f} -> {out}")
    return 0


def cmd_stats(cfg: RunConfig) -> int:
    _require(cfg, "dataset", "split", "out")
    index = load_dataset(cfg.dataset, cfg.split)
    report = attribute_report(index)
    out = Path(cfg.out)

    runio.write_report(out / "report.csv", report.rows)
    runio.write_scatter(out / "scatter.csv", report.centers)
    aspect_hi = max(2.0, float(np.ceil(report.overall.aspect_ratio_max)))
    runio.write_histogram(out / "aspect_hist.csv", report.aspect_ratios,
                          bins=40, lo=1.0, hi=aspect_hi)
    runio.write_histogram(out / "scale_hist.csv", report.area_ratios,
                          bins=40, lo=0.0, hi=max(1e-6, report.overall.area_ratio_max))
    runio.write_run_record(out / "run.json", {
        "command": "stats",
        "config": cfg.public(),
        "split": index.split,
        "object_count": report.overall.object_count,
        "warnings": list(index.warnings),
    })
    print(f"stats: {report.overall.object_count} objects in {cfg.split} -> {out}")
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    _require(cfg, "dataset", "tracker", "out")
    index = load_dataset(cfg.dataset, cfg.split or "tracking")
    tau_t_grid = parse_threshold_list(cfg.tau_t_grid, default=[cfg.tau_t])
    tau_d_grid = parse_threshold_list(cfg.tau_d_grid, default=[cfg.tau_d])
    grid = [(tt, td) for tt in tau_t_grid for td in tau_d_grid]
    out = Path(cfg.out)

    tracker = resolve_tracker(cfg.tracker)
    detector = resolve_detector(cfg.detector) if cfg.detector else None
    try:
        cells = threshold_sweep(index.entries, tracker, detector, grid)
    finally:
        tracker.close()
        if detector is not None:
            detector.close()

    rows = []
    for c in cells:
        rows.append([c.tau_t, c.tau_d, c.success_auc, c.norm_precision_auc,
                     c.precision_at_20,
                     sum(len(v) for v in c.invoked_frames.values()),
                     sum(len(v) for v in c.detector_source_frames.values())])
    runio.write_csv(out / "sweep.csv",
                    ["tau_t", "tau_d", "success_auc", "norm_precision_auc",
                     "precision_at_20", "invoked_frames", "detector_source_frames"],
                    rows)
    runio.write_run_record(out / "run.json", {
        "command": "sweep",
        "config": cfg.public(),
        "grid": [[tt, td] for tt, td in grid],
        "n_sequences": len(index.entries),
    })
    print(f"sweep: {len(grid)} cells over {len(index.entries)} sequences -> {out}")
    return 0


def cmd_make_fixture(kind: str, cfg: RunConfig, n_frames: int | None) -> int:
    _require(cfg, "out")
    out = Path(cfg.out)
    if kind == "identity":
        fx = synth.make_identity_sequence(out, n_frames=n_frames or 3, seed=cfg.seed)
        manifest = {
            "kind": kind,
            "dataset": str(out),
            "sequence": fx.sequence_dir.name,
            "tracker_spec": "ncc",
        }
    elif kind == "drift":
        fx = synth.make_drift_fixture(out, n_frames=n_frames or 100, seed=cfg.seed)
        manifest = {
            "kind": kind,
            "dataset": str(out),
            "sequence": fx.sequence_dir.name,
            "tracker_spec": fx.tracker_spec,
            "detector_spec": fx.detector_spec,
            "switch_frame": fx.switch_frame,
        }
    elif kind == "detection":
        fx = synth.make_detection_fixture(out, n_images=n_frames or 10, seed=cfg.seed)
        manifest = {
            "kind": kind,
            "dataset": str(out),
            "split": f"detection-{fx.split}",
            "detector_spec": fx.detector_spec,
            "n_objects": fx.n_objects,
        }
    else:
        raise ConfigError(f"unknown fixture kind {kind!r}")
    runio.write_run_record(out / "manifest.json", manifest)
    print(json.dumps(manifest, sort_keys=True))
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", help="dataset root directory")
    parser.add_argument("--split", help="detection-train/test/val or tracking")
    parser.add_argument("--tracker", help="tracker spec (ncc, echo, scripted:..., cmd:...)")
    parser.add_argument("--detector", help="detector spec (template:..., echo, cmd:...)")
    parser.add_argument("--tau-t", dest="tau_t", help="tracker confidence threshold")
    parser.add_argument("--tau-d", dest="tau_d", help="detector confidence threshold")
    parser.add_argument("--out", help="run output directory")
    parser.add_argument("--workers", help="worker pool width (default 1)")
    parser.add_argument("--seed", help="seed for synthetic fixtures")
    parser.add_argument("--map-thresholds", dest="map_thresholds",
                        help="IoU set: '0.5,0.75' or '0.5:0.05:0.95'")
    parser.add_argument("--config", help="JSON config file (authoritative over flags)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavbench",
                                     description="anti-UAV tracking/detection benchmark harness")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name in ("eval-track", "eval-detect", "stats", "sweep"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--tau-t-grid", dest="tau_t_grid", help="comma list of tau_t values")
            p.add_argument("--tau-d-grid", dest="tau_d_grid", help="comma list of tau_d values")
    p = sub.add_parser("make-fixture")
    p.add_argument("kind", choices=["identity", "drift", "detection"])
    p.add_argument("--frames", type=int, default=None, help="frame/image count")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.cmd == "eval-track":
            return cmd_eval_track(cfg)
        if args.cmd == "eval-detect":
            return cmd_eval_detect(cfg)
        if args.cmd == "stats":
            return cmd_stats(cfg)
        if args.cmd == "sweep":
            return cmd_sweep(cfg)
        if args.cmd == "make-fixture":
            return cmd_make_fixture(args.kind, cfg, args.frames)
        raise ConfigError(f"unknown command {args.cmd!r}")
    except HarnessError as exc:
        record = {"error": {"code": exc.code, "message": str(exc)}}
        if getattr(exc, "path", None):
            record["error"]["path"] = exc.path
        if getattr(exc, "line", None) is not None:
            record["error"]["line"] = exc.line
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
