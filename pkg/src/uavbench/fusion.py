"""Confidence-gated fusion of a tracker and a detector.

Per frame: take the tracker's scored box. If its score reaches tau_t the
result is the tracker box and the detector is not consulted. Below tau_t
the detector runs on the full frame; when its best detection scores
strictly above both tau_d and the tracker score, that detection becomes
the frame result; on every other path (including an empty detection list)
the tracker box stands. Ties go to the tracker; a max-score tie among
detections picks the first in detector output order. The tracker's
internal state is never re-seeded with the detector box unless the
explicit feedback flag is set (off by default: fusion only overrides the
reported result).

A fusion run is strictly sequential over frames; independent
(sequence, config) runs may execute concurrently on distinct handles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import Sequence
from .errors import ConfigError, HarnessError, PluginError
from .geometry import Box
from .metrics import TrackingResult, evaluate_tracking
from .plugins import BaseDetector, BaseTracker, ScoredBox, validate_output

__all__ = [
    "FusionConfig",
    "TraceRow",
    "FusionTrace",
    "FusionRunError",
    "fuse_step",
    "fuse_sequence",
    "RecordedRun",
    "record_run",
    "replay",
    "SweepCell",
    "threshold_sweep",
    "sequence_results",
    "evaluate_trace",
]

SOURCE_TRACKER = "tracker"
SOURCE_DETECTOR = "detector"


@dataclass(frozen=True)
class FusionConfig:
    """Confidence thresholds; both default to 0.9."""

    tau_t: float = 0.9
    tau_d: float = 0.9
    feedback: bool = False  # re-init the tracker from an overriding detection

    def validate(self) -> "FusionConfig":
        for name, v in (("tau_t", self.tau_t), ("tau_d", self.tau_d)):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        return self


@dataclass(frozen=True)
class TraceRow:
    """Decision record for one tracked frame."""

    frame: int
    source: str  # "tracker" or "detector"
    box: Box
    score_t: float
    detector_invoked: bool
    score_d: float | None
    detection_count: int


@dataclass(frozen=True)
class FusionTrace:
    """Frame-0 seed box plus one decision row per subsequent frame."""

    init_box: Box
    rows: tuple[TraceRow, ...]

    def __len__(self) -> int:
        return 1 + len(self.rows)

    def results(self) -> list[Box]:
        """R_0..R_{N-1}: the reported box for every frame."""
        return [self.init_box] + [r.box for r in self.rows]


class FusionRunError(HarnessError):
    """A plug-in failed mid-run; the partial trace is kept for diagnosis."""

    code = "fusion-aborted"

    def __init__(self, frame_index: int, partial: FusionTrace, cause: Exception,
                 sequence_name: str | None = None):
        self.frame_index = frame_index
        self.partial_trace = partial
        self.sequence_name = sequence_name
        where = f"frame {frame_index}"
        if sequence_name:
            where = f"{sequence_name} {where}"
        super().__init__(f"plug-in failure at {where}: {cause}")


def fuse_step(tracker_out: ScoredBox, detect_fn, cfg: FusionConfig):
    """One fusion decision. ``detect_fn`` is a deferred detector call
    (or None when running tracker-only); it is invoked at most once, and
    only when the tracker score falls below tau_t.

    Returns (result box, source, detector_invoked, score_d, detection_count).
    """
    score_t = tracker_out.score
    if score_t < cfg.tau_t and detect_fn is not None:
        detections = detect_fn()
        if detections:
            best = max(detections, key=lambda d: d.score)  # first max wins ties
            if best.score > cfg.tau_d and best.score > score_t:
                return best.box, SOURCE_DETECTOR, True, best.score, len(detections)
            return tracker_out.box, SOURCE_TRACKER, True, best.score, len(detections)
        return tracker_out.box, SOURCE_TRACKER, True, None, 0
    return tracker_out.box, SOURCE_TRACKER, False, None, 0


def fuse_sequence(seq: Sequence, tracker: BaseTracker,
                  detector: BaseDetector | None = None,
                  cfg: FusionConfig | None = None) -> FusionTrace:
    """Run the fusion loop over one sequence.

    R_0 is the frame-0 ground truth; each later frame gets exactly one
    track call and at most one detect call. A plug-in failure aborts with
    FusionRunError carrying the frame index and the partial trace.
    """
    cfg = (cfg or FusionConfig()).validate()
    gt0 = seq.initial_gt
    rows: list[TraceRow] = []
    try:
        tracker.init(str(seq.frames[0].image_path), gt0)
    except PluginError as exc:
        raise FusionRunError(0, FusionTrace(gt0, ()), exc, seq.name) from exc
    for t in range(1, len(seq)):
        path = str(seq.frames[t].image_path)
        try:
            out = validate_output(tracker.track(path), origin="tracker")
            detect_fn = None
            if detector is not None:
                detect_fn = lambda p=path: [
                    validate_output(d, origin="detector") for d in detector.detect(p)]
            box, source, invoked, score_d, count = fuse_step(out, detect_fn, cfg)
            if cfg.feedback and source == SOURCE_DETECTOR:
                tracker.init(path, box)
        except PluginError as exc:
            raise FusionRunError(t, FusionTrace(gt0, tuple(rows)), exc, seq.name) from exc
        rows.append(TraceRow(t, source, box, out.score, invoked, score_d, count))
    return FusionTrace(gt0, tuple(rows))


# ---------------------------------------------------------------------------
# record/replay: plug-in outputs are computed once, decisions re-derived


@dataclass
class RecordedRun:
    """Tracker outputs for a whole sequence plus lazily cached detections.

    Because the tracker state does not depend on fusion decisions (no
    feedback), its output sequence is threshold-independent and can be
    recorded once and replayed under any config.
    """

    sequence: Sequence
    tracker_outputs: tuple[ScoredBox, ...]  # frames 1..N-1
    detections: dict[int, tuple[ScoredBox, ...]] = field(default_factory=dict)
    detector: BaseDetector | None = None

    def detections_for(self, t: int) -> tuple[ScoredBox, ...] | None:
        if self.detector is None:
            return None
        if t not in self.detections:
            raw = self.detector.detect(str(self.sequence.frames[t].image_path))
            self.detections[t] = tuple(validate_output(d, origin="detector") for d in raw)
        return self.detections[t]


def record_run(seq: Sequence, tracker: BaseTracker,
               detector: BaseDetector | None = None) -> RecordedRun:
    """Run the tracker over the whole sequence; detections fill on demand."""
    tracker.init(str(seq.frames[0].image_path), seq.initial_gt)
    outs = tuple(
        validate_output(tracker.track(str(seq.frames[t].image_path)), origin="tracker")
        for t in range(1, len(seq)))
    return RecordedRun(sequence=seq, tracker_outputs=outs, detector=detector)


def replay(rec: RecordedRun, cfg: FusionConfig | None = None) -> FusionTrace:
    """Re-derive the fusion trace from recorded plug-in outputs. Replaying
    the config of a live run reproduces that run's trace bit-exactly."""
    cfg = (cfg or FusionConfig()).validate()
    if cfg.feedback:
        raise ConfigError("replay requires feedback off (tracker outputs are fixed)")
    rows = []
    for t, out in enumerate(rec.tracker_outputs, start=1):
        detect_fn = None
        if rec.detector is not None:
            detect_fn = lambda frame=t: list(rec.detections_for(frame))
        box, source, invoked, score_d, count = fuse_step(out, detect_fn, cfg)
        rows.append(TraceRow(t, source, box, out.score, invoked, score_d, count))
    return FusionTrace(rec.sequence.initial_gt, tuple(rows))


# ---------------------------------------------------------------------------
# evaluation helpers and threshold sweeps


def sequence_results(seq: Sequence, trace: FusionTrace) -> list[tuple[Box, Box | None]]:
    """(result, ground truth) pairs for every frame, frame 0 included."""
    return list(zip(trace.results(), (f.gt for f in seq.frames)))


def evaluate_trace(seq: Sequence, trace: FusionTrace) -> TrackingResult:
    return evaluate_tracking(sequence_results(seq, trace))


@dataclass(frozen=True)
class SweepCell:
    """Metrics and detector-consultation bookkeeping for one grid cell."""

    tau_t: float
    tau_d: float
    success_auc: float
    norm_precision_auc: float
    precision_at_20: float
    invoked_frames: dict[str, frozenset]  # sequence name -> frames consulting the detector
    detector_source_frames: dict[str, frozenset]


def threshold_sweep(sequences, tracker: BaseTracker, detector: BaseDetector | None,
                    grid) -> list[SweepCell]:
    """Evaluate every (tau_t, tau_d) grid cell over a sequence set.

    Plug-in outputs are computed once per sequence and reused across cells;
    per-cell numbers equal a fresh fuse_sequence + metrics run at that cell.
    Multi-sequence summaries weight each sequence equally.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("empty sweep grid")
    recordings = [record_run(seq, tracker, detector) for seq in sequences]
    cells = []
    for tau_t, tau_d in grid:
        cfg = FusionConfig(tau_t=tau_t, tau_d=tau_d).validate()
        seq_results = []
        invoked: dict[str, frozenset] = {}
        from_detector: dict[str, frozenset] = {}
        for rec in recordings:
            trace = replay(rec, cfg)
            seq_results.append(evaluate_trace(rec.sequence, trace))
            invoked[rec.sequence.name] = frozenset(
                r.frame for r in trace.rows if r.detector_invoked)
            from_detector[rec.sequence.name] = frozenset(
                r.frame for r in trace.rows if r.source == SOURCE_DETECTOR)
        n = len(seq_results)
        cells.append(SweepCell(
            tau_t=tau_t,
            tau_d=tau_d,
            success_auc=sum(r.summary.success_auc for r in seq_results) / n,
            norm_precision_auc=sum(r.summary.norm_precision_auc for r in seq_results) / n,
            precision_at_20=sum(r.summary.precision_at_20 for r in seq_results) / n,
            invoked_frames=invoked,
            detector_source_frames=from_detector,
        ))
    return cells
