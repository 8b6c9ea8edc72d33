import json

import pytest

from uavbench import runio
from uavbench.cli import build_config, build_parser, main, parse_threshold_list
from uavbench.dataset import attribute_report, load_dataset
from uavbench.errors import ConfigError

pytestmark = pytest.mark.filterwarnings("ignore::pytest.PytestUnraisableExceptionWarning")


def run_cli(*argv):
    return main(list(argv))


def _read_all(run_dir, skip=("run.json",)):
    out = {}
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name not in skip:
            out[str(p.relative_to(run_dir))] = p.read_bytes()
    return out


# --- eval-track ----------------------------------------------------------------

def test_eval_track_identity_noDET(identity_dataset, tmp_path, capsys):
    root, fx = identity_dataset
    out = tmp_path / "run"
    rc = run_cli("eval-track", "--dataset", str(root), "--tracker", "ncc",
                 "--out", str(out))
    assert rc == 0
    record = runio.load_run_record(out / "run.json")
    # all IoU exactly 1.0: success counts at every threshold except 1.0
    assert record["overall"]["success_auc"] == pytest.approx(20 / 21, abs=1e-15)
    assert record["overall"]["precision_at_20"] == 1.0
    assert (out / "sequences" / fx.sequence_dir.name / "trace.csv").is_file()
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("tracker,detector,")
    assert ",noDET," in summary[1]


def test_eval_track_deterministic_outputs(identity_dataset, tmp_path):
    root, _ = identity_dataset
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = run_cli("eval-track", "--dataset", str(root), "--tracker", "ncc",
                     "--seed", "7", "--out", str(out))
        assert rc == 0
        outs.append(out)
    # byte-identical files, timing-bearing run.json compared after stripping
    assert _read_all(outs[0]) == _read_all(outs[1])
    rec_a = runio.strip_measured(runio.load_run_record(outs[0] / "run.json"))
    rec_b = runio.strip_measured(runio.load_run_record(outs[1] / "run.json"))
    assert rec_a == rec_b


def test_eval_track_tau_d_one_equals_noDET(drift_dataset, tmp_path):
    root, fx = drift_dataset
    base = tmp_path / "base"
    fused = tmp_path / "fused"
    rc = run_cli("eval-track", "--dataset", str(root), "--tracker", fx.tracker_spec,
                 "--out", str(base))
    assert rc == 0
    rc = run_cli("eval-track", "--dataset", str(root), "--tracker", fx.tracker_spec,
                 "--detector", fx.detector_spec, "--tau-d", "1.0", "--out", str(fused))
    assert rc == 0
    # metric outputs identical; only the trace records the (futile) detector calls
    for name in ("success.csv", "precision.csv", "norm_precision.csv"):
        assert (base / name).read_bytes() == (fused / name).read_bytes()
        seq = f"sequences/{fx.sequence_dir.name}/{name}"
        assert (base / seq).read_bytes() == (fused / seq).read_bytes()
    rec_base = runio.load_run_record(base / "run.json")
    rec_fused = runio.load_run_record(fused / "run.json")
    assert rec_base["overall"] == rec_fused["overall"]


def test_eval_track_fusion_improves_drift(drift_dataset, tmp_path):
    root, fx = drift_dataset
    base = tmp_path / "noDET"
    fused = tmp_path / "det"
    run_cli("eval-track", "--dataset", str(root), "--tracker", fx.tracker_spec,
            "--out", str(base))
    run_cli("eval-track", "--dataset", str(root), "--tracker", fx.tracker_spec,
            "--detector", fx.detector_spec, "--out", str(fused))
    auc_base = runio.load_run_record(base / "run.json")["overall"]["success_auc"]
    auc_fused = runio.load_run_record(fused / "run.json")["overall"]["success_auc"]
    assert auc_fused - auc_base >= 0.3
    trace = runio.load_trace(fused / "sequences" / fx.sequence_dir.name / "trace.csv")
    for row in trace.rows:
        if row.frame >= fx.switch_frame:
            assert row.source == "detector"


def test_eval_track_outputs_self_roundtrip(drift_dataset, tmp_path):
    """Every output file re-parses through the package's own loaders."""
    root, fx = drift_dataset
    out = tmp_path / "run"
    run_cli("eval-track", "--dataset", str(root), "--tracker", fx.tracker_spec,
            "--detector", fx.detector_spec, "--out", str(out))
    loaded = 0
    for p in out.rglob("*.csv"):
        if p.name == "trace.csv":
            assert runio.load_trace(p).rows
        elif p.name == "summary.csv":
            assert runio.read_csv(p)[1]
        else:
            assert runio.load_curve(p).values
        loaded += 1
    assert loaded == 8  # 3 overall curves + 3 per-seq curves + trace + summary
    record = runio.load_run_record(out / "run.json")
    assert record["command"] == "eval-track"


def test_eval_track_plugin_failure_keeps_partial_trace(drift_dataset, tmp_path, capsys):
    root, fx = drift_dataset
    # script that runs out of steps halfway through the sequence
    short_script = tmp_path / "short.json"
    steps = json.loads(fx.script_path.read_text())["steps"][:10]
    short_script.write_text(json.dumps({"steps": steps}))
    out = tmp_path / "run"
    rc = run_cli("eval-track", "--dataset", str(root),
                 "--tracker", f"scripted:{short_script}", "--out", str(out))
    assert rc == 2
    record = json.loads(capsys.readouterr().err)
    assert record["error"]["code"] == "fusion-aborted"
    partial = runio.load_trace(out / "partial" / f"{fx.sequence_dir.name}.trace.csv")
    assert len(partial.rows) == 10


def test_eval_track_missing_dataset(tmp_path, capsys):
    rc = run_cli("eval-track", "--dataset", str(tmp_path / "missing"),
                 "--tracker", "ncc", "--out", str(tmp_path / "o"))
    assert rc == 2
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"]["code"] == "missing-split"
    assert "path" in record["error"]


def test_eval_track_workers_match_serial(drift_dataset, identity_dataset, tmp_path):
    # multi-sequence dataset: copy identity + drift roots into one
    root = tmp_path / "ds"
    import shutil

    for src, _ in (identity_dataset, drift_dataset):
        for seq_dir in (src / "tracking").iterdir():
            shutil.copytree(seq_dir, root / "tracking" / seq_dir.name)
    serial = tmp_path / "serial"
    parallel = tmp_path / "parallel"
    run_cli("eval-track", "--dataset", str(root), "--tracker", "ncc", "--out", str(serial))
    run_cli("eval-track", "--dataset", str(root), "--tracker", "ncc",
            "--workers", "4", "--out", str(parallel))
    assert _read_all(serial) == _read_all(parallel)


# --- eval-detect ------------------------------------------------------------------

def test_eval_detect_perfect_on_fixture(detection_dataset, tmp_path):
    root, fx = detection_dataset
    out = tmp_path / "det"
    rc = run_cli("eval-detect", "--dataset", str(root), "--split", f"detection-{fx.split}",
                 "--detector", fx.detector_spec, "--out", str(out))
    assert rc == 0
    record = runio.load_run_record(out / "run.json")
    assert record["map_score"] == pytest.approx(1.0, abs=1e-12)
    assert record["n_objects"] == fx.n_objects
    # curves and AP table reload through the package's own loaders
    pr = runio.load_pr_curve(out / "pr_iou0.50.csv")
    assert pr.recalls[-1] == 1.0
    _, rows = runio.read_csv(out / "ap.csv", ["iou", "ap"])
    assert len(rows) == 10


def test_eval_detect_single_threshold(detection_dataset, tmp_path):
    root, fx = detection_dataset
    out = tmp_path / "det05"
    rc = run_cli("eval-detect", "--dataset", str(root), "--split", f"detection-{fx.split}",
                 "--detector", fx.detector_spec, "--map-thresholds", "0.5,0.75",
                 "--out", str(out))
    assert rc == 0
    record = runio.load_run_record(out / "run.json")
    assert record["map_thresholds"] == [0.5, 0.75]
    assert (out / "pr_iou0.75.csv").is_file()


def test_eval_detect_empty_predictions(detection_dataset, tmp_path):
    root, fx = detection_dataset
    out = tmp_path / "empty"
    rc = run_cli("eval-detect", "--dataset", str(root), "--split", f"detection-{fx.split}",
                 "--detector", "echo", "--out", str(out))  # echo with no box: no detections
    assert rc == 0
    assert runio.load_run_record(out / "run.json")["map_score"] == 0.0


# --- stats ---------------------------------------------------------------------------

def test_stats_tracking(drift_dataset, tmp_path):
    root, _ = drift_dataset
    out = tmp_path / "stats"
    rc = run_cli("stats", "--dataset", str(root), "--split", "tracking", "--out", str(out))
    assert rc == 0
    rows = runio.load_report(out / "report.csv")
    index = load_dataset(root, "tracking")
    report = attribute_report(index)
    assert rows == list(report.rows)  # float round trip is exact via repr
    assert len(runio.load_scatter(out / "scatter.csv")) == report.overall.object_count
    hist = runio.load_histogram(out / "aspect_hist.csv")
    assert sum(c for _, _, c in hist) == report.overall.object_count


def test_stats_empty_split(tmp_path, capsys):
    (tmp_path / "tracking").mkdir()
    rc = run_cli("stats", "--dataset", str(tmp_path), "--split", "tracking",
                 "--out", str(tmp_path / "o"))
    assert rc == 2
    assert json.loads(capsys.readouterr().err)["error"]["code"] == "missing-split"


# --- sweep ----------------------------------------------------------------------------

def test_sweep_cli(drift_dataset, tmp_path):
    root, fx = drift_dataset
    out = tmp_path / "sweep"
    rc = run_cli("sweep", "--dataset", str(root), "--tracker", fx.tracker_spec,
                 "--detector", fx.detector_spec, "--tau-t-grid", "0.5,0.9",
                 "--tau-d-grid", "0.9", "--out", str(out))
    assert rc == 0
    header, rows = runio.read_csv(out / "sweep.csv")
    assert header[:2] == ["tau_t", "tau_d"]
    assert len(rows) == 2
    # single-cell sweep reproduces the plain eval numbers
    single = tmp_path / "single"
    run_cli("sweep", "--dataset", str(root), "--tracker", fx.tracker_spec,
            "--detector", fx.detector_spec, "--out", str(single))
    ev = tmp_path / "ev"
    run_cli("eval-track", "--dataset", str(root), "--tracker", fx.tracker_spec,
            "--detector", fx.detector_spec, "--out", str(ev))
    _, srows = runio.read_csv(single / "sweep.csv")
    auc_sweep = float(srows[0][2])
    auc_eval = runio.load_run_record(ev / "run.json")["overall"]["success_auc"]
    assert auc_sweep == auc_eval


# --- make-fixture and config plumbing ---------------------------------------------------

def test_make_fixture_and_eval(tmp_path):
    ds = tmp_path / "ds"
    rc = run_cli("make-fixture", "identity", "--out", str(ds), "--seed", "3")
    assert rc == 0
    manifest = runio.load_run_record(ds / "manifest.json")
    assert manifest["kind"] == "identity"
    rc = run_cli("eval-track", "--dataset", str(ds), "--tracker", "ncc",
                 "--out", str(tmp_path / "run"))
    assert rc == 0


def test_make_fixture_drift_manifest(tmp_path):
    ds = tmp_path / "drift"
    rc = run_cli("make-fixture", "drift", "--frames", "20", "--out", str(ds))
    assert rc == 0
    manifest = runio.load_run_record(ds / "manifest.json")
    assert manifest["switch_frame"] == 50 or manifest["switch_frame"] <= 50
    assert manifest["tracker_spec"].startswith("scripted:")


def test_config_file_is_authoritative(identity_dataset, tmp_path):
    root, _ = identity_dataset
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"tau_t": 0.42}))
    args = build_parser().parse_args([
        "eval-track", "--dataset", str(root), "--tracker", "ncc",
        "--tau-t", "0.9", "--out", str(tmp_path / "o"), "--config", str(cfg_path)])
    cfg = build_config(args)
    assert cfg.tau_t == 0.42  # file beats flag
    assert cfg.tracker == "ncc"


def test_env_defaults(monkeypatch, tmp_path):
    monkeypatch.setenv("UAVBENCH_SEED", "123")
    monkeypatch.setenv("UAVBENCH_TAU_D", "0.8")
    args = build_parser().parse_args(["eval-track", "--tau-d", "0.7"])
    cfg = build_config(args)
    assert cfg.seed == 123       # env fills the gap
    assert cfg.tau_d == 0.7      # explicit flag beats env


def test_unknown_config_key(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"bogus": 1}))
    args = build_parser().parse_args(["stats", "--config", str(cfg_path)])
    with pytest.raises(ConfigError):
        build_config(args)


def test_parse_threshold_list():
    assert parse_threshold_list("0.5,0.75", default=[]) == [0.5, 0.75]
    assert parse_threshold_list("0.5:0.05:0.6", default=[]) == [0.5, 0.55, 0.6]
    assert parse_threshold_list(None, default=[0.5]) == [0.5]
    with pytest.raises(ConfigError):
        parse_threshold_list("1:2", default=[])
    with pytest.raises(ConfigError):
        parse_threshold_list("a,b", default=[])


def test_missing_required_flag(tmp_path, capsys):
    rc = run_cli("eval-track", "--out", str(tmp_path / "o"))
    assert rc == 2
    assert json.loads(capsys.readouterr().err)["error"]["code"] == "config-error"
