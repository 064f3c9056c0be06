import json
import shutil
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from mergelab.cli import main as cli_main
from mergelab.errors import ConfigError
from mergelab.pipeline import RunConfig, emit_figure_data, run_pipeline, run_stage
from mergelab.scenarios import SCENARIO_LABELS


def _config(corpus, out, **kw):
    return RunConfig(data_dir=corpus / "data", out_dir=out,
                     layout_path=corpus / "layout.yaml",
                     maps_dir=corpus / "maps", **kw)


@pytest.fixture(scope="module")
def pipeline_out(small_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    run_pipeline(_config(small_corpus, out))
    return out


EXPECTED_FILES = (
    "ingest_report.csv", "events.csv", "rejections.csv", "scenarios.csv",
    "indicators.csv", "macro.csv", "summary.csv", "divergence.csv",
    "table2_solid_merges.csv", "table5_scenario_counts.csv",
    "table6_mean_distance_ratio.csv", "table7_mean_duration.csv",
    "table8_consecutive_share.csv", "table9_consecutive_duration.csv",
    "manifest.json",
)


def test_run_emits_all_files(pipeline_out):
    for name in EXPECTED_FILES:
        assert (pipeline_out / name).exists(), name
    assert (pipeline_out / "figures_data").is_dir()


def test_manifest_contents(pipeline_out):
    manifest = json.loads((pipeline_out / "manifest.json").read_text())
    assert manifest["tool"]["name"] == "mergelab"
    assert manifest["methods"]["js_log_base"] == 2
    assert manifest["methods"]["kde_grid_points"] == 512
    assert all(v.startswith("sha256:") for v in manifest["inputs"].values())
    assert "timings" in manifest


def test_boxplot_bundle_carries_summary_columns(pipeline_out):
    box = pd.read_csv(pipeline_out / "figures_data" / "boxplot_merging.csv")
    summary = pd.read_csv(pipeline_out / "summary.csv")
    assert list(box.columns) == list(summary.columns)
    assert (box["scenario"] == "all").all()


def test_heatmap_bundle_is_square_per_group(pipeline_out):
    heat = pd.read_csv(pipeline_out / "figures_data" / "js_heatmap.csv")
    k = len(SCENARIO_LABELS)
    for _, group in heat.groupby(["location_id", "distance_threshold",
                                  "indicator"]):
        assert len(group) == k * k
        assert group["masked"].dtype == bool


def test_scatter_bundle_join_integrity(pipeline_out):
    points = pd.read_csv(pipeline_out / "figures_data" / "merge_points.csv")
    indicators = pd.read_csv(pipeline_out / "indicators.csv")
    event_keys = set(map(tuple, indicators[["recording_id", "track_id"]]
                         .drop_duplicates().to_numpy()))
    point_keys = list(map(tuple, points[["recording_id", "track_id"]].to_numpy()))
    assert len(point_keys) == len(set(point_keys))
    assert event_keys <= set(point_keys)


def test_empty_recording_set_is_config_error(tmp_path):
    empty = tmp_path / "nothing"
    empty.mkdir()
    config = RunConfig(data_dir=empty, out_dir=tmp_path / "out")
    with pytest.raises(ConfigError):
        run_pipeline(config)


def test_failed_run_leaves_no_partial_tables(small_corpus, tmp_path):
    out = tmp_path / "out"
    config = _config(small_corpus, out)
    config.distance_thresholds = (100.0,)
    # poison one tracks file to trip a schema error mid-run
    broken = tmp_path / "data"
    shutil.copytree(small_corpus / "data", broken)
    pd.DataFrame({"trackId": [1]}).to_csv(broken / "01_tracks.csv", index=False)
    config.data_dir = broken
    with pytest.raises(Exception):
        run_pipeline(config)
    assert not (out / "events.csv").exists()
    assert not (out / ".partial").exists()


def test_stagewise_equals_full_run(small_corpus, pipeline_out, tmp_path):
    out = tmp_path / "staged"
    for stage in ("ingest", "extract", "classify", "indicators", "macro",
                  "stats", "report"):
        run_stage(_config(small_corpus, out), stage)
    for name in ("events.csv", "scenarios.csv", "indicators.csv", "macro.csv",
                 "summary.csv", "divergence.csv"):
        a = (pipeline_out / name).read_bytes()
        b = (out / name).read_bytes()
        assert a == b, name


def test_stage_needs_prior_outputs(small_corpus, tmp_path):
    with pytest.raises(ConfigError, match="extract"):
        run_stage(_config(small_corpus, tmp_path / "fresh"), "classify")


def test_parallel_equals_serial(small_corpus, pipeline_out, tmp_path):
    out = tmp_path / "par"
    run_pipeline(_config(small_corpus, out, jobs=2))
    for name in ("events.csv", "scenarios.csv", "indicators.csv",
                 "macro.csv", "summary.csv"):
        assert (out / name).read_bytes() == (pipeline_out / name).read_bytes()


def test_cli_exit_codes(small_corpus, tmp_path):
    rc = cli_main(["run", "--data-dir", str(tmp_path / "missing"),
                   "--out", str(tmp_path / "o1")])
    assert rc == 2

    broken = tmp_path / "data"
    shutil.copytree(small_corpus / "data", broken)
    pd.DataFrame({"trackId": [1]}).to_csv(broken / "00_tracks.csv", index=False)
    rc = cli_main(["run", "--data-dir", str(broken),
                   "--layout", str(small_corpus / "layout.yaml"),
                   "--out", str(tmp_path / "o2")])
    assert rc == 3

    rc = cli_main(["run", "--data-dir", str(small_corpus / "data"),
                   "--layout", str(small_corpus / "layout.yaml"),
                   "--maps-dir", str(small_corpus / "maps"),
                   "--out", str(tmp_path / "o3")])
    assert rc == 0


def test_cli_synth_and_config_file(tmp_path):
    rc = cli_main(["synth", "--out", str(tmp_path / "corpus"),
                   "--events", "4", "--seed", "3",
                   "--events-per-recording", "4"])
    assert rc == 0
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        f"data_dir: {tmp_path / 'corpus' / 'data'}\n"
        f"layout_path: {tmp_path / 'corpus' / 'layout.yaml'}\n"
        f"maps_dir: {tmp_path / 'corpus' / 'maps'}\n"
        f"distance_thresholds: [100, 150]\n", encoding="utf-8")
    rc = cli_main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    scen = pd.read_csv(tmp_path / "out" / "scenarios.csv")
    assert set(scen["distance_threshold"]) == {100.0, 150.0}


def test_cli_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "mergelab.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "mergelab" in proc.stdout


def test_report_fails_loudly_without_tables(tmp_path, small_corpus):
    from mergelab.errors import IntegrityError
    with pytest.raises(IntegrityError, match="events.csv"):
        emit_figure_data(tmp_path)
