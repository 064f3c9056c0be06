import logging
import math

import pytest

from mergelab import synth
from mergelab.errors import ConfigError
from mergelab.events import MergingEvent, classify_route, detect_key_positions
from mergelab.indicators import min_ttc
from mergelab.scenarios import TrackIndex, classify_event
from mergelab.trajectory import parse_recording


def test_generation_is_deterministic(tmp_path):
    a = synth.build_corpus(tmp_path / "a", n_events=10, seed=99,
                           events_per_recording=5)
    b = synth.build_corpus(tmp_path / "b", n_events=10, seed=99,
                           events_per_recording=5)
    for pa in sorted(a.rglob("*")):
        if pa.is_dir():
            continue
        pb = b / pa.relative_to(a)
        assert pa.read_bytes() == pb.read_bytes(), pa.name


def test_different_seed_differs(tmp_path):
    a = synth.build_corpus(tmp_path / "a", n_events=6, seed=1,
                           events_per_recording=6)
    b = synth.build_corpus(tmp_path / "b", n_events=6, seed=2,
                           events_per_recording=6)
    assert ((a / "data" / "00_tracks.csv").read_bytes()
            != (b / "data" / "00_tracks.csv").read_bytes())


def test_closure_no_warnings(small_corpus, synth_map, synth_layout, caplog):
    """Generated recordings pass ingest and extraction without warnings."""
    data = small_corpus / "data"
    with caplog.at_level(logging.WARNING):
        for prefix in ("00", "01"):
            meta, tracks = parse_recording(data / f"{prefix}_recordingMeta.csv",
                                           data / f"{prefix}_tracksMeta.csv",
                                           data / f"{prefix}_tracks.csv")
            for track in tracks:
                if classify_route(track, synth_layout) != "on_ramp_merging":
                    continue
                result = detect_key_positions(track, synth_layout)
                assert isinstance(result, MergingEvent)
    assert caplog.records == []


def test_spec_target_a_holds_ground_truth_equalities(synth_map, synth_layout):
    spec = synth.spec_for_label("A", seed=5)
    meta, tracks, truths = synth.build_recording([spec], 0)
    truth = truths[0]
    index = TrackIndex(tracks, synth_layout, synth_map)
    event = detect_key_positions(index.tracks_by_id[truth.track_id],
                                 synth_layout)
    for thr in (100.0, 150.0, 200.0):
        _, record = classify_event(event, index, thr)
        assert record.label == truth.per_threshold[thr]["label"]
    assert truth.per_threshold[100.0]["label"] == "A"
    assert truth.duration == pytest.approx(
        (truth.t_F - truth.t_D) * 0.04, abs=1e-12)
    assert truth.distance_ratio == pytest.approx(
        truth.merging_distance / synth.MERGE_WINDOW_LENGTH, rel=1e-12)


def test_spec_target_f_has_finite_lead_ttc(synth_map, synth_layout):
    spec = synth.spec_for_label("F", seed=17)
    meta, tracks, truths = synth.build_recording([spec], 0)
    truth = truths[0]
    index = TrackIndex(tracks, synth_layout, synth_map)
    event = detect_key_positions(index.tracks_by_id[truth.track_id],
                                 synth_layout)
    timeline, record = classify_event(event, index, 100.0)
    assert record.label == "F"
    ttc_lead, _ = min_ttc(event, timeline, index)
    assert math.isfinite(ttc_lead)
    assert ttc_lead == pytest.approx(
        truth.per_threshold[100.0]["min_ttc_lead"], abs=1e-9)


def test_all_labels_constructible():
    for i, label in enumerate("ABCDEFGH"):
        spec = synth.spec_for_label(label, seed=100 + i)
        _, truth = synth.generate(spec)
        assert truth.per_threshold[100.0]["label"] == label


def test_infeasible_spec_raises():
    with pytest.raises(ConfigError):
        synth.ScenarioSpec(target_label="A", seed=0, lc_frames=81)
    with pytest.raises(ConfigError):
        synth.ScenarioSpec(target_label="A", seed=0, merge_x=300.0)
    # an overtaker that cannot have passed inside the window
    spec = synth.ScenarioSpec(
        target_label="C", seed=0, merge_x=75.0, ego_speed=31.0,
        neighbors=(synth.NeighborSpec("overtaker", 80.0, speed_delta=3.0),))
    with pytest.raises(ConfigError):
        synth.generate(spec)


def test_solid_line_spec(synth_map, synth_layout):
    spec = synth.ScenarioSpec(target_label="A", seed=0, merge_x=30.0,
                              solid_line=True)
    meta, tracks, truths = synth.build_recording([spec], 0)
    truth = truths[0]
    assert truth.crossed_solid and truth.t_D is None
    event = detect_key_positions(tracks[0], synth_layout)
    assert event.crossed_solid
