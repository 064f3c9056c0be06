import numpy as np
import pytest

from mergelab import synth
from mergelab.events import (MergingEvent, Rejection, classify_route,
                             count_solid_line_merges, detect_key_positions,
                             ROUTE_MAINLINE, ROUTE_ON_RAMP, ROUTE_OTHER)
from mergelab.map_model import load_layout
from mergelab.trajectory import NEIGHBOR_COLUMNS, Track, TrackMeta


def _track_from_lanelets(lanelets, lat_offsets=None, lane_change=None,
                         speed=25.0, track_id=1):
    """A straight synthetic track whose lanelet assignment is given directly."""
    n = len(lanelets)
    x = speed * 0.04 * np.arange(n)
    off = (np.asarray(lat_offsets, dtype=float) if lat_offsets is not None
           else np.full(n, np.nan))
    flags = (np.asarray(lane_change, dtype=bool) if lane_change is not None
             else np.zeros(n, dtype=bool))
    meta = TrackMeta(track_id, "car", 4.5, 2.0, 0, n - 1)
    return Track(meta, np.arange(n), x, np.zeros(n), np.zeros(n),
                 np.full(n, speed), np.zeros(n), np.zeros(n), np.zeros(n),
                 off, flags, [(l,) if l else () for l in lanelets],
                 {k: np.zeros(n, dtype=np.int64) for k in NEIGHBOR_COLUMNS})


@pytest.fixture(scope="module")
def loc2_layout(bundled_layout_cfg):
    return load_layout(bundled_layout_cfg, 2)


def test_route_on_ramp(loc2_layout):
    # acceleration lane (1500 -> 1503) then mainline outer lane (1502)
    track = _track_from_lanelets([1500] * 10 + [1503] * 10 + [1502] * 10)
    assert classify_route(track, loc2_layout) == ROUTE_ON_RAMP


def test_route_mainline(loc2_layout):
    track = _track_from_lanelets([1489] * 10 + [1493] * 5 + [1499] * 5)
    assert classify_route(track, loc2_layout) == ROUTE_MAINLINE


def test_route_other_without_lanelets(loc2_layout):
    track = _track_from_lanelets([None] * 12)
    assert classify_route(track, loc2_layout) == ROUTE_OTHER


def test_detect_crossing_frame(loc2_layout):
    # area switch 1503 (area 2) -> 1502 (area 5) exactly at frame 120
    lanelets = [1500] * 40 + [1503] * 80 + [1502] * 40
    offsets = np.concatenate([np.linspace(0.0, 1.9, 120), np.full(40, -2.0)])
    flags = np.zeros(160, dtype=bool)
    flags[120] = True
    track = _track_from_lanelets(lanelets, offsets, flags)
    event = detect_key_positions(track, loc2_layout)
    assert isinstance(event, MergingEvent)
    assert event.t_F == 120
    assert event.t_B == 0 and event.t_D == 40
    assert not event.crossed_solid
    assert event.t_H is None


def test_detect_solid_line_merge(loc2_layout):
    # straight from area 1 into the mainline, never on area 2
    lanelets = [1500] * 50 + [1502] * 30
    offsets = np.concatenate([np.linspace(0.0, 1.9, 50), np.full(30, -2.0)])
    track = _track_from_lanelets(lanelets, offsets)
    event = detect_key_positions(track, loc2_layout)
    assert isinstance(event, MergingEvent)
    assert event.crossed_solid and event.t_D is None


def test_incomplete_merge_is_rejected(loc2_layout):
    track = _track_from_lanelets([1500] * 30 + [1503] * 30)
    result = detect_key_positions(track, loc2_layout, recording_id=3)
    assert isinstance(result, Rejection)
    assert result.reason == "merge_incomplete"
    assert result.recording_id == 3


def test_consecutive_lane_change_detection(loc2_layout):
    lanelets = [1500] * 40 + [1503] * 80 + [1502] * 60 + [1504] * 40
    offsets = np.concatenate([
        np.linspace(0.0, 1.9, 120),       # drifting toward the line
        np.linspace(-2.0, 1.9, 60),       # settling then drifting again
        np.full(40, -2.0),
    ])
    flags = np.zeros(220, dtype=bool)
    flags[120] = True
    flags[180] = True
    track = _track_from_lanelets(lanelets, offsets, flags)
    event = detect_key_positions(track, loc2_layout)
    assert event.t_F == 120
    assert event.t_H == 180


def test_event_invariants_enforced():
    with pytest.raises(ValueError):
        MergingEvent(0, 1, 2, "car", t_B=10, t_D=5, t_F=20)
    with pytest.raises(ValueError):
        MergingEvent(0, 1, 2, "car", t_B=0, t_D=None, t_F=20,
                     crossed_solid=False)
    with pytest.raises(ValueError):
        MergingEvent(0, 1, 2, "car", t_B=0, t_D=5, t_F=20, t_H=15)


def test_determinism_of_detection(loc2_layout):
    lanelets = [1500] * 40 + [1503] * 80 + [1502] * 40
    offsets = np.concatenate([np.linspace(0.0, 1.9, 120), np.full(40, -2.0)])
    track = _track_from_lanelets(lanelets, offsets)
    first = detect_key_positions(track, loc2_layout)
    second = detect_key_positions(track, loc2_layout)
    assert first == second


def test_count_solid_line_merges_empty():
    df = count_solid_line_merges([])
    assert df.empty


def test_count_solid_line_merges_trucks():
    events = [MergingEvent(0, i, 5, "truck", t_B=0, t_D=None, t_F=10,
                           crossed_solid=True) for i in (1, 2, 3)]
    df = count_solid_line_merges(events)
    assert len(df) == 1
    row = df.iloc[0]
    assert row["location_id"] == 5 and row["vehicle_class"] == "truck"
    assert row["count"] == 3


def test_synth_events_match_truth_frames(small_corpus, synth_layout):
    from mergelab.trajectory import parse_recording
    truths = synth.load_truths(small_corpus)
    data = small_corpus / "data"
    meta, tracks = parse_recording(data / "00_recordingMeta.csv",
                                   data / "00_tracksMeta.csv",
                                   data / "00_tracks.csv")
    by_id = {t.track_id: t for t in tracks}
    checked = 0
    for (rec_id, track_id), truth in truths.items():
        if rec_id != 0:
            continue
        event = detect_key_positions(by_id[track_id], synth_layout,
                                     recording_id=rec_id)
        assert isinstance(event, MergingEvent)
        assert (event.t_B, event.t_D, event.t_F, event.t_H) == \
            (truth["t_B"], truth["t_D"], truth["t_F"], truth["t_H"])
        assert event.crossed_solid == truth["crossed_solid"]
        checked += 1
    assert checked > 0
