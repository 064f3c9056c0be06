import numpy as np
import pytest

from mergelab import synth
from mergelab.errors import DomainError
from mergelab.events import MergingEvent, detect_key_positions
from mergelab.macroscopic import EdieEstimate, SpaceTimeRegion, edie_estimate, event_macro
from mergelab.trajectory import NEIGHBOR_COLUMNS, Track, TrackMeta, parse_recording

DT = 0.04


def _vehicle(track_id, x, region_ids=(1,), speed=None, first_frame=0):
    """Track assigned to lanelet 1 while 0 <= x < 100, lanelet 9 otherwise."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    lanelets = [(1,) if 0.0 <= xi < 100.0 else (9,) for xi in x]
    v = np.full(n, speed if speed is not None else 0.0)
    meta = TrackMeta(track_id, "car", 4.5, 2.0, first_frame, first_frame + n - 1)
    zeros = np.zeros(n)
    return Track(meta, np.arange(first_frame, first_frame + n), x, zeros,
                 zeros, v, zeros, zeros, zeros, np.full(n, np.nan),
                 np.zeros(n, dtype=bool), lanelets,
                 {k: np.zeros(n, dtype=np.int64) for k in NEIGHBOR_COLUMNS})


def _region(t0=0, t1=250, length=100.0):
    return SpaceTimeRegion(lanelet_chain=(1,), length=length, t0=t0, t1=t1,
                           timestep=DT)


def test_single_vehicle_analytic_case():
    # 20 m/s across a 100 m region observed for 10 s:
    # d(A) = 100, |A| = 1000 -> q = 0.1 veh/s, k = 0.005 veh/m, v = 20 m/s
    n = 300
    x = 20.0 * DT * np.arange(n) - 20.0
    est = edie_estimate([_vehicle(1, x, speed=20.0)], _region())
    assert est.q == pytest.approx(0.1, abs=1e-12)
    assert est.k == pytest.approx(0.005, abs=1e-12)
    assert est.v == pytest.approx(20.0, abs=1e-12)
    assert est.n_vehicles == 1
    assert est.q_veh_h == pytest.approx(360.0, abs=1e-9)
    assert est.k_veh_km == pytest.approx(5.0, abs=1e-9)
    assert est.v_km_h == pytest.approx(72.0, abs=1e-9)


def test_empty_region():
    est = edie_estimate([], _region())
    assert est.q == 0.0 and est.k == 0.0 and est.v is None
    assert est.n_vehicles == 0


def test_three_identical_vehicles_scale_q_and_k():
    n = 300
    x = 20.0 * DT * np.arange(n) - 20.0
    one = edie_estimate([_vehicle(1, x)], _region())
    three = edie_estimate([_vehicle(i, x.copy()) for i in (1, 2, 3)], _region())
    assert three.q == pytest.approx(3.0 * one.q, rel=1e-12)
    assert three.k == pytest.approx(3.0 * one.k, rel=1e-12)
    assert three.v == pytest.approx(one.v, rel=1e-12)


def test_fundamental_identity_is_algebraic():
    rng = np.random.default_rng(5)
    vehicles = []
    for i in range(12):
        n = 400
        v = rng.uniform(8.0, 30.0)
        x0 = rng.uniform(-80.0, 60.0)
        vehicles.append(_vehicle(i + 1, x0 + v * DT * np.arange(n), speed=v))
    est = edie_estimate(vehicles, _region(t1=399))
    assert est.v is not None
    assert abs(est.q - est.k * est.v) <= 1e-12 * max(1.0, abs(est.q))


def test_region_additivity():
    rng = np.random.default_rng(6)
    vehicles = []
    for i in range(8):
        n = 400
        v = rng.uniform(10.0, 28.0)
        x0 = rng.uniform(-60.0, 40.0)
        vehicles.append(_vehicle(i + 1, x0 + v * DT * np.arange(n), speed=v))
    whole = edie_estimate(vehicles, _region(t0=0, t1=360))
    first = edie_estimate(vehicles, _region(t0=0, t1=180))
    second = edie_estimate(vehicles, _region(t0=180, t1=360))
    assert (first.total_distance + second.total_distance
            == pytest.approx(whole.total_distance, abs=1e-9))
    assert (first.total_time + second.total_time
            == pytest.approx(whole.total_time, abs=1e-9))


def test_platoon_flow_matches_authored_value():
    # one vehicle every 2.0 s at 20 m/s -> flow 0.5 veh/s
    headway_s = 2.0
    spacing_frames = int(headway_s / DT)
    n = 3000
    vehicles = []
    for i in range(60):
        x = 20.0 * DT * (np.arange(n) - i * spacing_frames) - 20.0
        vehicles.append(_vehicle(i + 1, x, speed=20.0))
    est = edie_estimate(vehicles, _region(t0=500, t1=3000 - 200))
    want = 1.0 / headway_s
    assert est.q == pytest.approx(want, rel=0.02)


def test_scaling_stationary_stream():
    headway_s = 2.0
    spacing_frames = int(headway_s / DT)
    n = 6000
    vehicles = []
    for i in range(115):
        x = 20.0 * DT * (np.arange(n) - i * spacing_frames) - 20.0
        vehicles.append(_vehicle(i + 1, x, speed=20.0))
    short = edie_estimate(vehicles, _region(t0=500, t1=500 + 1000))
    long = edie_estimate(vehicles, _region(t0=500, t1=500 + 2000))
    # one frame's contribution relative to the observed totals
    tol = 2.0 / 1000
    assert long.q == pytest.approx(short.q, rel=tol)
    assert long.k == pytest.approx(short.k, rel=tol)
    assert long.v == pytest.approx(short.v, rel=tol)


def test_region_validation():
    with pytest.raises(DomainError):
        SpaceTimeRegion((1,), length=-5.0, t0=0, t1=10, timestep=DT)
    with pytest.raises(DomainError):
        SpaceTimeRegion((1,), length=5.0, t0=10, t1=10, timestep=DT)


def test_event_macro_regions(small_corpus, synth_layout):
    data = small_corpus / "data"
    meta, tracks = parse_recording(data / "00_recordingMeta.csv",
                                   data / "00_tracksMeta.csv",
                                   data / "00_tracks.csv")
    truths = synth.load_truths(small_corpus)
    by_id = {t.track_id: t for t in tracks}
    checked = 0
    for (rec_id, track_id), truth in truths.items():
        if rec_id != 0:
            continue
        event = detect_key_positions(by_id[track_id], synth_layout,
                                     recording_id=rec_id)
        up, down = event_macro(event, tracks, synth_layout, meta.timestep)
        for got, want in ((up, truth["edie"]["upstream"]),
                          (down, truth["edie"]["downstream"])):
            assert got.q == pytest.approx(want["q"], abs=1e-12)
            assert got.k == pytest.approx(want["k"], abs=1e-12)
            if want["v"] is None:
                assert got.v is None
            else:
                assert got.v == pytest.approx(want["v"], abs=1e-9)
            assert got.n_vehicles == want["n_vehicles"]
        checked += 1
    assert checked > 0


def test_synthetic_scene_with_no_mainline_traffic(synth_layout):
    spec = synth.ScenarioSpec(target_label="A", seed=1)
    meta, tracks, truths = synth.build_recording([spec], 0)
    event = MergingEvent(0, truths[0].track_id, synth.SYNTH_LOCATION_ID, "car",
                         t_B=truths[0].t_B, t_D=truths[0].t_D,
                         t_F=truths[0].t_F)
    up, down = event_macro(event, tracks, synth_layout, meta.timestep)
    assert up.q == 0.0 and down.q == 0.0
    assert up.v is None and down.v is None
