"""Deterministic synthetic recordings with closed-form ground truth.

The generator authors a straight-geometry toy location (on-ramp,
acceleration lane, two mainline lanes) and piecewise constant-acceleration
trajectories sampled at 0.04 s, then writes standard recording CSVs plus a
ground-truth file holding the exact key frames, per-threshold scenario
labels, longitudinal indicators, minimum TTCs, and generalized flow
values.  Every quantity in the ground truth is computed from the authored
arrays and schedule, never from the analysis code, so the corpus can serve
as an oracle for the whole pipeline.

Geometry (location id 99, all lanes 4 m wide, travel along +x):

    y = 0   on-ramp/acceleration lane: 100 [-80,0) | 101 [0,60) area 1
            | 102 [60,180) area 2 | 103 [180,220) area 3
    y = 4   outer mainline: 140 [-280,-100) | 141 [-100,-20) | 142 [-20,60)
            area 4 | 151 [60,180) | 152 [180,220) area 5 | 160 [220,360)
    y = 8   inner mainline: 170 [-280,60) | 171 [60,360)

The ego merges with a minimum-jerk lateral ramp whose midpoint lands
exactly on a frame, so the lane switch (and hence position F) is
unambiguous.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .trajectory import (NEIGHBOR_COLUMNS, RecordingMeta, Track, TrackMeta,
                         write_recording)

SYNTH_LOCATION_ID = 99
FRAME_RATE = 25.0
DT = 1.0 / FRAME_RATE
LANE_WIDTH = 4.0

RAMP_SEGMENTS = ((100, -80.0, 0.0), (101, 0.0, 60.0),
                 (102, 60.0, 180.0), (103, 180.0, 220.0))
OUTER_SEGMENTS = ((140, -280.0, -100.0), (141, -100.0, -20.0),
                  (142, -20.0, 60.0), (151, 60.0, 180.0),
                  (152, 180.0, 220.0), (160, 220.0, 360.0))
INNER_SEGMENTS = ((170, -280.0, 60.0), (171, 60.0, 360.0))

AREA_LANELETS = {1: (101,), 2: (102,), 3: (103,),
                 4: (140, 141, 142), 5: (151, 152)}
MERGE_WINDOW_LENGTH = 160.0   # areas 2+3
AREA4_LENGTH = 340.0
AREA5_LENGTH = 160.0

_MAINLINE_SET = frozenset((140, 141, 142, 151, 152))

THRESHOLDS = (100.0, 150.0, 200.0)

# Bumper-gap categories; margins keep every decision at least 5 m away
# from the threshold values.
GAP_NEAR = (20.0, 80.0)       # visible at 100/150/200
GAP_MID_REAR = (110.0, 140.0)  # visible at 150/200 only
GAP_FAR_REAR = (160.0, 185.0)  # visible at 200 only
GAP_MID_LEAD = (105.0, 110.0)  # visible at 150/200 only (area-5 end limits this)

_CLASS_LENGTHS = {"car": (4.2, 5.0), "truck": (10.0, 13.5), "van": (5.4, 6.4)}
_CLASS_WIDTHS = {"car": 1.9, "truck": 2.5, "van": 2.1}


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NeighborSpec:
    """One authored mainline vehicle.

    ``kind``: "lead"/"rear" hold a constant gap; "overtaker" starts behind
    and passes the ego before F; "overtaken" starts ahead and is passed by
    the faster ego.  ``gap_at_f`` is the bumper gap at position F.
    """

    kind: str
    gap_at_f: float
    speed_delta: float = 0.0      # relative to the ego, signed
    slow_after_pass: float = 0.0  # overtaker decelerates by this much (m/s)
    length: float = 4.6


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe for one merge with a known outcome."""

    target_label: str
    seed: int
    ego_speed: float = 25.0
    vehicle_class: str = "car"
    ego_length: float = 4.5
    merge_x: float = 120.0        # x of position F, inside areas 2/3
    lc_frames: int = 80           # lateral maneuver length (even, frames)
    consecutive_lc: bool = False
    lc2_delay_frames: int = 60
    solid_line: bool = False      # cross directly from area 1
    neighbors: tuple[NeighborSpec, ...] = ()

    def __post_init__(self):
        if self.lc_frames % 2:
            raise ConfigError("lc_frames must be even so F lands on a frame")
        if not self.solid_line and not (70.0 <= self.merge_x <= 210.0):
            raise ConfigError(f"merge_x {self.merge_x} outside areas 2/3")
        if self.solid_line and not (10.0 <= self.merge_x <= 55.0):
            raise ConfigError(f"solid-line merge_x {self.merge_x} outside area 1")


@dataclass
class EventTruth:
    """Authored ground truth of one merge."""

    track_id: int
    target_label: str
    vehicle_class: str
    crossed_solid: bool
    t_B: int
    t_F: int
    t_D: int | None = None
    t_H: int | None = None
    merging_distance: float | None = None
    distance_ratio: float | None = None
    duration: float | None = None
    merging_speed: float = 0.0
    consecutive_lc_duration: float | None = None
    per_threshold: dict = field(default_factory=dict)
    edie: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Toy geometry
# ---------------------------------------------------------------------------

def assign_lanelet(x: float, y: float) -> int | None:
    """The generator's half-open lane assignment (its own rule, written to
    the CSVs; the analysis side re-derives areas from the map/layout)."""
    if y < 2.0:
        segments = RAMP_SEGMENTS
    elif y < 6.0:
        segments = OUTER_SEGMENTS
    else:
        segments = INNER_SEGMENTS
    for lid, lo, hi in segments:
        if lo <= x < hi:
            return lid
    return None


_LANE_CENTER = {**{s[0]: 0.0 for s in RAMP_SEGMENTS},
                **{s[0]: 4.0 for s in OUTER_SEGMENTS},
                **{s[0]: 8.0 for s in INNER_SEGMENTS}}


def _lane_center(lanelet_id: int) -> float:
    return _LANE_CENTER[lanelet_id]


def toy_map_xml() -> bytes:
    """The toy location as a lanelet2 OSM document (local_x/local_y tags)."""
    osm = ET.Element("osm", version="0.6")
    node_id = 1000

    def add_node(x: float, y: float) -> int:
        nonlocal node_id
        node_id += 1
        node = ET.SubElement(osm, "node", id=str(node_id), lat="0", lon="0")
        ET.SubElement(node, "tag", k="local_x", v=repr(float(x)))
        ET.SubElement(node, "tag", k="local_y", v=repr(float(y)))
        return node_id

    way_id = 5000

    def add_way(x0: float, x1: float, y: float, subtype: str) -> int:
        nonlocal way_id
        way_id += 1
        way = ET.SubElement(osm, "way", id=str(way_id))
        for nid in (add_node(x0, y), add_node(x1, y)):
            ET.SubElement(way, "nd", ref=str(nid))
        ET.SubElement(way, "tag", k="type", v="line_thin")
        ET.SubElement(way, "tag", k="subtype", v=subtype)
        return way_id

    def add_lanelet(lid: int, x0: float, x1: float, y_lo: float, y_hi: float,
                    left_subtype: str):
        left = add_way(x0, x1, y_hi, left_subtype)
        right = add_way(x0, x1, y_lo, "solid")
        rel = ET.SubElement(osm, "relation", id=str(lid))
        ET.SubElement(rel, "member", type="way", ref=str(left), role="left")
        ET.SubElement(rel, "member", type="way", ref=str(right), role="right")
        ET.SubElement(rel, "tag", k="type", v="lanelet")
        ET.SubElement(rel, "tag", k="subtype", v="road")

    for lid, lo, hi in RAMP_SEGMENTS:
        # Areas 2/3 have a dashed left line (merging legal), area 1 solid.
        subtype = "dashed" if lid in (102, 103) else "solid"
        add_lanelet(lid, lo, hi, -2.0, 2.0, subtype)
    for lid, lo, hi in OUTER_SEGMENTS:
        add_lanelet(lid, lo, hi, 2.0, 6.0, "dashed")
    for lid, lo, hi in INNER_SEGMENTS:
        add_lanelet(lid, lo, hi, 6.0, 10.0, "solid")

    return ET.tostring(osm, xml_declaration=True, encoding="utf-8")


def toy_layout_dict() -> dict:
    lengths = {}
    for lid, lo, hi in (*RAMP_SEGMENTS, *OUTER_SEGMENTS, *INNER_SEGMENTS):
        lengths[lid] = float(hi - lo)
    return {
        "locations": {
            SYNTH_LOCATION_ID: {
                "areas": {a: list(ids) for a, ids in AREA_LANELETS.items()},
                "lanelet_lengths": {lid: lengths[lid]
                                    for ids in AREA_LANELETS.values() for lid in ids},
                "inner_lanelets": [s[0] for s in INNER_SEGMENTS],
            }
        }
    }


# ---------------------------------------------------------------------------
# Trajectory authoring
# ---------------------------------------------------------------------------

def _min_jerk(u: np.ndarray) -> np.ndarray:
    return 10.0 * u ** 3 - 15.0 * u ** 4 + 6.0 * u ** 5


def _min_jerk_rate(u: np.ndarray) -> np.ndarray:
    return 30.0 * u ** 2 - 60.0 * u ** 3 + 30.0 * u ** 4


def _min_jerk_accel(u: np.ndarray) -> np.ndarray:
    return 60.0 * u - 180.0 * u ** 2 + 120.0 * u ** 3


def _lateral_profile(n: int, start_frame: int, lc_frames: int, y0: float,
                     y1: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-jerk lateral ramp from y0 to y1; returns (y, vy, ay)."""
    f = np.arange(n, dtype=float)
    u = np.clip((f - start_frame) / lc_frames, 0.0, 1.0)
    span = y1 - y0
    duration = lc_frames * DT
    y = y0 + span * _min_jerk(u)
    vy = span * _min_jerk_rate(u) / duration
    ay = span * _min_jerk_accel(u) / duration ** 2
    inside = (f >= start_frame) & (f <= start_frame + lc_frames)
    vy[~inside] = 0.0
    ay[~inside] = 0.0
    return y, vy, ay


@dataclass
class _AuthoredVehicle:
    track_id: int
    vehicle_class: str
    length: float
    width: float
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray

    @property
    def half(self) -> float:
        return 0.5 * self.length

    def lanelet_at(self, i: int) -> int | None:
        return assign_lanelet(float(self.x[i]), float(self.y[i]))


def _author_ego(spec: ScenarioSpec, n: int) -> tuple[_AuthoredVehicle, dict]:
    """Ego track plus the schedule facts (key frames) that define it."""
    v = spec.ego_speed
    x0 = -60.0
    x = x0 + v * DT * np.arange(n, dtype=float)

    # F must land exactly on a frame: the minimum-jerk midpoint reaches half
    # the lane change (y = 2) at start + lc_frames/2.
    f_cross_target = int(round((spec.merge_x - x0) / (v * DT)))
    start = f_cross_target - spec.lc_frames // 2
    if start < 1:
        raise ConfigError("merge_x too close to the spawn point")
    y, vy, ay = _lateral_profile(n, start, spec.lc_frames, 0.0, LANE_WIDTH)
    t_f = start + spec.lc_frames // 2

    t_h = None
    if spec.consecutive_lc:
        start2 = start + spec.lc_frames + spec.lc2_delay_frames
        y2, vy2, ay2 = _lateral_profile(n, start2, spec.lc_frames,
                                        LANE_WIDTH, 2.0 * LANE_WIDTH)
        seg = np.arange(n) >= start2
        y = np.where(seg, y2, y)
        vy = np.where(seg, vy2, vy)
        ay = np.where(seg, ay2, ay)
        t_h = start2 + spec.lc_frames // 2
        if t_h >= n - 1:
            raise ConfigError("recording window too short for the second lane change")

    vehicle = _AuthoredVehicle(
        track_id=0, vehicle_class=spec.vehicle_class,
        length=spec.ego_length, width=_CLASS_WIDTHS[spec.vehicle_class],
        x=x, y=y, vx=np.full(n, v), vy=vy, ax=np.zeros(n), ay=ay)
    return vehicle, {"t_f": t_f, "t_h": t_h}


def _author_neighbor(nspec: NeighborSpec, ego: _AuthoredVehicle, t_f: int,
                     half_sum: float, n: int, track_id: int) -> _AuthoredVehicle:
    v_e = float(ego.vx[0])
    center_off = nspec.gap_at_f + half_sum

    if nspec.kind in ("lead", "rear"):
        sign = 1.0 if nspec.kind == "lead" else -1.0
        x = ego.x + sign * center_off
        vx = np.full(n, v_e)
    elif nspec.kind == "overtaker":
        dv = nspec.speed_delta
        if dv <= 0:
            raise ConfigError("overtaker needs a positive speed delta")
        vx = np.full(n, v_e + dv)
        if nspec.slow_after_pass > 0.0:
            # Cut-in profile: ease down 1.2 s before F over 0.4 s, then hold
            # slightly below the ego speed so the ego keeps closing in (the
            # lead TTC stays finite).
            f_slow = t_f - int(round(1.2 / DT))
            ramp = int(round(0.4 / DT))
            target = v_e - nspec.slow_after_pass
            idx = np.arange(n)
            frac = np.clip((idx - f_slow) / ramp, 0.0, 1.0)
            vx = (v_e + dv) + frac * (target - (v_e + dv))
        x = _integrate(vx)
        # Pin the bumper gap at F; the pass (center gap zero) then falls
        # where the authored speed profile puts it.
        x = x - x[t_f] + ego.x[t_f] + center_off
    elif nspec.kind == "overtaken":
        dv = nspec.speed_delta
        if dv <= 0:
            raise ConfigError("overtaken vehicle needs a positive speed deficit")
        vx = np.full(n, v_e - dv)
        x = _integrate(vx)
        x = x - x[t_f] + ego.x[t_f] - center_off
    else:
        raise ConfigError(f"unknown neighbor kind {nspec.kind!r}")

    return _AuthoredVehicle(
        track_id=track_id, vehicle_class="car", length=nspec.length,
        width=_CLASS_WIDTHS["car"],
        x=x, y=np.full(n, 4.0), vx=vx, vy=np.zeros(n),
        ax=np.zeros(n), ay=np.zeros(n))


def _integrate(vx: np.ndarray) -> np.ndarray:
    """Trapezoidal position integration (exact for piecewise-linear speed)."""
    x = np.zeros(len(vx))
    x[1:] = np.cumsum(0.5 * (vx[:-1] + vx[1:]) * DT)
    return x


# ---------------------------------------------------------------------------
# Ground truth from the authored arrays
# ---------------------------------------------------------------------------

def _truth_key_frames(ego: _AuthoredVehicle) -> dict:
    lanelets = [ego.lanelet_at(i) for i in range(len(ego.x))]
    t_b = t_d = t_f = None
    for i, lid in enumerate(lanelets):
        if t_b is None and lid == 101:
            t_b = i
        if t_d is None and lid == 102:
            t_d = i
        if t_f is None and lid in _MAINLINE_SET and i and lanelets[i - 1] in (101, 102, 103):
            t_f = i
            break
    return {"t_b": t_b, "t_d": t_d, "t_f": t_f}


def _truth_snapshot(ego: _AuthoredVehicle, others: list[_AuthoredVehicle],
                    i: int, threshold: float) -> dict:
    lead = rear = None
    lead_gap = rear_gap = None
    alongside = []
    for other in sorted(others, key=lambda o: o.track_id):
        if other.lanelet_at(i) not in _MAINLINE_SET:
            continue
        cg = float(other.x[i] - ego.x[i])
        bumper = abs(cg) - (ego.half + other.half)
        if bumper < 0:
            alongside.append(other.track_id)
        elif bumper <= threshold:
            if cg > 0 and (lead_gap is None or bumper < lead_gap):
                lead, lead_gap = other.track_id, bumper
            elif cg < 0 and (rear_gap is None or bumper < rear_gap):
                rear, rear_gap = other.track_id, bumper
    return {"lead": lead, "rear": rear, "alongside": alongside,
            "lead_gap": lead_gap, "rear_gap": rear_gap}


def _truth_label(snapshots: list[dict]) -> dict:
    final = snapshots[-1]
    lead, rear = final["lead"], final["rear"]
    prior_rear = set()
    prior_lead = set()
    for snap in snapshots[:-1]:
        if snap["rear"] is not None:
            prior_rear.add(snap["rear"])
        if snap["lead"] is not None:
            prior_lead.add(snap["lead"])
        prior_rear.update(snap["alongside"])
        prior_lead.update(snap["alongside"])
    lead_was_rear = lead is not None and lead in prior_rear
    rear_was_lead = rear is not None and rear in prior_lead
    if lead is None and rear is None:
        label = "A"
    elif rear is None:
        label = "C" if lead_was_rear else "B"
    elif lead is None:
        label = "G" if rear_was_lead else "D"
    elif lead_was_rear:
        label = "F"
    elif rear_was_lead:
        label = "H"
    else:
        label = "E"
    return {"label": label, "lead_id": lead, "rear_id": rear,
            "lead_gap": final["lead_gap"], "rear_gap": final["rear_gap"]}


def _truth_min_ttc(ego: _AuthoredVehicle, others: dict[int, _AuthoredVehicle],
                   snapshots: list[dict], t_d: int, t_b: int) -> tuple[float, float]:
    best = {"lead": math.inf, "rear": math.inf}
    for snap_i, snap in enumerate(snapshots):
        i = t_b + snap_i
        if i < t_d:
            continue
        for role in ("lead", "rear"):
            tid = snap[role]
            if tid is None:
                continue
            o = others[tid]
            dp = np.array([ego.x[i] - o.x[i], ego.y[i] - o.y[i]])
            dv = np.array([ego.vx[i] - o.vx[i], ego.vy[i] - o.vy[i]])
            d = float(np.sqrt(dp @ dp))
            d_dot = float(dp @ dv) / d
            if d_dot < 0:
                best[role] = min(best[role], -d / d_dot)
    return best["lead"], best["rear"]


def _truth_edie(vehicles: list[_AuthoredVehicle], area_ids: frozenset[int],
                length: float, t0: int, t1: int) -> dict:
    total_x = 0.0
    frames = 0
    n_veh = 0
    for veh in vehicles:
        counted = False
        for i in range(t0, min(t1, len(veh.x) - 1)):
            if veh.lanelet_at(i) not in area_ids:
                continue
            total_x += float(np.hypot(veh.x[i + 1] - veh.x[i],
                                      veh.y[i + 1] - veh.y[i]))
            frames += 1
            counted = True
        if counted:
            n_veh += 1
    area = length * (t1 - t0) * DT
    total_t = frames * DT
    return {"q": total_x / area, "k": total_t / area,
            "v": (total_x / total_t) if total_t else None,
            "n_vehicles": n_veh}


# ---------------------------------------------------------------------------
# Event and recording assembly
# ---------------------------------------------------------------------------

def generate(spec: ScenarioSpec, track_id_base: int = 1,
             frame_offset: int = 0) -> tuple[list[_AuthoredVehicle], EventTruth]:
    """Author one merge event; returns its vehicles and ground truth.

    The returned arrays start at local frame 0; ``frame_offset`` only
    shifts the frame numbers recorded in the truth (recordings batch
    several temporally disjoint events).
    """
    t_f_est = int(round((spec.merge_x + 60.0) / (spec.ego_speed * DT)))
    after = 50  # two seconds past F
    if spec.consecutive_lc:
        after += spec.lc_frames // 2 + spec.lc2_delay_frames + spec.lc_frames + 25
    n = t_f_est + spec.lc_frames // 2 + after

    ego, sched = _author_ego(spec, n)
    ego.track_id = track_id_base
    t_f = sched["t_f"]

    others: list[_AuthoredVehicle] = []
    for k, nspec in enumerate(spec.neighbors):
        half_sum = 0.5 * (spec.ego_length + nspec.length)
        others.append(_author_neighbor(nspec, ego, t_f, half_sum, n,
                                       track_id_base + 1 + k))

    key = _truth_key_frames(ego)
    if key["t_f"] != t_f:
        raise ConfigError(f"authored merge frame {t_f} disagrees with the "
                          f"assignment scan {key['t_f']}")
    t_b, t_d = key["t_b"], key["t_d"]
    if spec.solid_line:
        if t_d is not None and t_d < t_f:
            raise ConfigError("solid-line spec produced an area-2 frame before F")
        t_d = None

    truth = EventTruth(
        track_id=ego.track_id,
        target_label=spec.target_label,
        vehicle_class=spec.vehicle_class,
        crossed_solid=t_d is None,
        t_B=t_b + frame_offset,
        t_F=t_f + frame_offset,
        t_D=None if t_d is None else t_d + frame_offset,
        t_H=None if sched["t_h"] is None else sched["t_h"] + frame_offset,
        merging_speed=float(np.hypot(ego.vx[t_f], ego.vy[t_f])),
    )
    if t_d is not None:
        dist = float(ego.x[t_f] - ego.x[t_d])
        truth.merging_distance = dist
        truth.distance_ratio = dist / MERGE_WINDOW_LENGTH
        truth.duration = (t_f - t_d) * DT
    if truth.t_H is not None:
        truth.consecutive_lc_duration = (sched["t_h"] - t_f) * DT

    if not spec.solid_line:
        others_by_id = {o.track_id: o for o in others}
        for thr in THRESHOLDS:
            snaps = [_truth_snapshot(ego, others, i, thr)
                     for i in range(t_b, t_f + 1)]
            entry = _truth_label(snaps)
            if t_d is not None:
                ttc_lead, ttc_rear = _truth_min_ttc(ego, others_by_id, snaps,
                                                    t_d, t_b)
                entry["min_ttc_lead"] = ttc_lead
                entry["min_ttc_rear"] = ttc_rear
            truth.per_threshold[thr] = entry
        base = truth.per_threshold[THRESHOLDS[0]]["label"]
        if base != spec.target_label:
            raise ConfigError(f"spec targeted {spec.target_label} but the "
                              f"schedule yields {base} at the base threshold")

    everything = [ego, *others]
    truth.edie = {
        "upstream": _truth_edie(everything, frozenset(AREA_LANELETS[4]),
                                AREA4_LENGTH, t_b, t_f),
        "downstream": _truth_edie(everything, frozenset(AREA_LANELETS[5]),
                                  AREA5_LENGTH, t_b, t_f),
    }
    return everything, truth


def _vehicle_to_track(veh: _AuthoredVehicle, ego: _AuthoredVehicle | None,
                      frame_offset: int) -> Track:
    n = len(veh.x)
    frames_idx = np.arange(frame_offset, frame_offset + n, dtype=np.int64)
    lanelets = [(lid,) if (lid := veh.lanelet_at(i)) is not None else ()
                for i in range(n)]
    lat = np.array([veh.y[i] - _lane_center(lanelets[i][0]) if lanelets[i]
                    else np.nan for i in range(n)])
    lane_change = np.zeros(n, dtype=bool)
    for i in range(1, n):
        if lanelets[i] and lanelets[i - 1] and lanelets[i][0] != lanelets[i - 1][0]:
            prev_c = _lane_center(lanelets[i - 1][0])
            cur_c = _lane_center(lanelets[i][0])
            if prev_c != cur_c:
                lane_change[i] = True

    heading_deg = np.degrees(np.arctan2(veh.vy, veh.vx))
    neighbors = {slot: np.zeros(n, dtype=np.int64) for slot in NEIGHBOR_COLUMNS}

    meta = TrackMeta(track_id=veh.track_id, vehicle_class=veh.vehicle_class,
                     length=veh.length, width=veh.width,
                     first_frame=int(frames_idx[0]), last_frame=int(frames_idx[-1]))
    return Track(meta, frames_idx, veh.x.copy(), veh.y.copy(), heading_deg,
                 veh.vx.copy(), veh.vy.copy(), veh.ax.copy(), veh.ay.copy(),
                 lat, lane_change, lanelets, neighbors,
                 has_neighbor_fields=True)


def _fill_ego_neighbor_fields(ego_track: Track, ego: _AuthoredVehicle,
                              others: list[_AuthoredVehicle]):
    """Write the dataset-style neighbor-id columns onto the ego track.

    Left-side slots while the ego is on the ramp, in-lane slots once on
    the mainline; candidate roles use the same bumper-gap convention as
    the matcher so the dataset-field and geometric paths agree exactly.
    """
    n = len(ego.x)
    for i in range(n):
        snap = _truth_snapshot(ego, others, i, math.inf)
        on_ramp = ego.y[i] < 2.0
        lead_slot = "left_lead" if on_ramp else "lead"
        rear_slot = "left_rear" if on_ramp else "rear"
        side_slot = "left_alongside" if on_ramp else "right_alongside"
        if snap["lead"] is not None:
            ego_track.neighbors[lead_slot][i] = snap["lead"]
        if snap["rear"] is not None:
            ego_track.neighbors[rear_slot][i] = snap["rear"]
        if snap["alongside"]:
            ego_track.neighbors[side_slot][i] = snap["alongside"][0]


def build_recording(specs: list[ScenarioSpec], recording_id: int,
                    use_neighbor_fields: bool = True
                    ) -> tuple[RecordingMeta, list[Track], list[EventTruth]]:
    """Assemble temporally disjoint events into one recording."""
    meta = RecordingMeta(recording_id=recording_id,
                         location_id=SYNTH_LOCATION_ID, frame_rate=FRAME_RATE)
    tracks: list[Track] = []
    truths: list[EventTruth] = []
    frame_cursor = 0
    track_cursor = 1
    for spec in specs:
        vehicles, truth = generate(spec, track_id_base=track_cursor,
                                   frame_offset=frame_cursor)
        ego, others = vehicles[0], vehicles[1:]
        ego_track = _vehicle_to_track(ego, None, frame_cursor)
        if use_neighbor_fields:
            _fill_ego_neighbor_fields(ego_track, ego, others)
        tracks.append(ego_track)
        tracks.extend(_vehicle_to_track(o, ego, frame_cursor) for o in others)
        truths.append(truth)
        track_cursor += 1 + len(others)
        frame_cursor += len(ego.x) + 25   # one-second gap between blocks
    tracks.sort(key=lambda t: t.track_id)
    return meta, tracks, truths


# ---------------------------------------------------------------------------
# Randomized spec batches
# ---------------------------------------------------------------------------

def _rand_range(rng: np.random.Generator, lo_hi: tuple[float, float]) -> float:
    return float(rng.uniform(*lo_hi))


def spec_for_label(label: str, seed: int,
                   threshold_sensitive: bool = False) -> ScenarioSpec:
    """A randomized but consistent spec that yields ``label`` at 100 m.

    With ``threshold_sensitive`` some absent roles are placed in the
    110-185 m bands instead, so the label upgrades as the threshold grows.
    Role-swap labels (C/F/G/H) sample the merge window first and size the
    overtake so the pass always falls inside it with margin.
    """
    rng = np.random.default_rng(seed)
    swap = label in ("C", "F", "G", "H")

    # Role swaps need a long observation window and a car-sized ego so the
    # pass plus margins fit between B and F.
    vclass = "car" if swap else str(
        rng.choice(["car", "truck", "van"], p=[0.8, 0.1, 0.1]))
    ego_len = _rand_range(rng, _CLASS_LENGTHS[vclass])
    if swap:
        ego_speed = _rand_range(rng, (21.0, 25.0))
        window = _rand_range(rng, (5.8, min(7.4, 166.0 / ego_speed)))
        merge_x = ego_speed * window
    else:
        ego_speed = _rand_range(rng, (21.0, 31.0))
        has_lead = label in ("B", "E")
        merge_x = _rand_range(rng, (85.0, 130.0) if has_lead else (85.0, 200.0))
        window = merge_x / ego_speed
    lc_frames = 2 * int(rng.integers(38, 56))
    half_pair = 0.5 * (ego_len + 4.6)

    neighbors: list[NeighborSpec] = []
    if label in ("B", "E"):
        # Leads must stay inside area 5 at F: x_F + gap + halves < 220.
        lead_cap = min(GAP_NEAR[1], 212.0 - merge_x - half_pair)
        neighbors.append(NeighborSpec("lead", _rand_range(rng, (GAP_NEAR[0], lead_cap))))
    if label == "H":
        lead_cap = min(60.0, 212.0 - merge_x - half_pair)
        neighbors.append(NeighborSpec("lead", _rand_range(rng, (20.0, lead_cap))))
    if label in ("D", "E"):
        neighbors.append(NeighborSpec("rear", _rand_range(rng, GAP_NEAR)))
    if label in ("C", "F"):
        dv = _rand_range(rng, (4.5, 6.5))
        slow = _rand_range(rng, (0.6, 1.0)) if label == "F" else 0.0
        # The pass must land at least 1.2 s after B; the cut-in slowdown
        # adds its own 1.2 s tail before F.
        slack = 2.4 if slow else 1.2
        budget = dv * (window - slack) - half_pair - slow
        gap = _rand_range(rng, (3.0, max(4.0, min(24.0, budget))))
        neighbors.append(NeighborSpec("overtaker", gap, speed_delta=dv,
                                      slow_after_pass=slow))
    if label == "F":
        neighbors.append(NeighborSpec("rear", _rand_range(rng, (35.0, 80.0))))
    if label in ("G", "H"):
        dv = _rand_range(rng, (3.6, 5.0))
        budget = dv * (window - 1.6) - half_pair
        gap = _rand_range(rng, (4.0, max(5.0, min(10.0, budget))))
        neighbors.append(NeighborSpec("overtaken", gap, speed_delta=dv))

    if threshold_sensitive and label in ("A", "B"):
        band = GAP_MID_REAR if rng.integers(2) else GAP_FAR_REAR
        neighbors.append(NeighborSpec("rear", _rand_range(rng, band)))
    if threshold_sensitive and label == "A" and merge_x <= 100.0 and rng.integers(2):
        neighbors.append(NeighborSpec("lead", _rand_range(rng, GAP_MID_LEAD)))

    return ScenarioSpec(
        target_label=label, seed=seed, ego_speed=ego_speed,
        vehicle_class=vclass, ego_length=ego_len, merge_x=merge_x,
        lc_frames=lc_frames,
        consecutive_lc=bool(rng.random() < 0.25),
        lc2_delay_frames=int(rng.integers(40, 90)),
        neighbors=tuple(neighbors))


def random_specs(n_events: int, seed: int,
                 threshold_sensitive: bool = False,
                 solid_share: float = 0.04) -> list[ScenarioSpec]:
    """A batch covering all eight labels (cycled) plus a few solid-line merges."""
    rng = np.random.default_rng(seed)
    labels = ["A", "B", "C", "D", "E", "F", "G", "H"]
    specs: list[ScenarioSpec] = []
    for i in range(n_events):
        sub_seed = int(rng.integers(0, 2 ** 31))
        if rng.random() < solid_share:
            sub = np.random.default_rng(sub_seed)
            specs.append(ScenarioSpec(
                target_label="A", seed=sub_seed,
                ego_speed=float(sub.uniform(21.0, 31.0)),
                merge_x=float(sub.uniform(15.0, 50.0)),
                lc_frames=2 * int(sub.integers(38, 56)),
                solid_line=True))
        else:
            specs.append(spec_for_label(labels[i % len(labels)], sub_seed,
                                        threshold_sensitive))
    return specs


# ---------------------------------------------------------------------------
# Corpus on disk
# ---------------------------------------------------------------------------

def _truth_to_json(truth: EventTruth) -> dict:
    return {
        "track_id": truth.track_id,
        "target_label": truth.target_label,
        "vehicle_class": truth.vehicle_class,
        "crossed_solid": truth.crossed_solid,
        "t_B": truth.t_B, "t_D": truth.t_D, "t_F": truth.t_F, "t_H": truth.t_H,
        "merging_distance": truth.merging_distance,
        "distance_ratio": truth.distance_ratio,
        "duration": truth.duration,
        "merging_speed": truth.merging_speed,
        "consecutive_lc_duration": truth.consecutive_lc_duration,
        "per_threshold": {str(k): v for k, v in truth.per_threshold.items()},
        "edie": truth.edie,
    }


def build_corpus(out_dir: str | Path, n_events: int, seed: int,
                 events_per_recording: int = 50,
                 threshold_sensitive: bool = False) -> Path:
    """Write a complete synthetic corpus: map, layout, recordings, truth.

    Layout:
        maps/99_map.osm        layout.yaml
        data/NN_{recordingMeta,tracksMeta,tracks}.csv
        ground_truth/NN_truth.json
    """
    out_dir = Path(out_dir)
    (out_dir / "maps").mkdir(parents=True, exist_ok=True)
    (out_dir / "data").mkdir(exist_ok=True)
    (out_dir / "ground_truth").mkdir(exist_ok=True)

    (out_dir / "maps" / f"{SYNTH_LOCATION_ID}_map.osm").write_bytes(toy_map_xml())
    import yaml as _yaml
    (out_dir / "layout.yaml").write_text(
        _yaml.safe_dump(toy_layout_dict(), sort_keys=True), encoding="utf-8")

    specs = random_specs(n_events, seed, threshold_sensitive)
    rec_id = 0
    for start in range(0, len(specs), events_per_recording):
        chunk = specs[start:start + events_per_recording]
        meta, tracks, truths = build_recording(chunk, rec_id)
        write_recording(meta, tracks, out_dir / "data")
        payload = [_truth_to_json(t) for t in truths]
        (out_dir / "ground_truth" / f"{rec_id:02d}_truth.json").write_text(
            json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
        rec_id += 1
    return out_dir


def load_truths(corpus_dir: str | Path) -> dict[tuple[int, int], dict]:
    """Ground truth of a corpus keyed by (recording_id, track_id)."""
    out: dict[tuple[int, int], dict] = {}
    for path in sorted(Path(corpus_dir, "ground_truth").glob("*_truth.json")):
        rec_id = int(path.name.split("_")[0])
        for entry in json.loads(path.read_text(encoding="utf-8")):
            out[(rec_id, entry["track_id"])] = entry
    return out
