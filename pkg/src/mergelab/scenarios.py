"""Neighbor matching on the outer mainline lane and scenario labeling.

Over the window from position B to position F, the ego's nearest lead,
rear, and alongside vehicles on the outer mainline lane (areas 4/5) are
tracked under a longitudinal DISTANCE threshold.  Gaps are bumper to
bumper on the mainline chain axis.  The final roles at F plus the role
history over [B, F) map each merge onto one of eight scenario labels:

    A  no rear, no lead              E  rear and lead, no role change
    B  lead only, no role change     F  rear present, lead was rear/alongside
    C  lead only, was rear/alongside G  rear was lead/alongside, no lead
    D  rear only, no role change     H  rear was lead/alongside, lead present

Dataset-provided neighbor-id fields take precedence when available; the
geometric fallback matches on chain coordinates and must agree with them
on data that carries both.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError
from .events import MergingEvent
from .map_model import ChainGeometry, LaneletMap, MergingAreaLayout
from .trajectory import Track

logger = logging.getLogger(__name__)

SCENARIO_LABELS = ("A", "B", "C", "D", "E", "F", "G", "H")

DEFAULT_THRESHOLDS = (100.0, 150.0, 200.0)

_RAMP_AREAS = frozenset({1, 2, 3})
_MAINLINE_AREAS = frozenset({4, 5})


@dataclass(frozen=True)
class NeighborSnapshot:
    """Lead/rear/alongside assignment of one frame (gaps bumper to bumper)."""

    frame: int
    lead_id: int | None = None
    rear_id: int | None = None
    alongside_ids: tuple[int, ...] = ()
    lead_gap: float | None = None
    rear_gap: float | None = None


@dataclass
class NeighborTimeline:
    """Per-frame neighbor snapshots of one event over [t_B, t_F]."""

    event: MergingEvent
    distance_threshold: float
    snapshots: list[NeighborSnapshot] = field(default_factory=list)

    @property
    def final(self) -> NeighborSnapshot:
        return self.snapshots[-1]


class TrackIndex:
    """Read-only per-recording index of outer-mainline occupancy.

    For every track it precomputes which frames sit on area-4/5 lanelets
    and, when a map is available, the chain coordinate of every frame
    (projected onto the concatenated area-4+5 centerline, which also gives
    ramp vehicles a longitudinal position on the mainline axis).
    """

    def __init__(self, tracks: list[Track], layout: MergingAreaLayout,
                 lanelet_map: LaneletMap | None = None):
        self.layout = layout
        self.tracks_by_id = {tr.track_id: tr for tr in tracks}
        self.chain = (ChainGeometry.from_map(lanelet_map, layout, (4, 5))
                      if lanelet_map is not None else None)
        mainline_ids = layout.area_lanelet_set((4, 5))

        self._mainline_mask: dict[int, np.ndarray] = {}
        self._chain_s: dict[int, np.ndarray] = {}
        occupants: dict[int, list[tuple[int, float, float]]] = {}
        for tr in tracks:
            mask = np.fromiter(
                (bool(mainline_ids.intersection(ids)) for ids in tr.lanelet_lists),
                dtype=bool, count=len(tr))
            self._mainline_mask[tr.track_id] = mask
            if self.chain is not None:
                s, _ = self.chain.project(np.column_stack([tr.x, tr.y]))
                self._chain_s[tr.track_id] = s
            if not mask.any():
                continue
            s_arr = self._chain_s.get(tr.track_id)
            half = 0.5 * tr.meta.length
            for i in np.flatnonzero(mask):
                frame = int(tr.frames_idx[i])
                s_val = float(s_arr[i]) if s_arr is not None else float("nan")
                occupants.setdefault(frame, []).append((tr.track_id, s_val, half))
        # Sorted by track id so equidistant candidates resolve deterministically.
        self._occupants = {f: sorted(v) for f, v in occupants.items()}

    def on_mainline(self, track_id: int, frame: int) -> bool:
        tr = self.tracks_by_id.get(track_id)
        if tr is None or not tr.covers(frame):
            return False
        return bool(self._mainline_mask[track_id][tr.index_of(frame)])

    def chain_coordinate(self, track_id: int, frame: int) -> float:
        if self.chain is None:
            raise ConfigError("chain coordinates require a map")
        tr = self.tracks_by_id[track_id]
        return float(self._chain_s[track_id][tr.index_of(frame)])

    def occupants_at(self, frame: int) -> list[tuple[int, float, float]]:
        return self._occupants.get(frame, [])


def _heading_gap(ego: Track, frame: int, other: Track) -> float:
    """Longitudinal center gap via projection onto the ego heading.

    Fallback for map-less runs where no chain geometry exists."""
    ex, ey = ego.center_at(frame)
    ox, oy = other.center_at(frame)
    h = np.radians(ego.heading_deg[ego.index_of(frame)])
    return float((ox - ex) * np.cos(h) + (oy - ey) * np.sin(h))


def _snapshot_from_candidates(frame: int, candidates: list[tuple[int, float, float]],
                              threshold: float) -> NeighborSnapshot:
    """Pick lead/rear/alongside from (track_id, center_gap, half_len_sum) triples."""
    lead_id = rear_id = None
    lead_gap = rear_gap = None
    alongside: list[int] = []
    for tid, center_gap, half_sum in candidates:
        bumper = abs(center_gap) - half_sum
        if bumper < 0.0:
            alongside.append(tid)
            continue
        if bumper > threshold:
            continue
        if center_gap > 0.0:
            if lead_gap is None or bumper < lead_gap - 1e-12:
                lead_id, lead_gap = tid, bumper
            elif lead_gap is not None and abs(bumper - lead_gap) <= 1e-12 and tid < lead_id:
                lead_id = tid
        else:
            if rear_gap is None or bumper < rear_gap - 1e-12:
                rear_id, rear_gap = tid, bumper
            elif rear_gap is not None and abs(bumper - rear_gap) <= 1e-12 and tid < rear_id:
                rear_id = tid
    return NeighborSnapshot(frame, lead_id, rear_id, tuple(sorted(alongside)),
                            lead_gap, rear_gap)


def match_neighbors(event: MergingEvent, index: TrackIndex,
                    distance_threshold: float,
                    use_dataset_fields: bool = True) -> NeighborTimeline:
    """Build the neighbor timeline of one event over [t_B, t_F].

    Candidates are vehicles whose center sits on area-4/5 lanelets.  With
    ``use_dataset_fields`` the recording's own neighbor-id columns pick the
    candidates (left-side slots while the ego is on the ramp, in-lane slots
    once it is on the mainline); the threshold is applied on top.  The
    geometric path selects the nearest candidates by chain gap directly.
    """
    if distance_threshold <= 0:
        raise ConfigError(f"distance threshold must be positive, got {distance_threshold}")
    ego = index.tracks_by_id[event.track_id]
    timeline = NeighborTimeline(event, distance_threshold)
    dataset_path = use_dataset_fields and ego.has_neighbor_fields

    for frame in range(event.t_B, event.t_F + 1):
        if dataset_path:
            snap = _dataset_snapshot(event, ego, index, frame, distance_threshold)
        else:
            snap = _geometric_snapshot(event, ego, index, frame, distance_threshold)
        timeline.snapshots.append(snap)
    return timeline


def _center_gap(ego: Track, index: TrackIndex, frame: int, other_id: int) -> float:
    if index.chain is not None:
        return (index.chain_coordinate(other_id, frame)
                - index.chain_coordinate(ego.track_id, frame))
    return _heading_gap(ego, frame, index.tracks_by_id[other_id])


def _dataset_snapshot(event: MergingEvent, ego: Track, index: TrackIndex,
                      frame: int, threshold: float) -> NeighborSnapshot:
    on_ramp = not index.on_mainline(ego.track_id, frame)
    slots = (("left_lead", "left_rear", ("left_alongside",)) if on_ramp
             else ("lead", "rear", ()))
    lead_slot, rear_slot, alongside_slots = slots

    half_ego = 0.5 * ego.meta.length
    candidates: list[tuple[int, float, float]] = []
    seen: set[int] = set()
    for slot in (lead_slot, rear_slot, *alongside_slots):
        tid = ego.neighbor_at(frame, slot)
        if tid is None or tid in seen or not index.on_mainline(tid, frame):
            continue
        seen.add(tid)
        other = index.tracks_by_id[tid]
        gap = _center_gap(ego, index, frame, tid)
        candidates.append((tid, gap, half_ego + 0.5 * other.meta.length))
    return _snapshot_from_candidates(frame, sorted(candidates), threshold)


def _geometric_snapshot(event: MergingEvent, ego: Track, index: TrackIndex,
                        frame: int, threshold: float) -> NeighborSnapshot:
    if index.chain is None:
        raise ConfigError("geometric neighbor matching requires a map; the "
                          "recording carries no neighbor-id columns")
    ego_s = index.chain_coordinate(ego.track_id, frame)
    half_ego = 0.5 * ego.meta.length
    candidates = [(tid, s - ego_s, half_ego + half)
                  for tid, s, half in index.occupants_at(frame)
                  if tid != ego.track_id]
    return _snapshot_from_candidates(frame, candidates, threshold)


@dataclass(frozen=True)
class ScenarioLabel:
    value: str

    def __post_init__(self):
        if self.value not in SCENARIO_LABELS:
            raise ValueError(f"unknown scenario label {self.value!r}")


def classify_scenario(timeline: NeighborTimeline) -> ScenarioLabel:
    """Label one event from its neighbor timeline.

    Role changes are read over [t_B, t_F): "rear to lead" holds when the
    final lead appeared earlier as the ego's rear or alongside vehicle,
    "lead to rear" when the final rear appeared earlier as lead or
    alongside.  Identity is tracked, so vehicles that leave the threshold
    range and re-enter keep their history.
    """
    if not timeline.snapshots:
        raise ValueError("cannot classify an empty timeline")
    final = timeline.final
    lead, rear = final.lead_id, final.rear_id

    prior_rear_or_alongside: set[int] = set()
    prior_lead_or_alongside: set[int] = set()
    for snap in timeline.snapshots[:-1]:
        if snap.rear_id is not None:
            prior_rear_or_alongside.add(snap.rear_id)
        if snap.lead_id is not None:
            prior_lead_or_alongside.add(snap.lead_id)
        for tid in snap.alongside_ids:
            prior_rear_or_alongside.add(tid)
            prior_lead_or_alongside.add(tid)

    lead_was_rear = lead is not None and lead in prior_rear_or_alongside
    rear_was_lead = rear is not None and rear in prior_lead_or_alongside

    if lead is None and rear is None:
        label = "A"
    elif rear is None:
        label = "C" if lead_was_rear else "B"
    elif lead is None:
        label = "G" if rear_was_lead else "D"
    elif lead_was_rear:
        # A simultaneous rear-to-lead swap dominates: the overtaking vehicle
        # defines the interaction (same reading as the single-lead rows).
        label = "F"
    elif rear_was_lead:
        label = "H"
    else:
        label = "E"
    return ScenarioLabel(label)


@dataclass(frozen=True)
class ScenarioRecord:
    """One classified (event, threshold) pair, ready for table emission."""

    recording_id: int
    track_id: int
    location_id: int
    vehicle_class: str
    distance_threshold: float
    label: str
    lead_id: int | None
    rear_id: int | None
    lead_was_rear: bool
    rear_was_lead: bool


def classify_event(event: MergingEvent, index: TrackIndex, threshold: float,
                   use_dataset_fields: bool = True) -> tuple[NeighborTimeline, ScenarioRecord]:
    timeline = match_neighbors(event, index, threshold, use_dataset_fields)
    label = classify_scenario(timeline)
    final = timeline.final
    prior_r = {s.rear_id for s in timeline.snapshots[:-1] if s.rear_id is not None}
    prior_l = {s.lead_id for s in timeline.snapshots[:-1] if s.lead_id is not None}
    for s in timeline.snapshots[:-1]:
        prior_r.update(s.alongside_ids)
        prior_l.update(s.alongside_ids)
    record = ScenarioRecord(
        recording_id=event.recording_id,
        track_id=event.track_id,
        location_id=event.location_id,
        vehicle_class=event.vehicle_class,
        distance_threshold=threshold,
        label=label.value,
        lead_id=final.lead_id,
        rear_id=final.rear_id,
        lead_was_rear=final.lead_id in prior_r if final.lead_id is not None else False,
        rear_was_lead=final.rear_id in prior_l if final.rear_id is not None else False,
    )
    return timeline, record


def scenario_count_table(records: pd.DataFrame,
                         thresholds=DEFAULT_THRESHOLDS) -> pd.DataFrame:
    """Long-format scenario counts with shares, including 'all' rollups.

    ``records`` needs columns location_id, vehicle_class,
    distance_threshold, label.
    """
    columns = ["location_id", "vehicle_class", "distance_threshold",
               "scenario", "count", "share_pct"]
    if records.empty:
        return pd.DataFrame(columns=columns)

    def _count(df: pd.DataFrame, location, vclass) -> list[dict]:
        out = []
        for thr in thresholds:
            sub = df[df["distance_threshold"] == thr]
            total = len(sub)
            by_label = sub.groupby("label").size()
            for lab in SCENARIO_LABELS:
                cnt = int(by_label.get(lab, 0))
                share = 100.0 * cnt / total if total else 0.0
                out.append({"location_id": location, "vehicle_class": vclass,
                            "distance_threshold": thr, "scenario": lab,
                            "count": cnt, "share_pct": share})
        return out

    rows: list[dict] = []
    rows += _count(records, "all", "all")
    for loc, df_loc in records.groupby("location_id"):
        rows += _count(df_loc, loc, "all")
        for vc, df_vc in df_loc.groupby("vehicle_class"):
            rows += _count(df_vc, loc, vc)
    for vc, df_vc in records.groupby("vehicle_class"):
        rows += _count(df_vc, "all", vc)
    return pd.DataFrame(rows, columns=columns)
