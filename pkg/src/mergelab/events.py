"""Route classification and merge key-position detection.

A merging trajectory is segmented by the areas its assigned lanelets
belong to: position B is the first frame on the acceleration lane
(area 1), D the first frame past the solid/dashed divide (area 2), and F
the first frame whose assignment switches from the acceleration lane
(areas 1-3) to the outer mainline (areas 4/5).  F is confirmed against the
preceding LOOKBACK frames to reject assignment jitter, and cross-checked
against the sign jump of the lateral lane-center offset.  H, when present,
is the subsequent leftward lane change from the outer to the inner
mainline lane.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .map_model import MergingAreaLayout
from .trajectory import Track

logger = logging.getLogger(__name__)

DEFAULT_LOOKBACK = 5

ROUTE_MAINLINE = "mainline"
ROUTE_ON_RAMP = "on_ramp_merging"
ROUTE_OFF_RAMP = "off_ramp"
ROUTE_OTHER = "other"

_RAMP_AREAS = frozenset({1, 2, 3})
_MAINLINE_AREAS = frozenset({4, 5})

# Minimum magnitude for an offset sign jump to count as a lane switch;
# consecutive-frame noise stays well below half a lane width.
_JUMP_MIN = 1.0


@dataclass(frozen=True)
class MergingEvent:
    """One completed merge with its key frames."""

    recording_id: int
    track_id: int
    location_id: int
    vehicle_class: str
    t_B: int
    t_F: int
    t_D: int | None = None
    t_E: int | None = None
    t_G: int | None = None
    t_H: int | None = None
    crossed_solid: bool = False
    merge_x: float = float("nan")
    merge_y: float = float("nan")

    def __post_init__(self):
        if self.t_D is None:
            if not self.crossed_solid:
                raise ValueError("t_D may only be absent for solid-line merges")
        else:
            if not (self.t_B <= self.t_D < self.t_F):
                raise ValueError(f"key frames out of order: B={self.t_B} "
                                 f"D={self.t_D} F={self.t_F}")
        if self.t_H is not None and self.t_H <= self.t_F:
            raise ValueError(f"t_H={self.t_H} must follow t_F={self.t_F}")

    @property
    def event_id(self) -> str:
        return f"{self.recording_id}-{self.track_id}"


@dataclass(frozen=True)
class Rejection:
    recording_id: int
    track_id: int
    reason: str


def _area_codes(track: Track, layout: MergingAreaLayout) -> np.ndarray:
    """Per-frame area code: 1..5, or 0 when the assignment is outside the areas.

    Multi-lanelet cells resolve to the first listed id's area; when that id
    is unmapped the remaining ids are consulted in order.
    """
    codes = np.zeros(len(track), dtype=np.int64)
    for i, ids in enumerate(track.lanelet_lists):
        for lid in ids:
            areas = layout.areas_of(lid)
            if areas:
                # A lanelet shared between areas (solid-lane stub labeled in
                # both 1 and 4) counts as the ramp side for the merging
                # vehicle and the mainline side for occupancy queries.
                codes[i] = areas[0]
                break
    return codes


def classify_route(track: Track, layout: MergingAreaLayout) -> str:
    """Classify a track as mainline / on-ramp merging / off-ramp / other."""
    codes = _area_codes(track, layout)
    ramp_idx = np.flatnonzero(np.isin(codes, list(_RAMP_AREAS)))
    main_idx = np.flatnonzero(np.isin(codes, list(_MAINLINE_AREAS)))

    if ramp_idx.size:
        later_main = main_idx[main_idx > ramp_idx[0]]
        if later_main.size:
            return ROUTE_ON_RAMP
        return ROUTE_OTHER
    if main_idx.size:
        if layout.off_ramp_lanelets:
            off = set(layout.off_ramp_lanelets)
            for i, ids in enumerate(track.lanelet_lists):
                if i > main_idx[0] and off.intersection(ids):
                    return ROUTE_OFF_RAMP
        return ROUTE_MAINLINE
    return ROUTE_OTHER


def _collapse_flag_frames(flag_frames: np.ndarray, lookback: int) -> list[int]:
    """Collapse runs of lane-change flags closer than ``lookback`` frames."""
    kept: list[int] = []
    for f in flag_frames:
        if not kept or f - kept[-1] > lookback:
            kept.append(int(f))
    return kept


def detect_key_positions(track: Track, layout: MergingAreaLayout,
                         lookback: int = DEFAULT_LOOKBACK,
                         recording_id: int = 0) -> MergingEvent | Rejection:
    """Detect B/D/E/F/(G)/H for an on-ramp merging track.

    Returns a :class:`Rejection` with a machine-readable reason when the
    merge does not complete inside the recording.
    """
    codes = _area_codes(track, layout)
    frames = track.frames_idx
    n = len(track)

    # t_F: first switch from the ramp areas to the mainline areas, with the
    # available preceding frames (up to `lookback`) all on the ramp side.
    idx_f = None
    for i in range(1, n):
        if codes[i] in _MAINLINE_AREAS and codes[i - 1] in _RAMP_AREAS:
            lo = max(0, i - lookback)
            if all(c in _RAMP_AREAS for c in codes[lo:i]):
                idx_f = i
                break
    if idx_f is None:
        return Rejection(recording_id, track.track_id, "merge_incomplete")

    t_f = int(frames[idx_f])

    area1 = np.flatnonzero(codes[:idx_f] == 1)
    if area1.size:
        idx_b = int(area1[0])
    else:
        ramp = np.flatnonzero(np.isin(codes[:idx_f], list(_RAMP_AREAS)))
        idx_b = int(ramp[0])
    t_b = int(frames[idx_b])

    area2 = np.flatnonzero(codes[:idx_f] == 2)
    if area2.size:
        idx_d = int(area2[0])
        t_d = int(frames[idx_d])
        crossed_solid = False
    else:
        idx_d, t_d = None, None
        crossed_solid = True

    _offset_cross_check(track, idx_f, t_f)

    t_e = None
    if idx_d is not None:
        t_e = _detect_steering_onset(track, idx_d, idx_f, lookback)

    t_h = _detect_inner_lane_change(track, layout, codes, idx_f, lookback)

    cx, cy = track.center_at(t_f)
    return MergingEvent(
        recording_id=recording_id,
        track_id=track.track_id,
        location_id=layout.location_id,
        vehicle_class=track.meta.vehicle_class,
        t_B=t_b, t_D=t_d, t_F=t_f, t_E=t_e, t_H=t_h,
        crossed_solid=crossed_solid,
        merge_x=cx, merge_y=cy,
    )


def _offset_cross_check(track: Track, idx_f: int, t_f: int):
    """Warn when the offset sign jump disagrees with the area switch by > 2 frames."""
    off = track.lat_offset
    if np.isnan(off).all():
        return
    jumps = _leftward_jumps(off)
    if not jumps.size:
        logger.warning("track %s: area switch at frame %s has no offset sign "
                       "jump to confirm it", track.track_id, t_f)
        return
    nearest = int(jumps[np.argmin(np.abs(jumps - idx_f))])
    if abs(nearest - idx_f) > 2:
        logger.warning("track %s: offset sign jump at frame %s disagrees with "
                       "area switch at frame %s", track.track_id,
                       int(track.frames_idx[nearest]), t_f)


def _leftward_jumps(off: np.ndarray) -> np.ndarray:
    """Indices where the lateral offset jumps from positive to negative."""
    prev, cur = off[:-1], off[1:]
    mask = (prev > 0) & (cur < 0) & ((prev - cur) > _JUMP_MIN)
    return np.flatnonzero(mask) + 1


def _detect_steering_onset(track: Track, idx_d: int, idx_f: int,
                           lookback: int) -> int | None:
    """First frame in [D, F) where the offset rises monotonically for
    ``lookback`` consecutive steps (informational only)."""
    off = track.lat_offset
    if np.isnan(off[idx_d:idx_f]).any():
        return None
    for i in range(idx_d, idx_f - lookback):
        window = off[i:i + lookback + 1]
        if np.all(np.diff(window) > 0):
            return int(track.frames_idx[i])
    return None


def _detect_inner_lane_change(track: Track, layout: MergingAreaLayout,
                              codes: np.ndarray, idx_f: int,
                              lookback: int) -> int | None:
    """First leftward lane change after F (outer mainline to inner lane)."""
    flag_idx = np.flatnonzero(track.lane_change)
    candidates: list[int] = []
    if flag_idx.size:
        for i in _collapse_flag_frames(flag_idx, lookback):
            if i <= idx_f + lookback:
                continue  # flags belonging to the merge itself
            candidates.append(i)
    else:
        jumps = _leftward_jumps(track.lat_offset)
        candidates = [int(j) for j in jumps if j > idx_f + 1]

    inner = set(layout.inner_lanelets)
    for i in candidates:
        off = track.lat_offset
        leftward = (i > 0 and not np.isnan(off[i - 1]) and not np.isnan(off[i])
                    and off[i - 1] > 0 and off[i] < 0)
        left_chain = codes[i] == 0  # left the labeled outer-lane areas
        if inner and set(track.lanelet_lists[i]).intersection(inner):
            return int(track.frames_idx[i])
        if leftward and (left_chain or not inner):
            return int(track.frames_idx[i])
    return None


def count_solid_line_merges(events: list[MergingEvent]) -> pd.DataFrame:
    """Count solid-line (area 1) merges per location and vehicle class."""
    rows = [{"location_id": e.location_id, "vehicle_class": e.vehicle_class}
            for e in events if e.crossed_solid]
    if not rows:
        return pd.DataFrame(columns=["location_id", "vehicle_class", "count"])
    df = pd.DataFrame(rows)
    out = (df.groupby(["location_id", "vehicle_class"]).size()
           .rename("count").reset_index())
    return out.sort_values(["location_id", "vehicle_class"]).reset_index(drop=True)
