"""Recording ingest: recordingMeta / tracksMeta / tracks CSV triples.

The column names follow the drone-dataset convention (trackId, frame,
xCenter, yCenter, laneletId, latLaneCenterOffset, laneChange, leadId,
rearId, leftLeadId, ... ).  Only trackId/frame/xCenter/yCenter are
mandatory in the tracks file; velocities and accelerations fall back to
finite differences when absent.  Tracks store the raw column values
column-wise and are immutable once parsed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import IntegrityError, SchemaError

logger = logging.getLogger(__name__)

# Neighbor slots in the tracks file; cell values <= 0 or empty mean "absent".
NEIGHBOR_FIELDS = ("lead", "rear", "left_lead", "right_lead",
                   "left_alongside", "right_alongside", "left_rear", "right_rear")

NEIGHBOR_COLUMNS = {
    "lead": "leadId",
    "rear": "rearId",
    "left_lead": "leftLeadId",
    "right_lead": "rightLeadId",
    "left_alongside": "leftAlongsideId",
    "right_alongside": "rightAlongsideId",
    "left_rear": "leftRearId",
    "right_rear": "rightRearId",
}

VEHICLE_CLASSES = ("car", "truck", "van")

_TRACKS_MANDATORY = ("trackId", "frame", "xCenter", "yCenter")
_TRACKS_META_MANDATORY = ("trackId", "initialFrame", "finalFrame",
                          "width", "length", "class")
_RECORDING_MANDATORY = ("recordingId", "locationId", "frameRate")


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: int
    location_id: int
    frame_rate: float
    origin_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise IntegrityError(f"recording {self.recording_id}: frame rate "
                                 f"must be positive, got {self.frame_rate}")

    @property
    def timestep(self) -> float:
        return 1.0 / self.frame_rate


@dataclass(frozen=True)
class TrackMeta:
    track_id: int
    vehicle_class: str
    length: float
    width: float
    first_frame: int
    last_frame: int

    def __post_init__(self):
        if self.first_frame > self.last_frame:
            raise IntegrityError(f"track {self.track_id}: first frame after last")
        if self.length <= 0 or self.width <= 0:
            raise IntegrityError(f"track {self.track_id}: non-positive dimensions")


@dataclass(frozen=True)
class TrackFrame:
    """One sampled state of a vehicle (a view into the track's columns)."""

    frame: int
    center: tuple[float, float]
    heading: float                      # radians
    velocity: tuple[float, float]
    acceleration: tuple[float, float]
    lanelet_id: int | None
    lanelet_ids: tuple[int, ...]
    lat_lane_center_offset: float       # NaN when unknown
    lane_change_flag: bool
    neighbor_ids: dict[str, int | None]


class Track:
    """One vehicle's time series, stored column-wise.

    Frame indices increase strictly by one.  ``heading_deg`` keeps the raw
    file value (degrees) so serialization round-trips bit for bit; the
    :class:`TrackFrame` view exposes radians.
    """

    __slots__ = ("meta", "frames_idx", "x", "y", "heading_deg", "vx", "vy",
                 "ax", "ay", "lat_offset", "lane_change", "lanelet_lists",
                 "neighbors", "has_neighbor_fields", "kinematics_derived")

    def __init__(self, meta: TrackMeta, frames_idx: np.ndarray, x: np.ndarray,
                 y: np.ndarray, heading_deg: np.ndarray, vx: np.ndarray,
                 vy: np.ndarray, ax: np.ndarray, ay: np.ndarray,
                 lat_offset: np.ndarray, lane_change: np.ndarray,
                 lanelet_lists: list[tuple[int, ...]],
                 neighbors: dict[str, np.ndarray],
                 has_neighbor_fields: bool = False,
                 kinematics_derived: bool = False):
        n = len(frames_idx)
        if n == 0:
            raise IntegrityError(f"track {meta.track_id}: no frames")
        if not np.all(np.diff(frames_idx) == 1):
            raise IntegrityError(f"track {meta.track_id}: frame indices are "
                                 f"not contiguous")
        if n != meta.last_frame - meta.first_frame + 1:
            raise IntegrityError(f"track {meta.track_id}: {n} frames but meta "
                                 f"declares [{meta.first_frame}, {meta.last_frame}]")
        self.meta = meta
        self.frames_idx = frames_idx
        self.x, self.y = x, y
        self.heading_deg = heading_deg
        self.vx, self.vy = vx, vy
        self.ax, self.ay = ax, ay
        self.lat_offset = lat_offset
        self.lane_change = lane_change
        self.lanelet_lists = lanelet_lists
        self.neighbors = neighbors
        self.has_neighbor_fields = has_neighbor_fields
        self.kinematics_derived = kinematics_derived

    def __len__(self) -> int:
        return len(self.frames_idx)

    @property
    def track_id(self) -> int:
        return self.meta.track_id

    @property
    def first_frame(self) -> int:
        return int(self.frames_idx[0])

    @property
    def last_frame(self) -> int:
        return int(self.frames_idx[-1])

    def covers(self, frame: int) -> bool:
        return self.first_frame <= frame <= self.last_frame

    def index_of(self, frame: int) -> int:
        if not self.covers(frame):
            raise IntegrityError(f"track {self.track_id} does not cover frame {frame}")
        return frame - self.first_frame

    def lanelets_at(self, frame: int) -> tuple[int, ...]:
        return self.lanelet_lists[self.index_of(frame)]

    def assigned_lanelet(self, frame: int) -> int | None:
        ids = self.lanelets_at(frame)
        return ids[0] if ids else None

    def center_at(self, frame: int) -> tuple[float, float]:
        i = self.index_of(frame)
        return float(self.x[i]), float(self.y[i])

    def velocity_at(self, frame: int) -> tuple[float, float]:
        i = self.index_of(frame)
        return float(self.vx[i]), float(self.vy[i])

    def speed_at(self, frame: int) -> float:
        i = self.index_of(frame)
        return float(math.hypot(self.vx[i], self.vy[i]))

    def neighbor_at(self, frame: int, slot: str) -> int | None:
        arr = self.neighbors.get(slot)
        if arr is None:
            return None
        val = int(arr[self.index_of(frame)])
        return val if val > 0 else None

    def frame_at(self, frame: int) -> TrackFrame:
        i = self.index_of(frame)
        ids = self.lanelet_lists[i]
        return TrackFrame(
            frame=frame,
            center=(float(self.x[i]), float(self.y[i])),
            heading=math.radians(float(self.heading_deg[i])),
            velocity=(float(self.vx[i]), float(self.vy[i])),
            acceleration=(float(self.ax[i]), float(self.ay[i])),
            lanelet_id=ids[0] if ids else None,
            lanelet_ids=ids,
            lat_lane_center_offset=float(self.lat_offset[i]),
            lane_change_flag=bool(self.lane_change[i]),
            neighbor_ids={slot: self.neighbor_at(frame, slot)
                          for slot in NEIGHBOR_FIELDS},
        )

    @property
    def frames(self) -> list[TrackFrame]:
        return [self.frame_at(int(f)) for f in self.frames_idx]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _require_columns(df: pd.DataFrame, required, what: str):
    for col in required:
        if col not in df.columns:
            raise SchemaError(f"{what} is missing mandatory column '{col}'")


def parse_recording(recording_csv: str | Path, tracks_meta_csv: str | Path,
                    tracks_csv: str | Path) -> tuple[RecordingMeta, list[Track]]:
    """Parse one recording triple into typed tracks.

    Frames of every track must be sorted and contiguous; velocities and
    accelerations are taken as provided, with a central-finite-difference
    fallback when the columns are absent.
    """
    rec_df = pd.read_csv(recording_csv, float_precision="round_trip")
    _require_columns(rec_df, _RECORDING_MANDATORY, "recordingMeta")
    if len(rec_df) != 1:
        raise IntegrityError("recordingMeta must contain exactly one row")
    row = rec_df.iloc[0]
    meta = RecordingMeta(
        recording_id=int(row["recordingId"]),
        location_id=int(row["locationId"]),
        frame_rate=float(row["frameRate"]),
        origin_offset=(float(row.get("xUtmOrigin", 0.0) or 0.0),
                       float(row.get("yUtmOrigin", 0.0) or 0.0)),
    )

    tmeta_df = pd.read_csv(tracks_meta_csv, float_precision="round_trip")
    _require_columns(tmeta_df, _TRACKS_META_MANDATORY, "tracksMeta")
    metas: dict[int, TrackMeta] = {}
    for _, m in tmeta_df.iterrows():
        tm = TrackMeta(
            track_id=int(m["trackId"]),
            vehicle_class=str(m["class"]).strip().lower(),
            length=float(m["length"]),
            width=float(m["width"]),
            first_frame=int(m["initialFrame"]),
            last_frame=int(m["finalFrame"]),
        )
        metas[tm.track_id] = tm

    tracks_df = pd.read_csv(tracks_csv, float_precision="round_trip")
    _require_columns(tracks_df, _TRACKS_MANDATORY, "tracks")

    tracks: list[Track] = []
    for track_id, group in tracks_df.groupby("trackId", sort=True):
        track_id = int(track_id)
        if track_id not in metas:
            raise IntegrityError(f"track {track_id} appears in tracks but not "
                                 f"in tracksMeta")
        group = group.sort_values("frame")
        track = _build_track(metas[track_id], group, meta.timestep)
        tracks.append(track)
    return meta, tracks


def _parse_lanelet_cell(val) -> tuple[int, ...]:
    if val is None or (isinstance(val, float) and math.isnan(val)):
        return ()
    if isinstance(val, (int, np.integer)):
        return (int(val),)
    if isinstance(val, float):
        return (int(val),)
    s = str(val).strip()
    if not s:
        return ()
    return tuple(int(float(part)) for part in s.split(";") if part.strip())


def _float_column(group: pd.DataFrame, name: str, default: float = np.nan) -> np.ndarray:
    if name in group.columns:
        return pd.to_numeric(group[name], errors="coerce").to_numpy(dtype=float)
    return np.full(len(group), default, dtype=float)


def _build_track(tmeta: TrackMeta, group: pd.DataFrame, timestep: float) -> Track:
    frames_idx = group["frame"].to_numpy(dtype=np.int64)
    if not np.all(np.diff(frames_idx) == 1):
        raise IntegrityError(f"track {tmeta.track_id}: frames are not contiguous")

    x = group["xCenter"].to_numpy(dtype=float)
    y = group["yCenter"].to_numpy(dtype=float)
    heading_deg = _float_column(group, "heading", 0.0)
    if np.isnan(heading_deg).any():
        heading_deg = np.nan_to_num(heading_deg, nan=0.0)

    derived = False
    if "xVelocity" in group.columns and "yVelocity" in group.columns:
        vx = _float_column(group, "xVelocity")
        vy = _float_column(group, "yVelocity")
    else:
        vx, vy = _finite_difference(x, timestep), _finite_difference(y, timestep)
        derived = True
    if "xAcceleration" in group.columns and "yAcceleration" in group.columns:
        ax = _float_column(group, "xAcceleration")
        ay = _float_column(group, "yAcceleration")
    else:
        ax, ay = _finite_difference(vx, timestep), _finite_difference(vy, timestep)
        derived = True

    for name, arr in (("xCenter", x), ("yCenter", y), ("xVelocity", vx),
                      ("yVelocity", vy)):
        if not np.all(np.isfinite(arr)):
            raise IntegrityError(f"track {tmeta.track_id}: non-finite {name}")

    lat_offset = _float_column(group, "latLaneCenterOffset")
    if "laneChange" in group.columns:
        lane_change = pd.to_numeric(group["laneChange"], errors="coerce") \
            .fillna(0).to_numpy() > 0
    else:
        lane_change = np.zeros(len(group), dtype=bool)

    if "laneletId" in group.columns:
        lanelet_lists = [_parse_lanelet_cell(v) for v in group["laneletId"]]
    else:
        lanelet_lists = [()] * len(group)

    neighbors: dict[str, np.ndarray] = {}
    has_fields = False
    for slot, col in NEIGHBOR_COLUMNS.items():
        if col in group.columns:
            vals = pd.to_numeric(group[col], errors="coerce").fillna(0)
            neighbors[slot] = np.maximum(vals.to_numpy(dtype=np.int64), 0)
            has_fields = True
        else:
            neighbors[slot] = np.zeros(len(group), dtype=np.int64)

    return Track(tmeta, frames_idx, x, y, heading_deg, vx, vy, ax, ay,
                 lat_offset, lane_change, lanelet_lists, neighbors,
                 has_neighbor_fields=has_fields, kinematics_derived=derived)


# ---------------------------------------------------------------------------
# Kinematics fallback
# ---------------------------------------------------------------------------

def _finite_difference(values: np.ndarray, timestep: float) -> np.ndarray:
    """Central differences interiorly, one-sided at both ends."""
    n = len(values)
    if n < 2:
        return np.zeros(n, dtype=float)
    out = np.empty(n, dtype=float)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * timestep)
    out[0] = (values[1] - values[0]) / timestep
    out[-1] = (values[-1] - values[-2]) / timestep
    return out


def derive_kinematics(track: Track, timestep: float) -> Track:
    """Fill velocity and acceleration from positions.

    Single-frame tracks are returned untouched (flagged with a warning).
    """
    if len(track) < 2:
        logger.warning("track %s has a single frame; kinematics left untouched",
                       track.track_id)
        return track
    vx = _finite_difference(track.x, timestep)
    vy = _finite_difference(track.y, timestep)
    ax = _finite_difference(vx, timestep)
    ay = _finite_difference(vy, timestep)
    return Track(track.meta, track.frames_idx, track.x, track.y,
                 track.heading_deg, vx, vy, ax, ay, track.lat_offset,
                 track.lane_change, track.lanelet_lists, track.neighbors,
                 has_neighbor_fields=track.has_neighbor_fields,
                 kinematics_derived=True)


# ---------------------------------------------------------------------------
# Serialization (round-trip + synthetic recordings)
# ---------------------------------------------------------------------------

TRACKS_COLUMNS = ("recordingId", "trackId", "frame", "xCenter", "yCenter",
                  "heading", "xVelocity", "yVelocity", "xAcceleration",
                  "yAcceleration", "laneletId", "latLaneCenterOffset",
                  "laneChange", "leadId", "rearId", "leftLeadId",
                  "rightLeadId", "leftAlongsideId", "rightAlongsideId",
                  "leftRearId", "rightRearId")


def tracks_frame(meta: RecordingMeta, tracks: list[Track]) -> pd.DataFrame:
    """Flatten tracks back into a tracks-table DataFrame (declared columns)."""
    parts = []
    for tr in tracks:
        n = len(tr)
        part = {
            "recordingId": np.full(n, meta.recording_id, dtype=np.int64),
            "trackId": np.full(n, tr.track_id, dtype=np.int64),
            "frame": tr.frames_idx,
            "xCenter": tr.x,
            "yCenter": tr.y,
            "heading": tr.heading_deg,
            "xVelocity": tr.vx,
            "yVelocity": tr.vy,
            "xAcceleration": tr.ax,
            "yAcceleration": tr.ay,
            "laneletId": [";".join(str(i) for i in ids) for ids in tr.lanelet_lists],
            "latLaneCenterOffset": tr.lat_offset,
            "laneChange": tr.lane_change.astype(np.int64),
        }
        for slot, col in NEIGHBOR_COLUMNS.items():
            part[col] = tr.neighbors[slot]
        parts.append(pd.DataFrame(part))
    if not parts:
        return pd.DataFrame(columns=TRACKS_COLUMNS)
    return pd.concat(parts, ignore_index=True)[list(TRACKS_COLUMNS)]


def write_recording(meta: RecordingMeta, tracks: list[Track],
                    out_dir: str | Path, prefix: str | None = None) -> dict[str, Path]:
    """Write the three CSV files of one recording; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = prefix if prefix is not None else f"{meta.recording_id:02d}"

    rec_path = out_dir / f"{prefix}_recordingMeta.csv"
    pd.DataFrame([{
        "recordingId": meta.recording_id,
        "locationId": meta.location_id,
        "frameRate": meta.frame_rate,
        "xUtmOrigin": meta.origin_offset[0],
        "yUtmOrigin": meta.origin_offset[1],
    }]).to_csv(rec_path, index=False)

    tmeta_path = out_dir / f"{prefix}_tracksMeta.csv"
    pd.DataFrame([{
        "recordingId": meta.recording_id,
        "trackId": tr.track_id,
        "initialFrame": tr.meta.first_frame,
        "finalFrame": tr.meta.last_frame,
        "numFrames": len(tr),
        "width": tr.meta.width,
        "length": tr.meta.length,
        "class": tr.meta.vehicle_class,
    } for tr in tracks]).to_csv(tmeta_path, index=False)

    tracks_path = out_dir / f"{prefix}_tracks.csv"
    tracks_frame(meta, tracks).to_csv(tracks_path, index=False)

    return {"recordingMeta": rec_path, "tracksMeta": tmeta_path,
            "tracks": tracks_path}
