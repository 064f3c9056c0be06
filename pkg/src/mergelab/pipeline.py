"""Batch orchestration: recordings in, tables and a manifest out.

``run_pipeline`` drives the full chain (ingest, extract, classify,
indicators, macro, stats, figure bundles) and writes one CSV per stage
plus ``manifest.json``.  Each stage is also callable on its own against
the previous stage's files, which is what the CLI subcommands do.  All
stage outputs are written to a scratch directory first and moved into
place only when the stage finishes, so a failed run leaves no partial
tables behind.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import ConfigError, IntegrityError
from .events import (MergingEvent, Rejection, classify_route,
                     count_solid_line_merges, detect_key_positions,
                     ROUTE_ON_RAMP)
from .indicators import (build_merge_boundary, build_merge_chain,
                         compute_indicator_set, static_indicators)
from .macroscopic import event_macro
from .map_model import (LaneletMap, load_layout, load_layout_config, load_map)
from .scenarios import (DEFAULT_THRESHOLDS, SCENARIO_LABELS, TrackIndex,
                        classify_event, scenario_count_table)
from .stats import (DEFAULT_FENCE_MULTIPLIER, KDE_GRID_POINTS,
                    KDE_MIN_SAMPLES, DENSITY_FLOOR, divergence_matrices,
                    summarize)
from .trajectory import parse_recording

logger = logging.getLogger(__name__)

CORE_INDICATORS = ("merging_speed", "merging_distance", "distance_ratio",
                   "duration", "max_lat_speed", "max_lat_accel")
HEADWAY_INDICATORS = ("lead_dhw", "lead_thw", "rear_dhw", "rear_thw")
JS_INDICATORS = ("merging_speed", "distance_ratio", "duration",
                 "max_lat_speed", "max_lat_accel")


@dataclass
class RunConfig:
    """Everything a pipeline run depends on."""

    data_dir: Path
    out_dir: Path
    layout_path: Path | None = None
    maps_dir: Path | None = None
    locations: tuple[int, ...] | None = None
    distance_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    outlier_multiplier: float = DEFAULT_FENCE_MULTIPLIER
    timestep_override: float | None = None
    lookback: int = 5
    jobs: int = 1
    seed: int | None = None
    use_dataset_neighbors: bool = True
    min_group_n: int = KDE_MIN_SAMPLES

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        self.out_dir = Path(self.out_dir)
        if self.layout_path is not None:
            self.layout_path = Path(self.layout_path)
        if self.maps_dir is not None:
            self.maps_dir = Path(self.maps_dir)
        if self.locations is not None:
            self.locations = tuple(int(x) for x in self.locations)
        self.distance_thresholds = tuple(sorted(float(t)
                                                for t in self.distance_thresholds))

    def validate(self, need_data: bool = True):
        if not self.distance_thresholds:
            raise ConfigError("at least one distance threshold is required")
        if any(t <= 0 for t in self.distance_thresholds):
            raise ConfigError("distance thresholds must be positive")
        if self.outlier_multiplier <= 0:
            raise ConfigError("outlier multiplier must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if need_data:
            if not self.data_dir.is_dir():
                raise ConfigError(f"data directory {self.data_dir} does not exist")
            if not discover_recordings(self.data_dir):
                raise ConfigError(f"no recordings (XX_tracks.csv triples) "
                                  f"found in {self.data_dir}")

    def to_json_dict(self) -> dict:
        return {
            "data_dir": str(self.data_dir),
            "out_dir": str(self.out_dir),
            "layout_path": str(self.layout_path) if self.layout_path else None,
            "maps_dir": str(self.maps_dir) if self.maps_dir else None,
            "locations": list(self.locations) if self.locations else None,
            "distance_thresholds": list(self.distance_thresholds),
            "outlier_multiplier": self.outlier_multiplier,
            "timestep_override": self.timestep_override,
            "lookback": self.lookback,
            "jobs": self.jobs,
            "seed": self.seed,
            "use_dataset_neighbors": self.use_dataset_neighbors,
            "min_group_n": self.min_group_n,
        }


def discover_recordings(data_dir: Path) -> list[dict]:
    """Find XX_{recordingMeta,tracksMeta,tracks}.csv triples."""
    out = []
    for tracks in sorted(Path(data_dir).glob("*_tracks.csv")):
        prefix = tracks.name[: -len("_tracks.csv")]
        rec = tracks.with_name(f"{prefix}_recordingMeta.csv")
        tmeta = tracks.with_name(f"{prefix}_tracksMeta.csv")
        if rec.exists() and tmeta.exists():
            out.append({"prefix": prefix, "recordingMeta": rec,
                        "tracksMeta": tmeta, "tracks": tracks})
    return out


def _find_map(maps_dir: Path | None, location_id: int) -> Path | None:
    if maps_dir is None:
        return None
    hits = sorted(Path(maps_dir).glob(f"{location_id}_*.osm")) or \
        sorted(Path(maps_dir).glob(f"{location_id}.osm"))
    return hits[0] if hits else None


# ---------------------------------------------------------------------------
# Per-recording work (the unit of parallelism)
# ---------------------------------------------------------------------------

ALL_STAGES = frozenset({"events", "scenarios", "indicators", "macro"})


def process_recording(files: dict, layout_cfg: dict, config_dict: dict,
                      stages: frozenset = ALL_STAGES,
                      known_events: list[dict] | None = None) -> dict:
    """Run the requested stages for one recording; returns row lists.

    Takes plain dicts/paths so it can cross a process boundary.  When the
    events are already known (stage commands running on a prior
    ``events.csv``), detection is skipped and the rows are rebuilt.
    """
    thresholds = tuple(config_dict["distance_thresholds"])
    lookback = config_dict["lookback"]
    use_fields = config_dict["use_dataset_neighbors"]

    meta, tracks = parse_recording(files["recordingMeta"], files["tracksMeta"],
                                   files["tracks"])
    timestep = config_dict.get("timestep_override") or meta.timestep

    locations = config_dict.get("locations")
    if locations and meta.location_id not in locations:
        return {"skipped": True, "recording_id": meta.recording_id,
                "location_id": meta.location_id}

    lanelet_map: LaneletMap | None = None
    map_path = config_dict.get("map_paths", {}).get(str(meta.location_id))
    if map_path:
        lanelet_map = load_map(map_path)
    layout = load_layout(layout_cfg, meta.location_id, lanelet_map)

    needs_matching = bool(stages & {"scenarios", "indicators"})
    merge_chain = boundary = None
    if lanelet_map is not None and needs_matching:
        merge_chain = build_merge_chain(lanelet_map, layout)
        boundary = build_merge_boundary(lanelet_map, layout)

    index = TrackIndex(tracks, layout, lanelet_map) if needs_matching else None

    ingest_rows = [{
        "recording_id": meta.recording_id,
        "location_id": meta.location_id,
        "frame_rate": meta.frame_rate,
        "timestep": timestep,
        "n_tracks": len(tracks),
        "n_frames": int(sum(len(t) for t in tracks)),
        "has_map": lanelet_map is not None,
    }]

    event_rows, rejection_rows = [], []
    scenario_rows, indicator_rows, macro_rows = [], [], []
    events: list[MergingEvent] = []
    if known_events is not None:
        events = [_event_from_row(row) for row in known_events
                  if int(row["recording_id"]) == meta.recording_id]
    elif stages & {"events", "scenarios", "indicators", "macro"}:
        for track in tracks:
            if classify_route(track, layout) != ROUTE_ON_RAMP:
                continue
            result = detect_key_positions(track, layout, lookback=lookback,
                                          recording_id=meta.recording_id)
            if isinstance(result, Rejection):
                rejection_rows.append({"recording_id": meta.recording_id,
                                       "track_id": result.track_id,
                                       "reason": result.reason})
                continue
            events.append(result)

    for event in events:
        event_rows.append({
            "recording_id": event.recording_id,
            "track_id": event.track_id,
            "location_id": event.location_id,
            "vehicle_class": event.vehicle_class,
            "t_B": event.t_B, "t_D": event.t_D, "t_F": event.t_F,
            "t_E": event.t_E, "t_H": event.t_H,
            "crossed_solid": event.crossed_solid,
            "merge_x": event.merge_x, "merge_y": event.merge_y,
        })
        if "macro" in stages:
            up, down = event_macro(event, tracks, layout, timestep)
            for name, est in (("upstream", up), ("downstream", down)):
                macro_rows.append({
                    "recording_id": event.recording_id,
                    "track_id": event.track_id,
                    "location_id": event.location_id,
                    "vehicle_class": event.vehicle_class,
                    "region": name,
                    "q_veh_s": est.q, "k_veh_m": est.k, "v_m_s": est.v,
                    "q_veh_h": est.q_veh_h, "k_veh_km": est.k_veh_km,
                    "v_km_h": est.v_km_h, "n_vehicles": est.n_vehicles,
                })
        if event.crossed_solid or not needs_matching:
            # Solid-line merges are counted but carry no position D, so the
            # scenario and indicator statistics exclude them.
            continue
        static = None
        if "indicators" in stages:
            static = static_indicators(event, index.tracks_by_id[event.track_id],
                                       layout, timestep, merge_chain, boundary)
        for threshold in thresholds:
            timeline, record = classify_event(event, index, threshold,
                                              use_dataset_fields=use_fields)
            scenario_rows.append({
                "recording_id": record.recording_id,
                "track_id": record.track_id,
                "location_id": record.location_id,
                "vehicle_class": record.vehicle_class,
                "distance_threshold": record.distance_threshold,
                "label": record.label,
                "lead_id": record.lead_id, "rear_id": record.rear_id,
                "lead_was_rear": record.lead_was_rear,
                "rear_was_lead": record.rear_was_lead,
            })
            if "indicators" not in stages:
                continue
            ind = compute_indicator_set(event, timeline, index, layout,
                                        timestep, merge_chain, boundary,
                                        base=static)
            indicator_rows.append({
                "recording_id": event.recording_id,
                "track_id": event.track_id,
                "location_id": event.location_id,
                "vehicle_class": event.vehicle_class,
                "distance_threshold": threshold,
                "scenario": record.label,
                "merging_speed": ind.merging_speed,
                "merging_distance": ind.merging_distance,
                "distance_ratio": ind.distance_ratio,
                "duration": ind.duration,
                "max_lat_speed": ind.max_lat_speed,
                "max_lat_accel": ind.max_lat_accel,
                "min_ttc_lead": ind.min_ttc_lead,
                "min_ttc_rear": ind.min_ttc_rear,
                "lead_dhw": ind.lead_dhw, "lead_thw": ind.lead_thw,
                "rear_dhw": ind.rear_dhw, "rear_thw": ind.rear_thw,
                "consecutive_lc_duration": ind.consecutive_lc_duration,
                "has_consecutive_lc": event.t_H is not None,
            })

    return {
        "skipped": False,
        "recording_id": meta.recording_id,
        "location_id": meta.location_id,
        "ingest": ingest_rows,
        "events": event_rows,
        "rejections": rejection_rows,
        "scenarios": scenario_rows,
        "indicators": indicator_rows,
        "macro": macro_rows,
    }


def _event_from_row(row: dict) -> MergingEvent:
    def _opt(value):
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return None
        if isinstance(value, str) and not value.strip():
            return None
        return int(float(value))

    return MergingEvent(
        recording_id=int(row["recording_id"]),
        track_id=int(row["track_id"]),
        location_id=int(row["location_id"]),
        vehicle_class=str(row["vehicle_class"]),
        t_B=int(row["t_B"]), t_F=int(row["t_F"]),
        t_D=_opt(row.get("t_D")), t_E=_opt(row.get("t_E")),
        t_H=_opt(row.get("t_H")),
        crossed_solid=_parse_bool(row.get("crossed_solid")),
        merge_x=float(row.get("merge_x", float("nan"))),
        merge_y=float(row.get("merge_y", float("nan"))),
    )


def _parse_bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() == "true"
    return bool(value)


def load_events_csv(path: Path) -> list[dict]:
    df = pd.read_csv(path, float_precision="round_trip")
    return df.to_dict("records")


# ---------------------------------------------------------------------------
# Aggregation stages
# ---------------------------------------------------------------------------

def _collect(results: list[dict], key: str, columns: list[str]) -> pd.DataFrame:
    rows = []
    for res in sorted(results, key=lambda r: r["recording_id"]):
        if not res.get("skipped"):
            rows.extend(res[key])
    df = pd.DataFrame(rows, columns=columns)
    return df


_EVENT_COLUMNS = ["recording_id", "track_id", "location_id", "vehicle_class",
                  "t_B", "t_D", "t_F", "t_E", "t_H", "crossed_solid",
                  "merge_x", "merge_y"]
_SCENARIO_COLUMNS = ["recording_id", "track_id", "location_id", "vehicle_class",
                     "distance_threshold", "label", "lead_id", "rear_id",
                     "lead_was_rear", "rear_was_lead"]
_INDICATOR_COLUMNS = ["recording_id", "track_id", "location_id", "vehicle_class",
                      "distance_threshold", "scenario", *CORE_INDICATORS,
                      "min_ttc_lead", "min_ttc_rear", *HEADWAY_INDICATORS,
                      "consecutive_lc_duration", "has_consecutive_lc"]
_MACRO_COLUMNS = ["recording_id", "track_id", "location_id", "vehicle_class",
                  "region", "q_veh_s", "k_veh_m", "v_m_s", "q_veh_h",
                  "k_veh_km", "v_km_h", "n_vehicles"]


def summary_table(indicators_df: pd.DataFrame, fence_multiplier: float) -> pd.DataFrame:
    """SampleSummary rows per (indicator, location['all'], class['all'],
    threshold, scenario['all'])."""
    rows: list[dict] = []
    if indicators_df.empty:
        return pd.DataFrame(rows)

    all_indicators = (*CORE_INDICATORS, "min_ttc_lead", "min_ttc_rear",
                      *HEADWAY_INDICATORS)

    def _emit(sub: pd.DataFrame, location, vclass, scenario, threshold):
        for name in all_indicators:
            vals = pd.to_numeric(sub[name], errors="coerce").to_numpy(dtype=float)
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                continue
            s = summarize(vals, fence_multiplier)
            rows.append({
                "location_id": location, "vehicle_class": vclass,
                "distance_threshold": threshold, "scenario": scenario,
                "indicator": name, "n": s.n, "q1": s.q1, "median": s.median,
                "q3": s.q3, "mean": s.mean, "iqr": s.iqr,
                "fence_multiplier": s.fence_multiplier,
                "lower_fence": s.lower_fence, "upper_fence": s.upper_fence,
                "whisker_low": s.whisker_low, "whisker_high": s.whisker_high,
                "n_outliers": len(s.outlier_values),
                "outlier_values": ";".join(repr(v) for v in s.outlier_values),
            })

    for threshold, df_t in indicators_df.groupby("distance_threshold"):
        for loc_key, df_l in (("all", df_t), *df_t.groupby("location_id")):
            for cls_key, df_c in (("all", df_l), *df_l.groupby("vehicle_class")):
                _emit(df_c, str(loc_key), cls_key, "all", threshold)
                for scen, df_s in df_c.groupby("scenario"):
                    _emit(df_s, str(loc_key), cls_key, scen, threshold)
    return pd.DataFrame(rows)


def _with_location_rollup(df: pd.DataFrame) -> pd.DataFrame:
    """Stack the table on top of a copy whose location is 'all' (string keys
    throughout, so grouping never compares int to str)."""
    out = df.copy()
    out["location_id"] = out["location_id"].astype(str)
    return pd.concat([out, out.assign(location_id="all")], ignore_index=True)


def divergence_table(indicators_df: pd.DataFrame, min_group_n: int) -> pd.DataFrame:
    """Long-format JS divergence rows per location/threshold/indicator (cars)."""
    rows: list[dict] = []
    if indicators_df.empty:
        return pd.DataFrame(rows)
    stacked = _with_location_rollup(indicators_df)
    for name in JS_INDICATORS:
        mats = divergence_matrices(stacked, name,
                                   ["location_id", "distance_threshold"],
                                   scenario_col="scenario",
                                   labels=SCENARIO_LABELS,
                                   min_n=min_group_n)
        for mat in mats:
            rows.extend(mat.to_rows())
    out = pd.DataFrame(rows)
    if not out.empty:
        out = out[["location_id", "distance_threshold", "indicator",
                   "scenario_i", "scenario_j", "js", "n_i", "n_j", "masked"]]
    return out


def consecutive_lc_tables(indicators_df: pd.DataFrame
                          ) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Occurrence share and mean duration of the follow-up lane change."""
    share_rows, duration_rows = [], []
    if indicators_df.empty:
        return pd.DataFrame(share_rows), pd.DataFrame(duration_rows)
    stacked = _with_location_rollup(indicators_df)
    grouped = stacked.groupby(["location_id", "distance_threshold", "scenario"])
    for (loc, thr, scen), sub in grouped:
        n = len(sub)
        n_with = int(sub["has_consecutive_lc"].sum())
        share_rows.append({"location_id": loc, "distance_threshold": thr,
                           "scenario": scen, "n_events": n,
                           "n_consecutive": n_with,
                           "share": n_with / n if n else 0.0})
        durations = pd.to_numeric(sub["consecutive_lc_duration"],
                                  errors="coerce").dropna()
        duration_rows.append({"location_id": loc, "distance_threshold": thr,
                              "scenario": scen, "n": int(durations.size),
                              "mean_duration": float(durations.mean())
                              if durations.size else None})
    return pd.DataFrame(share_rows), pd.DataFrame(duration_rows)


def mean_indicator_table(indicators_df: pd.DataFrame, name: str) -> pd.DataFrame:
    rows = []
    if indicators_df.empty:
        return pd.DataFrame(rows)
    stacked = _with_location_rollup(indicators_df)
    for (loc, thr, scen), sub in stacked.groupby(
            ["location_id", "distance_threshold", "scenario"]):
        vals = pd.to_numeric(sub[name], errors="coerce").dropna()
        rows.append({"location_id": loc, "distance_threshold": thr,
                     "scenario": scen, "n": int(vals.size),
                     "mean": float(vals.mean()) if vals.size else None})
    return pd.DataFrame(rows)


def solid_merge_table(events_df: pd.DataFrame) -> pd.DataFrame:
    """Wide location x class counts of solid-line merges."""
    classes = ["car", "truck", "van"]
    if events_df.empty:
        return pd.DataFrame(columns=["location_id", *classes])
    solid = events_df[events_df["crossed_solid"]]
    rows = []
    for loc in sorted(events_df["location_id"].unique()):
        counts = solid[solid["location_id"] == loc]["vehicle_class"].value_counts()
        rows.append({"location_id": loc,
                     **{c: int(counts.get(c, 0)) for c in classes}})
    return pd.DataFrame(rows, columns=["location_id", *classes])


# ---------------------------------------------------------------------------
# Figure bundles
# ---------------------------------------------------------------------------

def emit_figure_data(out_dir: Path, config: RunConfig | None = None) -> Path:
    """Write the per-figure CSV bundle from the pipeline tables.

    Raises :class:`IntegrityError` when an upstream table is missing.
    """
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures_data"
    fig_dir.mkdir(parents=True, exist_ok=True)

    def _load(name: str) -> pd.DataFrame:
        path = out_dir / name
        if not path.exists():
            raise IntegrityError(f"figure bundle needs {name}; run the "
                                 f"pipeline (or its stage) first")
        return pd.read_csv(path, float_precision="round_trip")

    events_df = _load("events.csv")
    indicators_df = _load("indicators.csv")
    macro_df = _load("macro.csv")
    scenarios_df = _load("scenarios.csv")
    summary_df = _load("summary.csv")
    divergence_df = _load("divergence.csv")

    points = events_df[["recording_id", "track_id", "location_id",
                        "vehicle_class", "crossed_solid", "merge_x",
                        "merge_y"]].copy()
    points.to_csv(fig_dir / "merge_points.csv", index=False)

    outline_rows = []
    if config is not None and config.maps_dir is not None:
        for loc in sorted(events_df["location_id"].unique()):
            map_path = _find_map(config.maps_dir, int(loc))
            if map_path is None:
                continue
            lanelet_map = load_map(map_path)
            for lid in sorted(lanelet_map.lanelets):
                ll = lanelet_map.lanelets[lid]
                for side, pts in (("left", ll.left_pts), ("right", ll.right_pts)):
                    for seq, (x, y) in enumerate(pts):
                        outline_rows.append({"location_id": loc, "lanelet_id": lid,
                                             "side": side, "seq": seq,
                                             "x": x, "y": y})
    pd.DataFrame(outline_rows,
                 columns=["location_id", "lanelet_id", "side", "seq", "x", "y"]
                 ).to_csv(fig_dir / "map_outline.csv", index=False)

    box = summary_df[(summary_df["indicator"].isin(CORE_INDICATORS))
                     & (summary_df["scenario"] == "all")]
    box.to_csv(fig_dir / "boxplot_merging.csv", index=False)

    for role in ("lead", "rear"):
        hw = summary_df[summary_df["indicator"].isin(
            [f"{role}_dhw", f"{role}_thw"])]
        hw.to_csv(fig_dir / f"headway_{role}.csv", index=False)

    divergence_df.to_csv(fig_dir / "js_heatmap.csv", index=False)

    cars = indicators_df[indicators_df["vehicle_class"] == "car"]
    ttc_rows = []
    for (loc, thr, scen), sub in cars.groupby(["location_id",
                                               "distance_threshold", "scenario"]):
        for name in ("min_ttc_lead", "min_ttc_rear"):
            vals = pd.to_numeric(sub[name], errors="coerce")
            vals = vals[np.isfinite(vals)]
            if vals.size:
                ttc_rows.append({"location_id": loc, "distance_threshold": thr,
                                 "scenario": scen, "indicator": name,
                                 "mean_s": float(vals.mean()), "n": int(vals.size)})
    pd.DataFrame(ttc_rows, columns=["location_id", "distance_threshold",
                                    "scenario", "indicator", "mean_s", "n"]
                 ).to_csv(fig_dir / "ttc_bars.csv", index=False)

    macro_joined = macro_df.merge(
        scenarios_df[["recording_id", "track_id", "distance_threshold", "label"]],
        on=["recording_id", "track_id"], how="inner")
    macro_joined = macro_joined.rename(columns={"label": "scenario"})
    macro_joined[["recording_id", "track_id", "location_id", "vehicle_class",
                  "distance_threshold", "scenario", "region", "q_veh_h",
                  "k_veh_km", "v_km_h", "n_vehicles"]].to_csv(
        fig_dir / "macro_scatter.csv", index=False)

    share = _load("table8_consecutive_share.csv")
    duration = _load("table9_consecutive_duration.csv")
    merged = share.merge(duration,
                         on=["location_id", "distance_threshold", "scenario"],
                         how="left")
    merged.to_csv(fig_dir / "consecutive_lc.csv", index=False)

    return fig_dir


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def method_constants(config: RunConfig) -> dict:
    """Every numeric convention that shapes the outputs, for the manifest."""
    return {
        "quantile_method": "linear interpolation between closest ranks",
        "outlier_rule": f"outside [q1 - {config.outlier_multiplier}*iqr, "
                        f"q3 + {config.outlier_multiplier}*iqr]",
        "kde_kernel": "gaussian",
        "kde_bandwidth": "1.06 * min(std, iqr/1.349) * n^(-1/5), floored at "
                         "1e-6 * range",
        "kde_grid_points": KDE_GRID_POINTS,
        "density_floor": DENSITY_FLOOR,
        "js_log_base": 2,
        "js_min_samples": config.min_group_n,
        "gap_convention": "bumper-to-bumper on the area-4+5 chain axis",
        "headway_frame": "position F",
        "ttc_geometry": "vehicle center points",
        "neighbor_tie_break": "lower track id",
        "role_change_window": "[t_B, t_F), alongside counts as prior role",
        "edie_accounting": "left-closed frame intervals, planar displacement",
        "lateral_reference": "left boundary linestring of areas 2+3",
        "lateral_fit": "degree-5 least squares on normalized time",
        "lookback_frames": config.lookback,
        "distance_thresholds_m": list(config.distance_thresholds),
        "solid_line_merges": "counted, excluded from scenario/indicator stats",
    }


def write_manifest(out_dir: Path, config: RunConfig, input_files: list[Path],
                   timings: dict[str, float], stage: str = "run"):
    manifest = {
        "tool": {"name": "mergelab", "version": __version__},
        "stage": stage,
        "config": config.to_json_dict(),
        "methods": method_constants(config),
        "inputs": {str(p): _sha256(p) for p in sorted(set(input_files))},
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------

def _layout_config_path(config: RunConfig) -> Path:
    from .map_model import bundled_layout_path
    return config.layout_path if config.layout_path else bundled_layout_path()


def run_pipeline(config: RunConfig) -> Path:
    """Run every stage and write the output directory; returns its path."""
    config.validate()
    t_start = time.perf_counter()
    timings: dict[str, float] = {}

    layout_path = _layout_config_path(config)
    layout_cfg = load_layout_config(layout_path)

    recordings = discover_recordings(config.data_dir)
    config_dict = config.to_json_dict()
    config_dict["map_paths"] = {}
    if config.maps_dir is not None:
        for loc in (layout_cfg.get("locations") or {}):
            path = _find_map(config.maps_dir, int(loc))
            if path is not None:
                config_dict["map_paths"][str(loc)] = str(path)

    t0 = time.perf_counter()
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(process_recording, recordings,
                                    [layout_cfg] * len(recordings),
                                    [config_dict] * len(recordings)))
    else:
        results = [process_recording(files, layout_cfg, config_dict)
                   for files in recordings]
    timings["process_recordings_s"] = time.perf_counter() - t0

    processed = [r for r in results if not r.get("skipped")]
    if not processed:
        raise ConfigError("no recordings matched the requested locations")

    out_dir = config.out_dir
    scratch = out_dir / ".partial"
    if scratch.exists():
        shutil.rmtree(scratch)
    scratch.mkdir(parents=True)

    try:
        t0 = time.perf_counter()
        ingest_df = _collect(results, "ingest",
                             ["recording_id", "location_id", "frame_rate",
                              "timestep", "n_tracks", "n_frames", "has_map"])
        events_df = _collect(results, "events", _EVENT_COLUMNS)
        rejections_df = _collect(results, "rejections",
                                 ["recording_id", "track_id", "reason"])
        scenarios_df = _collect(results, "scenarios", _SCENARIO_COLUMNS)
        indicators_df = _collect(results, "indicators", _INDICATOR_COLUMNS)
        macro_df = _collect(results, "macro", _MACRO_COLUMNS)

        ingest_df.to_csv(scratch / "ingest_report.csv", index=False)
        events_df.to_csv(scratch / "events.csv", index=False)
        rejections_df.to_csv(scratch / "rejections.csv", index=False)
        scenarios_df.to_csv(scratch / "scenarios.csv", index=False)
        indicators_df.to_csv(scratch / "indicators.csv", index=False)
        macro_df.to_csv(scratch / "macro.csv", index=False)
        timings["tables_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        counts = scenario_count_table(scenarios_df, config.distance_thresholds)
        counts.to_csv(scratch / "table5_scenario_counts.csv", index=False)
        solid_merge_table(events_df).to_csv(scratch / "table2_solid_merges.csv",
                                            index=False)
        mean_indicator_table(indicators_df, "distance_ratio").to_csv(
            scratch / "table6_mean_distance_ratio.csv", index=False)
        mean_indicator_table(indicators_df, "duration").to_csv(
            scratch / "table7_mean_duration.csv", index=False)
        share_df, duration_df = consecutive_lc_tables(indicators_df)
        share_df.to_csv(scratch / "table8_consecutive_share.csv", index=False)
        duration_df.to_csv(scratch / "table9_consecutive_duration.csv",
                           index=False)

        summary_table(indicators_df, config.outlier_multiplier).to_csv(
            scratch / "summary.csv", index=False)
        divergence_table(indicators_df, config.min_group_n).to_csv(
            scratch / "divergence.csv", index=False)
        timings["stats_s"] = time.perf_counter() - t0

        for item in scratch.iterdir():
            target = out_dir / item.name
            if target.exists():
                target.unlink()
            item.rename(target)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)

    try:
        emit_figure_data(out_dir, config)
    except Exception:
        shutil.rmtree(out_dir / "figures_data", ignore_errors=True)
        raise

    input_files = [layout_path]
    for rec in recordings:
        input_files += [rec["recordingMeta"], rec["tracksMeta"], rec["tracks"]]
    input_files += [Path(p) for p in config_dict["map_paths"].values()]
    timings["total_s"] = time.perf_counter() - t_start
    write_manifest(out_dir, config, input_files, timings)
    return out_dir


# ---------------------------------------------------------------------------
# Standalone stages (the CLI subcommands)
# ---------------------------------------------------------------------------

_STAGE_SELECTORS = {
    "ingest": frozenset(),
    "extract": frozenset({"events"}),
    "classify": frozenset({"scenarios"}),
    "indicators": frozenset({"scenarios", "indicators"}),
    "macro": frozenset({"macro"}),
}

_STAGE_FILES = {
    "ingest": ("ingest_report.csv",),
    "extract": ("events.csv", "rejections.csv"),
    "classify": ("scenarios.csv",),
    "indicators": ("indicators.csv",),
    "macro": ("macro.csv",),
}


def run_stage(config: RunConfig, stage: str) -> Path:
    """Run one pipeline stage standalone.

    ``classify``/``indicators``/``macro`` consume the prior events.csv;
    ``stats`` and ``report`` work purely from the tables on disk.
    """
    config.validate(need_data=stage not in ("stats", "report"))
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()

    if stage == "stats":
        return _run_stats_stage(config, t_start)
    if stage == "report":
        fig_dir = emit_figure_data(out_dir, config)
        write_manifest(out_dir, config,
                       [out_dir / n for n in ("events.csv", "indicators.csv",
                                              "macro.csv", "summary.csv")
                        if (out_dir / n).exists()],
                       {"total_s": time.perf_counter() - t_start}, stage="report")
        return fig_dir
    if stage not in _STAGE_SELECTORS:
        raise ConfigError(f"unknown stage {stage!r}")

    layout_path = _layout_config_path(config)
    layout_cfg = load_layout_config(layout_path)
    recordings = discover_recordings(config.data_dir)
    config_dict = config.to_json_dict()
    config_dict["map_paths"] = {}
    if config.maps_dir is not None:
        for loc in (layout_cfg.get("locations") or {}):
            path = _find_map(config.maps_dir, int(loc))
            if path is not None:
                config_dict["map_paths"][str(loc)] = str(path)

    known_events = None
    if stage in ("classify", "indicators", "macro"):
        events_path = out_dir / "events.csv"
        if not events_path.exists():
            raise ConfigError(f"stage '{stage}' needs {events_path}; run "
                              f"'extract' first")
        known_events = load_events_csv(events_path)

    selectors = _STAGE_SELECTORS[stage]
    results = [process_recording(files, layout_cfg, config_dict,
                                 stages=selectors, known_events=known_events)
               for files in recordings]
    processed = [r for r in results if not r.get("skipped")]
    if not processed:
        raise ConfigError("no recordings matched the requested locations")

    frames = {
        "ingest_report.csv": _collect(results, "ingest",
                                      ["recording_id", "location_id",
                                       "frame_rate", "timestep", "n_tracks",
                                       "n_frames", "has_map"]),
        "events.csv": _collect(results, "events", _EVENT_COLUMNS),
        "rejections.csv": _collect(results, "rejections",
                                   ["recording_id", "track_id", "reason"]),
        "scenarios.csv": _collect(results, "scenarios", _SCENARIO_COLUMNS),
        "indicators.csv": _collect(results, "indicators", _INDICATOR_COLUMNS),
        "macro.csv": _collect(results, "macro", _MACRO_COLUMNS),
    }
    for name in _STAGE_FILES[stage]:
        frames[name].to_csv(out_dir / name, index=False)
    if stage == "ingest":
        frames["ingest_report.csv"].to_csv(out_dir / "ingest_report.csv",
                                           index=False)

    input_files = [layout_path]
    for rec in recordings:
        input_files += [rec["recordingMeta"], rec["tracksMeta"], rec["tracks"]]
    write_manifest(out_dir, config, input_files,
                   {"total_s": time.perf_counter() - t_start}, stage=stage)
    return out_dir


def _run_stats_stage(config: RunConfig, t_start: float) -> Path:
    out_dir = config.out_dir
    needed = {name: out_dir / name
              for name in ("events.csv", "scenarios.csv", "indicators.csv")}
    for name, path in needed.items():
        if not path.exists():
            raise ConfigError(f"stage 'stats' needs {path}; run the earlier "
                              f"stages first")
    events_df = pd.read_csv(needed["events.csv"], float_precision="round_trip")
    scenarios_df = pd.read_csv(needed["scenarios.csv"], float_precision="round_trip")
    indicators_df = pd.read_csv(needed["indicators.csv"], float_precision="round_trip")

    scenario_count_table(scenarios_df, config.distance_thresholds).to_csv(
        out_dir / "table5_scenario_counts.csv", index=False)
    solid_merge_table(events_df).to_csv(out_dir / "table2_solid_merges.csv",
                                        index=False)
    mean_indicator_table(indicators_df, "distance_ratio").to_csv(
        out_dir / "table6_mean_distance_ratio.csv", index=False)
    mean_indicator_table(indicators_df, "duration").to_csv(
        out_dir / "table7_mean_duration.csv", index=False)
    share_df, duration_df = consecutive_lc_tables(indicators_df)
    share_df.to_csv(out_dir / "table8_consecutive_share.csv", index=False)
    duration_df.to_csv(out_dir / "table9_consecutive_duration.csv", index=False)
    summary_table(indicators_df, config.outlier_multiplier).to_csv(
        out_dir / "summary.csv", index=False)
    divergence_table(indicators_df, config.min_group_n).to_csv(
        out_dir / "divergence.csv", index=False)

    write_manifest(out_dir, config, list(needed.values()),
                   {"total_s": time.perf_counter() - t_start}, stage="stats")
    return out_dir
