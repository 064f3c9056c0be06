"""Column contracts for every bundle file the renderers consume."""

from __future__ import annotations

from pathlib import Path

import pandas as pd


class ContractError(Exception):
    """A bundle file violates its column contract."""


SUMMARY_COLUMNS = ("location_id", "vehicle_class", "distance_threshold",
                   "scenario", "indicator", "n", "q1", "median", "q3", "mean",
                   "iqr", "fence_multiplier", "lower_fence", "upper_fence",
                   "whisker_low", "whisker_high", "n_outliers",
                   "outlier_values")

CONTRACTS: dict[str, tuple[str, ...]] = {
    "boxplot_merging.csv": SUMMARY_COLUMNS,
    "headway_lead.csv": SUMMARY_COLUMNS,
    "headway_rear.csv": SUMMARY_COLUMNS,
    "js_heatmap.csv": ("location_id", "distance_threshold", "indicator",
                       "scenario_i", "scenario_j", "js", "n_i", "n_j",
                       "masked"),
    "merge_points.csv": ("recording_id", "track_id", "location_id",
                         "vehicle_class", "crossed_solid", "merge_x",
                         "merge_y"),
    "map_outline.csv": ("location_id", "lanelet_id", "side", "seq", "x", "y"),
    "ttc_bars.csv": ("location_id", "distance_threshold", "scenario",
                     "indicator", "mean_s", "n"),
    "macro_scatter.csv": ("recording_id", "track_id", "location_id",
                          "vehicle_class", "distance_threshold", "scenario",
                          "region", "q_veh_h", "k_veh_km", "v_km_h",
                          "n_vehicles"),
    "consecutive_lc.csv": ("location_id", "distance_threshold", "scenario",
                           "n_events", "n_consecutive", "share"),
}


def load_bundle_csv(path: str | Path) -> pd.DataFrame:
    """Load one bundle file, failing loudly on a missing contracted column."""
    path = Path(path)
    contract = CONTRACTS.get(path.name)
    if contract is None:
        raise ContractError(f"{path.name} is not a known bundle file")
    df = pd.read_csv(path)
    for column in contract:
        if column not in df.columns:
            raise ContractError(f"{path.name} is missing contracted column "
                                f"'{column}'")
    return df
