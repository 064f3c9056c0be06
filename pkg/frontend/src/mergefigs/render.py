"""Figure builders, one per family, plus the render/render_all drivers.

Boxplots are drawn with ``Axes.bxp`` from the precomputed five-number
summaries (medians, quartile boxes, fence whiskers, stored outliers), so
the artists carry exactly the numbers of the bundle row that produced
them.  Heatmaps grey out masked cells.  Each figure is written as both
PNG and SVG.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .contracts import CONTRACTS, ContractError, load_bundle_csv

logger = logging.getLogger(__name__)

_CLASS_COLORS = {"car": "#3b6fb6", "truck": "#c04a4a", "van": "#5da05d"}


@dataclass
class FigureBundle:
    """One figure family: its input files and styling knobs."""

    family: str
    csv_paths: tuple[Path, ...]
    out_dir: Path
    title: str = ""
    group_order: tuple[str, ...] = ()
    options: dict = field(default_factory=dict)


def _save(fig, out_dir: Path, name: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ext in ("png", "svg"):
        path = out_dir / f"{name}.{ext}"
        fig.savefig(path, bbox_inches="tight")
        paths.append(path)
    plt.close(fig)
    return paths


def _parse_outliers(cell) -> list[float]:
    if cell is None or (isinstance(cell, float) and math.isnan(cell)):
        return []
    text = str(cell).strip()
    if not text:
        return []
    return [float(part) for part in text.split(";") if part.strip()]


def _bxp_stat(row: pd.Series, label: str) -> dict:
    """One Axes.bxp entry taken verbatim from a summary row."""
    return {
        "label": label,
        "med": row["median"],
        "q1": row["q1"],
        "q3": row["q3"],
        "whislo": row["lower_fence"],
        "whishi": row["upper_fence"],
        "mean": row["mean"],
        "fliers": _parse_outliers(row["outlier_values"]),
    }


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

def build_boxplot_figure(rows: pd.DataFrame, labels: list[str],
                         title: str, ylabel: str):
    """A bxp figure whose boxes are the given summary rows, in order."""
    stats = [_bxp_stat(row, label)
             for (_, row), label in zip(rows.iterrows(), labels)]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(stats) + 1.5), 4.0))
    artists = ax.bxp(stats, showmeans=True, meanline=False, showfliers=True)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.tick_params(axis="x", rotation=45)
    ax.grid(axis="y", alpha=0.3)
    return fig, artists


def render_summary_boxplots(csv_path: Path, out_dir: Path, family: str,
                            by_scenario: bool) -> list[Path]:
    """Boxplot panels per (indicator, threshold).

    ``by_scenario`` draws one box per (location, scenario) pair (headway
    figures); otherwise one box per (location, vehicle class) pair.
    """
    df = load_bundle_csv(csv_path)
    written: list[Path] = []
    for (indicator, threshold), sub in df.groupby(["indicator",
                                                   "distance_threshold"]):
        if by_scenario:
            rows = sub[(sub["vehicle_class"] == "all")
                       & (sub["scenario"] != "all")]
            keys = ["location_id", "scenario"]
        else:
            rows = sub[(sub["scenario"] == "all")
                       & (sub["vehicle_class"] != "all")
                       & (sub["location_id"].astype(str) != "all")]
            keys = ["location_id", "vehicle_class"]
        rows = rows.sort_values(keys)
        if rows.empty:
            logger.info("%s: no rows for %s @ %s, skipped", family,
                        indicator, threshold)
            continue
        labels = ["/".join(str(row[k]) for k in keys)
                  for _, row in rows.iterrows()]
        fig, _ = build_boxplot_figure(
            rows, labels, f"{indicator} (threshold {threshold:g} m)", indicator)
        written += _save(fig, out_dir,
                         f"{family}_{indicator}_thr{threshold:g}")
    return written


def build_heatmap_figure(matrix: np.ndarray, masked: np.ndarray,
                         labels: list[str], title: str):
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    shown = np.ma.masked_array(matrix, mask=masked)
    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("#d9d9d9")
    image = ax.imshow(shown, vmin=0.0, vmax=1.0, cmap=cmap)
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    for i in range(len(labels)):
        for j in range(len(labels)):
            if masked[i, j]:
                ax.text(j, i, "n/a", ha="center", va="center", fontsize=7,
                        color="#555555")
            else:
                ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                        fontsize=7,
                        color="white" if matrix[i, j] > 0.5 else "black")
    fig.colorbar(image, ax=ax, label="JS divergence")
    ax.set_title(title)
    return fig, image


def render_js_heatmaps(csv_path: Path, out_dir: Path) -> list[Path]:
    df = load_bundle_csv(csv_path)
    written: list[Path] = []
    for (loc, threshold, indicator), sub in df.groupby(
            ["location_id", "distance_threshold", "indicator"]):
        labels = sorted(set(sub["scenario_i"]) | set(sub["scenario_j"]))
        k = len(labels)
        pos = {lab: i for i, lab in enumerate(labels)}
        matrix = np.zeros((k, k))
        masked = np.ones((k, k), dtype=bool)
        for _, row in sub.iterrows():
            i, j = pos[row["scenario_i"]], pos[row["scenario_j"]]
            masked[i, j] = bool(row["masked"])
            if not masked[i, j]:
                matrix[i, j] = float(row["js"])
        fig, _ = build_heatmap_figure(
            matrix, masked, labels,
            f"{indicator} - location {loc}, threshold {threshold:g} m")
        written += _save(fig, out_dir,
                         f"js_{indicator}_loc{loc}_thr{threshold:g}")
    return written


def render_merge_point_map(points_csv: Path, outline_csv: Path,
                           out_dir: Path) -> list[Path]:
    points = load_bundle_csv(points_csv)
    outlines = load_bundle_csv(outline_csv)
    written: list[Path] = []
    for loc, pts in points.groupby("location_id"):
        fig, ax = plt.subplots(figsize=(9.0, 3.2))
        for (lanelet, side), line in outlines[
                outlines["location_id"] == loc].groupby(["lanelet_id", "side"]):
            line = line.sort_values("seq")
            ax.plot(line["x"], line["y"], color="#999999", linewidth=0.7,
                    zorder=1)
        for vclass, group in pts.groupby("vehicle_class"):
            ax.scatter(group["merge_x"], group["merge_y"], s=14,
                       label=str(vclass),
                       color=_CLASS_COLORS.get(str(vclass), "#888888"),
                       zorder=2)
        solid = pts[pts["crossed_solid"]]
        if not solid.empty:
            ax.scatter(solid["merge_x"], solid["merge_y"], marker="x", s=30,
                       color="black", label="solid-line merge", zorder=3)
        ax.set_title(f"merge points - location {loc}")
        ax.set_aspect("equal")
        ax.legend(loc="upper left", fontsize=8)
        written += _save(fig, out_dir, f"merge_points_loc{loc}")
    return written


def render_ttc_bars(csv_path: Path, out_dir: Path) -> list[Path]:
    df = load_bundle_csv(csv_path)
    written: list[Path] = []
    for (loc, threshold), sub in df.groupby(["location_id",
                                             "distance_threshold"]):
        scenarios = sorted(sub["scenario"].unique())
        x = np.arange(len(scenarios))
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for offset, indicator in ((-0.2, "min_ttc_lead"), (0.2, "min_ttc_rear")):
            vals = [float(sub[(sub["scenario"] == s)
                              & (sub["indicator"] == indicator)]["mean_s"].iloc[0])
                    if not sub[(sub["scenario"] == s)
                               & (sub["indicator"] == indicator)].empty
                    else np.nan for s in scenarios]
            ax.bar(x + offset, vals, width=0.4, label=indicator)
        ax.set_xticks(x, scenarios)
        ax.set_ylabel("mean minimum TTC (s)")
        ax.set_title(f"location {loc}, threshold {threshold:g} m")
        ax.legend(fontsize=8)
        written += _save(fig, out_dir, f"ttc_loc{loc}_thr{threshold:g}")
    return written


def render_macro_figures(csv_path: Path, out_dir: Path) -> list[Path]:
    df = load_bundle_csv(csv_path)
    written: list[Path] = []
    for (region, threshold), sub in df.groupby(["region",
                                                "distance_threshold"]):
        fig, ax = plt.subplots(figsize=(5.2, 4.0))
        for scenario, group in sub.groupby("scenario"):
            ax.scatter(group["k_veh_km"], group["q_veh_h"], s=12,
                       label=str(scenario))
        ax.set_xlabel("density (veh/km)")
        ax.set_ylabel("flow (veh/h)")
        ax.set_title(f"{region} traffic, threshold {threshold:g} m")
        ax.legend(fontsize=7, ncols=2)
        written += _save(fig, out_dir, f"macro_{region}_thr{threshold:g}")

        means = sub.groupby("scenario")["q_veh_h"].mean()
        fig, ax = plt.subplots(figsize=(5.2, 3.2))
        ax.bar(means.index, means.to_numpy(), color="#3b6fb6")
        ax.set_ylabel("mean flow (veh/h)")
        ax.set_title(f"{region} mean flow by scenario, threshold {threshold:g} m")
        written += _save(fig, out_dir, f"macro_mean_{region}_thr{threshold:g}")
    return written


def render_consecutive_lc(csv_path: Path, out_dir: Path) -> list[Path]:
    df = load_bundle_csv(csv_path)
    written: list[Path] = []
    for threshold, sub in df.groupby("distance_threshold"):
        locs = sorted(sub["location_id"].astype(str).unique())
        scenarios = sorted(sub["scenario"].unique())
        x = np.arange(len(scenarios))
        width = max(0.8 / max(len(locs), 1), 0.1)
        fig, ax = plt.subplots(figsize=(7.0, 3.6))
        for i, loc in enumerate(locs):
            rows = sub[sub["location_id"].astype(str) == loc]
            vals = [float(rows[rows["scenario"] == s]["share"].iloc[0])
                    if not rows[rows["scenario"] == s].empty else 0.0
                    for s in scenarios]
            ax.bar(x + (i - len(locs) / 2 + 0.5) * width, vals, width=width,
                   label=f"location {loc}")
        ax.set_xticks(x, scenarios)
        ax.set_ylabel("share with a follow-up lane change")
        ax.set_title(f"threshold {threshold:g} m")
        ax.legend(fontsize=7)
        written += _save(fig, out_dir, f"consecutive_share_thr{threshold:g}")
    return written


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def render(bundle: FigureBundle) -> list[Path]:
    """Render one figure family; returns the written image paths."""
    family = bundle.family
    out = bundle.out_dir
    if family == "boxplots":
        return render_summary_boxplots(bundle.csv_paths[0], out,
                                       "boxplot", by_scenario=False)
    if family in ("headway_lead", "headway_rear"):
        return render_summary_boxplots(bundle.csv_paths[0], out, family,
                                       by_scenario=True)
    if family == "js_heatmap":
        return render_js_heatmaps(bundle.csv_paths[0], out)
    if family == "merge_points":
        return render_merge_point_map(bundle.csv_paths[0],
                                      bundle.csv_paths[1], out)
    if family == "ttc_bars":
        return render_ttc_bars(bundle.csv_paths[0], out)
    if family == "macro":
        return render_macro_figures(bundle.csv_paths[0], out)
    if family == "consecutive_lc":
        return render_consecutive_lc(bundle.csv_paths[0], out)
    raise ContractError(f"unknown figure family {family!r}")


_FAMILIES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("boxplots", ("boxplot_merging.csv",)),
    ("headway_lead", ("headway_lead.csv",)),
    ("headway_rear", ("headway_rear.csv",)),
    ("js_heatmap", ("js_heatmap.csv",)),
    ("merge_points", ("merge_points.csv", "map_outline.csv")),
    ("ttc_bars", ("ttc_bars.csv",)),
    ("macro", ("macro_scatter.csv",)),
    ("consecutive_lc", ("consecutive_lc.csv",)),
)


def render_all(bundle_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Render every family whose bundle files exist under ``bundle_dir``."""
    bundle_dir = Path(bundle_dir)
    out_dir = Path(out_dir)
    written: list[Path] = []
    for family, filenames in _FAMILIES:
        paths = tuple(bundle_dir / name for name in filenames)
        if not all(p.exists() for p in paths):
            logger.info("family %s skipped: bundle file missing", family)
            continue
        written += render(FigureBundle(family=family, csv_paths=paths,
                                       out_dir=out_dir))
    return written
