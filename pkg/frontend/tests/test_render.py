"""Renderer tests against the golden bundle fixtures.

The central check is the zero-computation rule: numbers extracted back
out of the drawn artists must equal the fixture CSV values exactly.
"""

import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from mergefigs import ContractError, load_bundle_csv, render_all
from mergefigs.render import (FigureBundle, build_boxplot_figure,
                              build_heatmap_figure, render,
                              render_summary_boxplots)

FIXTURES = Path(__file__).parent / "fixtures"


def test_render_all_families(tmp_path):
    written = render_all(FIXTURES, tmp_path)
    assert written, "nothing rendered"
    names = {p.name for p in written}
    # every family present in the fixture bundle produced png + svg
    for stem in ("boxplot_merging_speed_thr100",
                 "headway_lead_lead_thw_thr100",
                 "js_duration_loc2_thr100",
                 "merge_points_loc2",
                 "ttc_loc2_thr100",
                 "macro_upstream_thr100",
                 "consecutive_share_thr100"):
        assert f"{stem}.png" in names, stem
        assert f"{stem}.svg" in names, stem


def test_boxplot_artists_equal_fixture_values():
    df = load_bundle_csv(FIXTURES / "boxplot_merging.csv")
    rows = df[(df["indicator"] == "merging_speed")].reset_index(drop=True)
    labels = [f"{r.location_id}/{r.vehicle_class}" for r in rows.itertuples()]
    fig, artists = build_boxplot_figure(rows, labels, "t", "y")

    for i, row in rows.iterrows():
        med_y = artists["medians"][i].get_ydata()
        assert med_y[0] == row["median"] == med_y[1]

        box_y = sorted(set(artists["boxes"][i].get_ydata()))
        assert box_y[0] == row["q1"] and box_y[-1] == row["q3"]

        # whiskers end exactly at the stored fences
        lo = artists["whiskers"][2 * i].get_ydata()
        hi = artists["whiskers"][2 * i + 1].get_ydata()
        assert min(lo) == row["lower_fence"]
        assert max(hi) == row["upper_fence"]

        fliers = sorted(artists["fliers"][i].get_ydata())
        cell = row["outlier_values"]
        expected = ([] if (isinstance(cell, float) and math.isnan(cell))
                    else [float(v) for v in str(cell).split(";") if v])
        assert fliers == expected

        mean_y = artists["means"][i].get_ydata()
        assert mean_y[0] == row["mean"]


def test_heatmap_masks_are_distinct_and_values_exact():
    df = load_bundle_csv(FIXTURES / "js_heatmap.csv")
    labels = ["A", "B", "C"]
    pos = {lab: i for i, lab in enumerate(labels)}
    matrix = np.zeros((3, 3))
    masked = np.ones((3, 3), dtype=bool)
    for _, row in df.iterrows():
        i, j = pos[row["scenario_i"]], pos[row["scenario_j"]]
        masked[i, j] = bool(row["masked"])
        if not masked[i, j]:
            matrix[i, j] = float(row["js"])
    fig, image = build_heatmap_figure(matrix, masked, labels, "t")

    drawn = image.get_array()
    assert bool(np.ma.is_masked(drawn[0, 2])) is True       # masked pair
    assert bool(np.ma.is_masked(drawn[0, 1])) is False
    assert float(drawn[0, 1]) == 0.31                        # exact pass-through
    assert float(drawn[1, 0]) == 0.31
    assert float(drawn[0, 0]) == 0.0


def test_merge_point_scatter_draws_outline_and_points(tmp_path):
    bundle = FigureBundle(
        family="merge_points",
        csv_paths=(FIXTURES / "merge_points.csv", FIXTURES / "map_outline.csv"),
        out_dir=tmp_path)
    written = render(bundle)
    assert any(p.suffix == ".png" for p in written)
    assert any(p.suffix == ".svg" for p in written)


def test_missing_column_names_it(tmp_path):
    broken = tmp_path / "boxplot_merging.csv"
    df = pd.read_csv(FIXTURES / "boxplot_merging.csv").drop(columns=["median"])
    df.to_csv(broken, index=False)
    with pytest.raises(ContractError, match="median"):
        render_summary_boxplots(broken, tmp_path, "boxplot", by_scenario=False)


def test_unknown_bundle_rejected(tmp_path):
    (tmp_path / "mystery.csv").write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ContractError, match="mystery"):
        load_bundle_csv(tmp_path / "mystery.csv")


def test_empty_group_is_skipped_with_notice(tmp_path, caplog):
    only_all = tmp_path / "boxplot_merging.csv"
    df = pd.read_csv(FIXTURES / "boxplot_merging.csv")
    df["vehicle_class"] = "all"      # nothing left after the grain filter
    df.to_csv(only_all, index=False)
    import logging
    with caplog.at_level(logging.INFO):
        written = render_summary_boxplots(only_all, tmp_path, "boxplot",
                                          by_scenario=False)
    assert written == []
    assert any("skipped" in rec.message for rec in caplog.records)


def test_render_all_skips_missing_families(tmp_path, caplog):
    bundle = tmp_path / "bundle"
    bundle.mkdir()
    (bundle / "ttc_bars.csv").write_bytes(
        (FIXTURES / "ttc_bars.csv").read_bytes())
    import logging
    with caplog.at_level(logging.INFO):
        written = render_all(bundle, tmp_path / "out")
    assert written and all("ttc" in p.name for p in written)


def test_cli_renders_bundle(tmp_path):
    from mergefigs.cli import main
    rc = main([str(FIXTURES), str(tmp_path)])
    assert rc == 0
    assert list(tmp_path.glob("*.png"))

    rc = main([str(tmp_path / "nowhere"), str(tmp_path), "--family",
               "boxplots"])
    assert rc == 2
