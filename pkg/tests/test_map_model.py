import math
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergelab import map_model
from mergelab.errors import ConfigError, DomainError, IntegrityError, MapParseError
from mergelab.map_model import (ChainGeometry, LanePosition, load_layout,
                                locate, longitudinal_chain_coordinate,
                                parse_lanelet2)

from conftest import two_lane_toy_xml


def test_toy_map_lengths_exact(two_lane_map):
    assert sorted(two_lane_map.lanelets) == [1, 2]
    for lid in (1, 2):
        assert two_lane_map.lanelets[lid].length == pytest.approx(100.0, abs=1e-6)


def test_parse_is_lossless_for_ids(two_lane_map, synth_map):
    # every lanelet relation id appears exactly once
    assert len(synth_map.lanelets) == 12
    assert len(set(synth_map.lanelets)) == 12


def test_empty_map_is_integrity_error():
    with pytest.raises(IntegrityError, match="no lanelets"):
        parse_lanelet2(b"<osm version='0.6'></osm>")


def test_malformed_xml_reports_line():
    with pytest.raises(MapParseError, match="line"):
        parse_lanelet2(b"<osm>\n<node id='1'\n</osm>")


def test_dangling_reference_names_the_id():
    xml = (b"<osm><node id='1' lat='0' lon='0'>"
           b"<tag k='local_x' v='0'/><tag k='local_y' v='0'/></node>"
           b"<way id='10'><nd ref='1'/><nd ref='99'/></way></osm>")
    with pytest.raises(IntegrityError, match="99"):
        parse_lanelet2(xml)


def test_locate_centerline_and_offsets(two_lane_map):
    pos = locate(two_lane_map, 30.0, 0.0)
    assert pos is not None and pos.lanelet_id == 1
    assert abs(pos.lateral_offset) < 1e-9

    pos = locate(two_lane_map, 30.0, 1.0)
    assert pos.lanelet_id == 1
    assert pos.lateral_offset == pytest.approx(1.0, abs=1e-9)

    pos = locate(two_lane_map, 50.0, 0.0)
    assert pos.s == pytest.approx(50.0, abs=1e-6)


def test_locate_outside_returns_none(two_lane_map):
    assert locate(two_lane_map, 30.0, 50.0) is None
    assert locate(two_lane_map, -5.0, 0.0) is None


@settings(max_examples=50, deadline=None)
@given(x=st.floats(1.0, 99.0), y=st.floats(-1.9, 1.9))
def test_locate_offset_is_odd_under_reflection(x, y):
    # the map is straight and symmetric about y = 0 inside lanelet 1
    m = _REFLECTION_MAP
    up = locate(m, x, y)
    down = locate(m, x, -y)
    assert up is not None and down is not None
    assert up.lateral_offset == pytest.approx(-down.lateral_offset, abs=1e-9)


_REFLECTION_MAP = parse_lanelet2(two_lane_toy_xml())


def test_layout_merge_window_lengths(bundled_layout_cfg):
    loc2 = load_layout(bundled_layout_cfg, 2)
    assert loc2.merge_window_length == pytest.approx(119.67 + 40.65, abs=1e-9)
    loc3 = load_layout(bundled_layout_cfg, 3)
    assert loc3.merge_window_length == pytest.approx(167.54 + 32.87, abs=1e-9)


def test_layout_rejects_area_six(bundled_layout_cfg):
    cfg = {"locations": {2: {
        "areas": {1: [1], 2: [2], 3: [3], 5: [5], 6: [6]},
        "lanelet_lengths": {1: 10, 2: 10, 3: 10, 5: 10, 6: 10},
    }}}
    with pytest.raises(ConfigError, match="area 6"):
        load_layout(cfg, 2)


def test_layout_requires_core_areas(bundled_layout_cfg):
    cfg = {"locations": {2: {
        "areas": {1: [1], 2: [2], 5: [5]},
        "lanelet_lengths": {1: 10, 2: 10, 5: 10},
    }}}
    with pytest.raises(ConfigError, match="area 3"):
        load_layout(cfg, 2)


def test_chain_coordinate(bundled_layout_cfg):
    layout = load_layout(bundled_layout_cfg, 2)
    # chain head: coordinate equals s
    head = longitudinal_chain_coordinate(layout, (2, 3),
                                         LanePosition(1503, 10.0, 0.0))
    assert head == pytest.approx(10.0, abs=1e-12)
    # second lanelet starts after the first one's full length
    second = longitudinal_chain_coordinate(layout, (2, 3),
                                           LanePosition(1567, 0.0, 0.0))
    assert second == pytest.approx(119.67, abs=1e-9)

    with pytest.raises(DomainError):
        longitudinal_chain_coordinate(layout, (2, 3),
                                      LanePosition(1503, 500.0, 0.0))
    with pytest.raises(DomainError):
        longitudinal_chain_coordinate(layout, (2, 3),
                                      LanePosition(1489, 0.0, 0.0))


def test_chain_coordinate_increases_along_forward_motion(synth_map, synth_layout):
    chain = ChainGeometry.from_map(synth_map, synth_layout, (4, 5))
    xs = np.linspace(-250.0, 210.0, 200)
    pts = np.column_stack([xs, np.full_like(xs, 4.0)])
    s, _ = chain.project(pts)
    assert np.all(np.diff(s) > 0)


def test_synth_map_layout_validates(synth_map, synth_layout):
    assert synth_layout.merge_window_length == pytest.approx(160.0, abs=1e-9)
    assert synth_layout.area_length(4) == pytest.approx(340.0, abs=1e-9)
    assert synth_layout.areas_of(151) == (5,)


@pytest.mark.skipif("MERGELAB_EXID_MAPS" not in os.environ,
                    reason="licensed exiD maps not available")
def test_exid_location2_lengths_match_reference():
    maps_dir = Path(os.environ["MERGELAB_EXID_MAPS"])
    candidates = sorted(maps_dir.glob("2_*.osm")) or sorted(maps_dir.glob("2.osm"))
    assert candidates, "no location-2 map found"
    m = map_model.load_map(candidates[0])
    assert m.lanelets[1500].length == pytest.approx(67.56, abs=0.15)
