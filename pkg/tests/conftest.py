"""Shared fixtures: toy maps, a small synthetic corpus, parsed layouts."""

from __future__ import annotations

import numpy as np
import pytest

from mergelab import map_model, synth
from mergelab.map_model import parse_lanelet2


def two_lane_toy_xml(length: float = 100.0) -> bytes:
    """Hand-authored map: two straight parallel 100 m lanelets.

    Lanelet 1 spans y in [-2, 2], lanelet 2 spans y in [2, 6]; both run
    along +x from 0 to ``length``.
    """
    import xml.etree.ElementTree as ET
    osm = ET.Element("osm", version="0.6")
    nid = 0

    def node(x, y):
        nonlocal nid
        nid += 1
        n = ET.SubElement(osm, "node", id=str(nid), lat="0", lon="0")
        ET.SubElement(n, "tag", k="local_x", v=repr(float(x)))
        ET.SubElement(n, "tag", k="local_y", v=repr(float(y)))
        return nid

    wid = 100

    def way(y, subtype="solid"):
        nonlocal wid
        wid += 1
        w = ET.SubElement(osm, "way", id=str(wid))
        for ref in (node(0.0, y), node(length, y)):
            ET.SubElement(w, "nd", ref=str(ref))
        ET.SubElement(w, "tag", k="type", v="line_thin")
        ET.SubElement(w, "tag", k="subtype", v=subtype)
        return wid

    low, mid, top = way(-2.0), way(2.0, "dashed"), way(6.0)
    for lid, (left, right) in ((1, (mid, low)), (2, (top, mid))):
        rel = ET.SubElement(osm, "relation", id=str(lid))
        ET.SubElement(rel, "member", type="way", ref=str(left), role="left")
        ET.SubElement(rel, "member", type="way", ref=str(right), role="right")
        ET.SubElement(rel, "tag", k="type", v="lanelet")
    return ET.tostring(osm, xml_declaration=True, encoding="utf-8")


@pytest.fixture(scope="session")
def two_lane_map():
    return parse_lanelet2(two_lane_toy_xml(), name="two_lane")


@pytest.fixture(scope="session")
def synth_map():
    return parse_lanelet2(synth.toy_map_xml(), name="synth")


@pytest.fixture(scope="session")
def synth_layout(synth_map):
    return map_model.load_layout(synth.toy_layout_dict(),
                                 synth.SYNTH_LOCATION_ID, synth_map)


@pytest.fixture(scope="session")
def bundled_layout_cfg():
    return map_model.load_layout_config(map_model.bundled_layout_path())


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 24-event synthetic corpus on disk (shared, read-only)."""
    out = tmp_path_factory.mktemp("corpus")
    synth.build_corpus(out, n_events=24, seed=11, events_per_recording=12)
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
