"""Lanelet2 map parsing, merging-area layouts, and lane-frame geometry.

A lanelet2 OSM-XML map is parsed into points, linestrings, and lanelets.
Each lanelet's centerline is derived by resampling both boundaries to a
common number of equal-arc-length vertices and averaging them pairwise;
the lanelet length is the centerline arc length.

A MergingAreaLayout labels the five areas of one merging location (area 1:
solid-line acceleration lane, 2: dashed acceleration lane, 3: lane drop,
4: upstream outer mainline, 5: outer mainline alongside areas 2+3) and
provides per-lanelet lengths so that a chain of lanelets can be collapsed
onto a single longitudinal axis.
"""

from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError, IntegrityError, MapParseError

logger = logging.getLogger(__name__)

# Tolerance when validating lanelet lengths against reference lengths from
# a layout file (the map geometry is authoritative, mismatches only warn).
LENGTH_TOLERANCE = 0.15

AREA_KEYS = (1, 2, 3, 4, 5)
LINE_TYPES = ("solid", "dashed", "virtual", "other")

# Minimum vertex count for boundary resampling; avoids pairing artifacts
# between boundaries digitized at different densities.
_MIN_RESAMPLE = 50

_EARTH_RADIUS = 6378137.0


@dataclass(frozen=True)
class MapPoint:
    """A map node with planar coordinates in the recording's local frame."""

    id: int
    x: float
    y: float
    z: float = 0.0


@dataclass(frozen=True)
class LineString:
    """An ordered run of points describing one painted or virtual line."""

    id: int
    point_ids: tuple[int, ...]
    line_type: str = "other"


@dataclass(frozen=True)
class LanePosition:
    """A position expressed in a lanelet's own frame.

    ``s`` is the arc length from the lanelet start along the centerline and
    ``lateral_offset`` is the signed perpendicular distance from the
    centerline, positive toward the left boundary.
    """

    lanelet_id: int
    s: float
    lateral_offset: float


class Lanelet:
    """An atomic drivable lane segment bounded by two linestrings."""

    __slots__ = ("id", "left_id", "right_id", "left_pts", "right_pts",
                 "centerline", "length", "_cum", "_poly")

    def __init__(self, lanelet_id: int, left_id: int, right_id: int,
                 left_pts: np.ndarray, right_pts: np.ndarray):
        self.id = lanelet_id
        self.left_id = left_id
        self.right_id = right_id
        n = max(len(left_pts), len(right_pts), _MIN_RESAMPLE)
        self.left_pts = _resample_polyline(left_pts, n)
        self.right_pts = _resample_polyline(right_pts, n)
        self.centerline = 0.5 * (self.left_pts + self.right_pts)
        self._cum = _cumulative_length(self.centerline)
        self.length = float(self._cum[-1])
        if self.length <= 0.0:
            raise IntegrityError(f"lanelet {lanelet_id} has zero length")
        # Strip polygon: left boundary forward, right boundary backward.
        self._poly = np.vstack([self.left_pts, self.right_pts[::-1]])

    def contains(self, x: float, y: float) -> bool:
        """Point-in-strip test on the polygon between the boundaries."""
        return _point_in_polygon(self._poly, x, y)

    def project(self, x: float, y: float) -> tuple[float, float, float]:
        """Project a point onto the centerline.

        Returns ``(s, lateral_offset, tangent_angle)``; the offset is
        positive toward the left boundary.
        """
        s, lat, tangent = _project_polyline(self.centerline, self._cum,
                                            np.array([[x, y]], dtype=float))
        return float(s[0]), float(lat[0]), float(tangent[0])


@dataclass
class LaneletMap:
    """A parsed lanelet2 map."""

    points: dict[int, MapPoint]
    linestrings: dict[int, LineString]
    lanelets: dict[int, Lanelet]
    name: str = ""

    def lanelet(self, lanelet_id: int) -> Lanelet:
        try:
            return self.lanelets[lanelet_id]
        except KeyError:
            raise IntegrityError(f"unknown lanelet id {lanelet_id}") from None


# ---------------------------------------------------------------------------
# Polyline helpers
# ---------------------------------------------------------------------------

def _cumulative_length(points: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to ``n`` equally spaced (by arc length) vertices."""
    points = np.asarray(points, dtype=float)
    cum = _cumulative_length(points)
    if cum[-1] <= 0.0:
        raise IntegrityError("polyline with coincident points cannot be resampled")
    target = np.linspace(0.0, cum[-1], n)
    xs = np.interp(target, cum, points[:, 0])
    ys = np.interp(target, cum, points[:, 1])
    return np.column_stack([xs, ys])


def _project_polyline(vertices: np.ndarray, cum: np.ndarray,
                      pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project points onto a polyline.

    Returns arrays ``(s, signed_lateral, tangent_angle)`` where the lateral
    distance is positive on the left of the local direction of travel.
    """
    a = vertices[:-1]                      # (M,2) segment starts
    d = vertices[1:] - a                   # (M,2) segment vectors
    seg_len2 = np.maximum(np.einsum("ij,ij->i", d, d), 1e-18)

    rel = pts[:, None, :] - a[None, :, :]              # (N,M,2)
    t = np.einsum("nmj,mj->nm", rel, d) / seg_len2     # (N,M)
    t = np.clip(t, 0.0, 1.0)
    foot = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist2 = np.sum((pts[:, None, :] - foot) ** 2, axis=2)
    best = np.argmin(dist2, axis=1)                    # (N,)

    idx = np.arange(len(pts))
    tb = t[idx, best]
    db = d[best]
    seg_norm = np.sqrt(seg_len2[best])
    s = cum[best] + tb * seg_norm
    diff = pts - foot[idx, best]
    # Left normal of the segment direction is (-dy, dx).
    lat = (diff[:, 1] * db[:, 0] - diff[:, 0] * db[:, 1]) / seg_norm
    tangent = np.arctan2(db[:, 1], db[:, 0])
    return s, lat, tangent


def _point_in_polygon(poly: np.ndarray, x: float, y: float) -> bool:
    """Ray-casting test, inclusive of points on the boundary."""
    n = len(poly)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        # On-edge check keeps boundary points inside.
        if _on_segment(xi, yi, xj, yj, x, y):
            return True
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def _on_segment(x0: float, y0: float, x1: float, y1: float,
                px: float, py: float, eps: float = 1e-9) -> bool:
    cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
    if abs(cross) > eps * max(1.0, abs(x1 - x0) + abs(y1 - y0)):
        return False
    dot = (px - x0) * (x1 - x0) + (py - y0) * (y1 - y0)
    return -eps <= dot <= (x1 - x0) ** 2 + (y1 - y0) ** 2 + eps


# ---------------------------------------------------------------------------
# OSM XML parsing
# ---------------------------------------------------------------------------

_LINE_TYPE_BY_SUBTYPE = {
    "solid": "solid",
    "solid_solid": "solid",
    "dashed": "dashed",
    "dashed_solid": "dashed",
    "solid_dashed": "dashed",
}


def parse_lanelet2(xml_bytes: bytes | str, name: str = "") -> LaneletMap:
    """Parse a lanelet2 OSM-XML document into a :class:`LaneletMap`.

    Node coordinates are taken from ``local_x``/``local_y`` tags when
    present, from ``x``/``y`` attributes otherwise, and as a last resort
    from ``lat``/``lon`` through a local tangent-plane projection around
    the map centroid (adequate for length queries, logged as a warning).

    Raises :class:`MapParseError` for malformed XML (with line number) and
    :class:`IntegrityError` for dangling references or an empty map.
    """
    if isinstance(xml_bytes, str):
        xml_bytes = xml_bytes.encode("utf-8")
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        line, col = exc.position
        raise MapParseError(f"malformed OSM XML at line {line}, column {col}: "
                            f"{exc.msg if hasattr(exc, 'msg') else exc}") from exc

    raw_nodes: dict[int, dict] = {}
    for node in root.iter("node"):
        nid = int(node.attrib["id"])
        tags = {t.attrib.get("k"): t.attrib.get("v") for t in node.iter("tag")}
        raw_nodes[nid] = {"attrib": node.attrib, "tags": tags}
    if len(raw_nodes) != len({*raw_nodes}):
        raise IntegrityError("duplicate node ids in map")

    points = _materialize_points(raw_nodes, name)

    linestrings: dict[int, LineString] = {}
    way_coords: dict[int, np.ndarray] = {}
    for way in root.iter("way"):
        wid = int(way.attrib["id"])
        refs = [int(nd.attrib["ref"]) for nd in way.iter("nd")]
        if len(refs) < 2:
            raise IntegrityError(f"linestring {wid} has fewer than 2 points")
        for ref in refs:
            if ref not in points:
                raise IntegrityError(f"linestring {wid} references missing point {ref}")
        tags = {t.attrib.get("k"): t.attrib.get("v") for t in way.iter("tag")}
        line_type = _classify_line_type(tags)
        coords = np.array([[points[r].x, points[r].y] for r in refs], dtype=float)
        coords = _drop_coincident(coords, wid)
        linestrings[wid] = LineString(wid, tuple(refs), line_type)
        way_coords[wid] = coords

    lanelets: dict[int, Lanelet] = {}
    for rel in root.iter("relation"):
        tags = {t.attrib.get("k"): t.attrib.get("v") for t in rel.iter("tag")}
        if tags.get("type") != "lanelet":
            continue
        rid = int(rel.attrib["id"])
        left_id = right_id = None
        for member in rel.iter("member"):
            role = member.attrib.get("role")
            if role == "left":
                left_id = int(member.attrib["ref"])
            elif role == "right":
                right_id = int(member.attrib["ref"])
        if left_id is None or right_id is None:
            raise IntegrityError(f"lanelet {rid} lacks a left or right bound")
        if left_id not in way_coords or right_id not in way_coords:
            missing = left_id if left_id not in way_coords else right_id
            raise IntegrityError(f"lanelet {rid} references missing linestring {missing}")
        if rid in lanelets:
            raise IntegrityError(f"duplicate lanelet id {rid}")
        left = way_coords[left_id]
        right = _align_orientation(left, way_coords[right_id])
        lanelets[rid] = Lanelet(rid, left_id, right_id, left, right)

    if not lanelets:
        raise IntegrityError("map contains no lanelets")
    return LaneletMap(points=points, linestrings=linestrings, lanelets=lanelets,
                      name=name)


def load_map(path: str | Path) -> LaneletMap:
    path = Path(path)
    return parse_lanelet2(path.read_bytes(), name=path.stem)


def _materialize_points(raw_nodes: dict[int, dict], name: str) -> dict[int, MapPoint]:
    points: dict[int, MapPoint] = {}
    needs_geo = []
    for nid, raw in raw_nodes.items():
        tags, attrib = raw["tags"], raw["attrib"]
        z = float(tags.get("ele", attrib.get("ele", 0.0)) or 0.0)
        if "local_x" in tags and "local_y" in tags:
            points[nid] = MapPoint(nid, float(tags["local_x"]), float(tags["local_y"]), z)
        elif "x" in attrib and "y" in attrib:
            points[nid] = MapPoint(nid, float(attrib["x"]), float(attrib["y"]), z)
        elif "lat" in attrib and "lon" in attrib:
            needs_geo.append((nid, float(attrib["lat"]), float(attrib["lon"]), z))
        else:
            raise IntegrityError(f"node {nid} carries no usable coordinates")
    if needs_geo:
        if points:
            raise IntegrityError("map mixes local and geographic node coordinates")
        logger.warning("map %s has geographic coordinates only; using a local "
                       "tangent-plane projection around the centroid", name or "<bytes>")
        lat0 = math.radians(sum(n[1] for n in needs_geo) / len(needs_geo))
        lon0 = math.radians(sum(n[2] for n in needs_geo) / len(needs_geo))
        cos0 = math.cos(lat0)
        for nid, lat, lon, z in needs_geo:
            x = _EARTH_RADIUS * (math.radians(lon) - lon0) * cos0
            y = _EARTH_RADIUS * (math.radians(lat) - lat0)
            points[nid] = MapPoint(nid, x, y, z)
    for pt in points.values():
        if not (math.isfinite(pt.x) and math.isfinite(pt.y)):
            raise IntegrityError(f"node {pt.id} has non-finite coordinates")
    return points


def _classify_line_type(tags: dict) -> str:
    if tags.get("type") == "virtual":
        return "virtual"
    subtype = tags.get("subtype", "")
    return _LINE_TYPE_BY_SUBTYPE.get(subtype, "other")


def _drop_coincident(coords: np.ndarray, way_id: int) -> np.ndarray:
    keep = [0]
    for i in range(1, len(coords)):
        if np.linalg.norm(coords[i] - coords[keep[-1]]) > 1e-9:
            keep.append(i)
    if len(keep) < 2:
        raise IntegrityError(f"linestring {way_id} collapses to a single point")
    return coords[keep]


def _align_orientation(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Flip the right boundary when it runs opposite to the left one."""
    straight = (np.linalg.norm(left[0] - right[0])
                + np.linalg.norm(left[-1] - right[-1]))
    crossed = (np.linalg.norm(left[0] - right[-1])
               + np.linalg.norm(left[-1] - right[0]))
    return right[::-1] if crossed < straight else right


# ---------------------------------------------------------------------------
# Merging-area layout
# ---------------------------------------------------------------------------

@dataclass
class MergingAreaLayout:
    """The five labeled areas of one merging location.

    ``area_lanelets`` maps area number (1..5) to the ordered, longitudinally
    contiguous lanelet ids of that area; ``lanelet_lengths`` holds one
    length per lanelet (from the map when available, from the layout file's
    reference lengths otherwise).
    """

    location_id: int
    area_lanelets: dict[int, tuple[int, ...]]
    lanelet_lengths: dict[int, float]
    inner_lanelets: tuple[int, ...] = ()
    off_ramp_lanelets: tuple[int, ...] = ()
    _areas_by_lanelet: dict[int, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for area in self.area_lanelets:
            if area not in AREA_KEYS:
                raise ConfigError(f"layout for location {self.location_id} "
                                  f"references area {area} (valid areas: 1..5)")
        for area in (1, 2, 3, 5):
            if not self.area_lanelets.get(area):
                raise ConfigError(f"layout for location {self.location_id} "
                                  f"leaves area {area} empty")
        by_lanelet: dict[int, list[int]] = {}
        for area, ids in self.area_lanelets.items():
            for lid in ids:
                if lid not in self.lanelet_lengths:
                    raise ConfigError(f"no length known for lanelet {lid} "
                                      f"(location {self.location_id})")
                by_lanelet.setdefault(lid, []).append(area)
        self._areas_by_lanelet = {lid: tuple(sorted(a)) for lid, a in by_lanelet.items()}
        if self.merge_window_length <= 0.0:
            raise ConfigError(f"non-positive merge window at location {self.location_id}")

    def area_length(self, area: int) -> float:
        ids = self.area_lanelets.get(area, ())
        return float(sum(self.lanelet_lengths[lid] for lid in ids))

    @property
    def merge_window_length(self) -> float:
        """Total length of areas 2 and 3 (the lane stretch where merging is legal)."""
        return self.area_length(2) + self.area_length(3)

    def areas_of(self, lanelet_id: int) -> tuple[int, ...]:
        return self._areas_by_lanelet.get(lanelet_id, ())

    def chain(self, areas: tuple[int, ...] | list[int]) -> tuple[int, ...]:
        """Ordered lanelet ids of the given areas, concatenated in area order."""
        out: list[int] = []
        for area in areas:
            out.extend(self.area_lanelets.get(area, ()))
        return tuple(out)

    def area_lanelet_set(self, areas) -> frozenset[int]:
        return frozenset(self.chain(tuple(areas)))


def load_layout_config(path: str | Path) -> dict:
    """Read a layout file (YAML mapping of location -> areas/lengths)."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse layout file {path}: {exc}") from exc
    if not isinstance(raw, dict) or "locations" not in raw:
        raise ConfigError(f"layout file {path} lacks a 'locations' mapping")
    return raw


def bundled_layout_path() -> Path:
    """Path of the layout file shipped with the package (locations 2/3/5/6)."""
    return Path(__file__).parent / "conf" / "merging_areas.yaml"


def load_layout(layout_config: dict | str | Path, location_id: int,
                lanelet_map: LaneletMap | None = None) -> MergingAreaLayout:
    """Build the layout of one location, validated against a map if given.

    With a map, lanelet lengths come from the parsed geometry and are
    checked against the layout file's reference lengths (mismatch beyond
    ``LENGTH_TOLERANCE`` warns, it is not fatal).  Without a map the
    reference lengths are used directly.
    """
    if not isinstance(layout_config, dict):
        layout_config = load_layout_config(layout_config)
    locations = layout_config["locations"]
    loc = locations.get(location_id, locations.get(str(location_id)))
    if loc is None:
        raise ConfigError(f"layout file does not cover location {location_id}")

    areas_raw = loc.get("areas")
    if not isinstance(areas_raw, dict):
        raise ConfigError(f"location {location_id} layout lacks an 'areas' mapping")
    area_lanelets = {int(a): tuple(int(i) for i in ids)
                     for a, ids in areas_raw.items()}
    ref_lengths = {int(k): float(v)
                   for k, v in (loc.get("lanelet_lengths") or {}).items()}

    if lanelet_map is not None:
        lengths: dict[int, float] = {}
        for ids in area_lanelets.values():
            for lid in ids:
                if lid not in lanelet_map.lanelets:
                    raise IntegrityError(f"layout references lanelet {lid} "
                                         f"absent from the map")
                lengths[lid] = lanelet_map.lanelets[lid].length
        for lid, expected in ref_lengths.items():
            got = lengths.get(lid)
            if got is not None and abs(got - expected) > LENGTH_TOLERANCE:
                logger.warning("location %s lanelet %s: map length %.2f m differs "
                               "from reference %.2f m by more than %.2f m",
                               location_id, lid, got, expected, LENGTH_TOLERANCE)
        _check_contiguity(location_id, area_lanelets, lanelet_map)
    else:
        lengths = ref_lengths

    return MergingAreaLayout(
        location_id=int(location_id),
        area_lanelets=area_lanelets,
        lanelet_lengths=lengths,
        inner_lanelets=tuple(int(i) for i in loc.get("inner_lanelets", ())),
        off_ramp_lanelets=tuple(int(i) for i in loc.get("off_ramp_lanelets", ())),
    )


def _check_contiguity(location_id: int, area_lanelets: dict, lanelet_map: LaneletMap):
    for area, ids in area_lanelets.items():
        for prev, nxt in zip(ids, ids[1:]):
            end = lanelet_map.lanelets[prev].centerline[-1]
            start = lanelet_map.lanelets[nxt].centerline[0]
            if np.linalg.norm(end - start) > 0.5:
                logger.warning("location %s area %s: lanelets %s -> %s are not "
                               "longitudinally contiguous", location_id, area, prev, nxt)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def _drop_collinear(vertices: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Remove interior vertices lying exactly on their neighbors' segment."""
    if len(vertices) <= 2:
        return vertices
    keep = [0]
    for i in range(1, len(vertices) - 1):
        a = vertices[keep[-1]]
        b = vertices[i]
        c = vertices[i + 1]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        span = max(abs(c[0] - a[0]), abs(c[1] - a[1]), 1.0)
        if abs(cross) > tol * span:
            keep.append(i)
    keep.append(len(vertices) - 1)
    return vertices[keep]


def locate(lanelet_map: LaneletMap, x: float, y: float,
           heading: float | None = None) -> LanePosition | None:
    """Map-match a point to a lanelet.

    Among the lanelets whose boundary strip contains the point, the one
    whose centerline tangent best matches ``heading`` wins; ties prefer the
    lanelet where the point is not at the very end (so shared boundaries
    assign downstream) and then the lower id.  Returns ``None`` when no
    lanelet contains the point.
    """
    best: tuple | None = None
    for lid in sorted(lanelet_map.lanelets):
        ll = lanelet_map.lanelets[lid]
        if not ll.contains(x, y):
            continue
        s, lat, tangent = ll.project(x, y)
        if heading is None:
            angle_err = 0.0
        else:
            angle_err = abs(_wrap_angle(tangent - heading))
        at_end = 1 if s >= ll.length - 1e-9 else 0
        key = (round(angle_err, 6), at_end, lid)
        if best is None or key < best[0]:
            best = (key, LanePosition(lid, s, lat))
    return None if best is None else best[1]


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def longitudinal_chain_coordinate(layout: MergingAreaLayout,
                                  areas: tuple[int, ...] | list[int],
                                  position: LanePosition) -> float:
    """Collapse a lane position onto the single longitudinal axis of a chain.

    The chain is the ordered concatenation of the given areas' lanelets;
    the coordinate is the sum of all upstream lanelet lengths plus ``s``.
    """
    chain = layout.chain(tuple(areas))
    if position.lanelet_id not in chain:
        raise DomainError(f"lanelet {position.lanelet_id} is not part of the "
                          f"area {tuple(areas)} chain at location {layout.location_id}")
    length = layout.lanelet_lengths[position.lanelet_id]
    if not (-1e-9 <= position.s <= length + 1e-9):
        raise DomainError(f"s={position.s:.3f} outside lanelet "
                          f"{position.lanelet_id} of length {length:.3f}")
    upstream = 0.0
    for lid in chain:
        if lid == position.lanelet_id:
            break
        upstream += layout.lanelet_lengths[lid]
    return upstream + position.s


class ChainGeometry:
    """Concatenated centerline of an area chain, for longitudinal projection.

    Projection gives every point (on the chain or on a parallel lane) a
    coordinate on the chain's longitudinal axis plus a signed lateral
    distance, positive to the left of the direction of travel.  Collinear
    resampling vertices are dropped (exactly, not approximately), which
    keeps the projection of bulk trajectories cheap on straight roads.
    """

    def __init__(self, lanelet_ids: tuple[int, ...], vertices: np.ndarray):
        self.lanelet_ids = lanelet_ids
        self.vertices = _drop_collinear(vertices)
        self.cum = _cumulative_length(self.vertices)
        self.length = float(self.cum[-1])

    @classmethod
    def from_map(cls, lanelet_map: LaneletMap, layout: MergingAreaLayout,
                 areas) -> "ChainGeometry":
        ids = layout.chain(tuple(areas))
        parts = []
        for i, lid in enumerate(ids):
            pts = lanelet_map.lanelet(lid).centerline
            parts.append(pts if i == 0 else pts[1:])
        return cls(ids, np.vstack(parts))

    @classmethod
    def boundary_from_map(cls, lanelet_map: LaneletMap, layout: MergingAreaLayout,
                          areas, side: str = "left") -> "ChainGeometry":
        """Chain built from one boundary (e.g. the merge line) instead of the centerline."""
        ids = layout.chain(tuple(areas))
        parts = []
        for i, lid in enumerate(ids):
            ll = lanelet_map.lanelet(lid)
            pts = ll.left_pts if side == "left" else ll.right_pts
            parts.append(pts if i == 0 else pts[1:])
        return cls(ids, np.vstack(parts))

    def project(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project Nx2 points; returns (chain coordinate, signed lateral)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        s, lat, _ = _project_polyline(self.vertices, self.cum, pts)
        return s, lat
