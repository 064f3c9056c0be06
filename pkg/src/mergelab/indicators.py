"""Microscopic merging indicators.

Per accepted event: merging speed (planar speed magnitude at F), merging
distance (chain coordinate of F minus chain coordinate of D on the
area-2+3 axis), distance ratio (distance over the area-2+3 length),
duration ((t_F - t_D) * timestep), maximum lateral speed/acceleration from
a degree-5 least-squares fit of the boundary-referenced lateral signal,
minimum 2D time-to-collision against lead and rear over [D, F], distance
and time headways at F, and the consecutive lane-change duration
((t_H - t_F) * timestep) when the vehicle immediately changes lanes again.

The 2D TTC uses the vector form: with d the Euclidean distance between
the two centers and d_dot its rate (projection of the relative velocity
on the connecting line), TTC = -d / d_dot while d_dot < 0, else infinite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IntegrityError
from .events import MergingEvent
from .map_model import ChainGeometry, LaneletMap, MergingAreaLayout
from .scenarios import NeighborTimeline, TrackIndex
from .trajectory import Track

logger = logging.getLogger(__name__)

INDICATOR_NAMES = ("merging_speed", "merging_distance", "distance_ratio",
                   "duration", "max_lat_speed", "max_lat_accel")

_MIN_FIT_SAMPLES = 6
_FIT_DEGREE = 5


@dataclass(frozen=True)
class LateralFit:
    """Degree-5 polynomial of the lateral signal over normalized time u in [0,1]."""

    coefficients: tuple[float, ...]     # low order first
    window: tuple[int, int]             # (t_D, t_F)
    rms_residual: float


@dataclass
class IndicatorSet:
    """All microscopic indicators of one event (None marks undefined)."""

    merging_speed: float | None = None
    merging_distance: float | None = None
    distance_ratio: float | None = None
    duration: float | None = None
    max_lat_speed: float | None = None
    max_lat_accel: float | None = None
    min_ttc_lead: float | None = None   # may be +inf (never approaching)
    min_ttc_rear: float | None = None
    lead_dhw: float | None = None
    lead_thw: float | None = None
    rear_dhw: float | None = None
    rear_thw: float | None = None
    consecutive_lc_duration: float | None = None


# ---------------------------------------------------------------------------
# Longitudinal indicators
# ---------------------------------------------------------------------------

def merging_distance(event: MergingEvent, track: Track,
                     merge_chain: ChainGeometry) -> float | None:
    """Chain-coordinate distance from position D to position F (Eq.-style
    x_F - x_D on the area-2+3 axis).  Undefined for solid-line merges."""
    if event.t_D is None:
        return None
    pts = np.array([track.center_at(event.t_D), track.center_at(event.t_F)])
    s, _ = merge_chain.project(pts)
    return float(s[1] - s[0])


def distance_ratio(distance: float | None, layout: MergingAreaLayout) -> float | None:
    """Merging distance scaled by the location's merge-window length."""
    if distance is None:
        return None
    ratio = distance / layout.merge_window_length
    if not (-1e-6 <= ratio <= 1.0 + 1e-6):
        raise IntegrityError(f"distance ratio {ratio:.6f} outside [0, 1]; "
                             f"layout or key-position detection is wrong")
    return float(min(max(ratio, 0.0), 1.0))


def merging_duration(event: MergingEvent, timestep: float) -> float | None:
    if event.t_D is None:
        return None
    return (event.t_F - event.t_D) * timestep


def consecutive_lc_duration(event: MergingEvent, timestep: float) -> float | None:
    if event.t_H is None:
        return None
    return (event.t_H - event.t_F) * timestep


# ---------------------------------------------------------------------------
# Lateral kinematics
# ---------------------------------------------------------------------------

def fit_lateral_kinematics(event: MergingEvent, track: Track,
                           boundary: ChainGeometry, timestep: float
                           ) -> tuple[LateralFit | None, float | None, float | None]:
    """Fit the lateral signal over [t_D, t_F] and extract extreme rates.

    The signal is the signed perpendicular distance of the vehicle center
    to the fixed boundary line between the acceleration lane and the
    mainline, which is continuous across the lane switch by construction.
    Time is normalized to u = (t - t_D)/(t_F - t_D), so the least-squares
    system stays well conditioned; speed and acceleration follow from the
    chain rule (1/T and 1/T^2 factors).  Returns (None, None, None) when
    fewer than 6 samples exist.
    """
    if event.t_D is None:
        return None, None, None
    n = event.t_F - event.t_D + 1
    if n < _MIN_FIT_SAMPLES:
        logger.warning("event %s: only %d samples in [D, F]; lateral fit skipped",
                       event.event_id, n)
        return None, None, None

    i0 = track.index_of(event.t_D)
    i1 = track.index_of(event.t_F)
    pts = np.column_stack([track.x[i0:i1 + 1], track.y[i0:i1 + 1]])
    _, lateral = boundary.project(pts)

    u = np.linspace(0.0, 1.0, n)
    coeffs = np.polynomial.polynomial.polyfit(u, lateral, _FIT_DEGREE)
    fitted = np.polynomial.polynomial.polyval(u, coeffs)
    rms = float(np.sqrt(np.mean((fitted - lateral) ** 2)))

    fit = LateralFit(tuple(float(c) for c in coeffs), (event.t_D, event.t_F), rms)
    max_speed, max_accel = lateral_extremes(fit, timestep)
    return fit, max_speed, max_accel


def lateral_extremes(fit: LateralFit, timestep: float) -> tuple[float, float]:
    """Maximum |lateral speed| and |lateral acceleration| of a fit.

    Extremes of the derivative polynomials are located exactly through the
    real roots of their own derivatives, so no sampling grid limits the
    precision.
    """
    t_d, t_f = fit.window
    duration = (t_f - t_d) * timestep
    c = np.asarray(fit.coefficients)
    d1 = np.polynomial.polynomial.polyder(c)
    d2 = np.polynomial.polynomial.polyder(c, 2)
    max_speed = _poly_abs_max(d1, 0.0, 1.0) / duration
    max_accel = _poly_abs_max(d2, 0.0, 1.0) / duration ** 2
    return float(max_speed), float(max_accel)


def _poly_abs_max(coeffs: np.ndarray, lo: float, hi: float) -> float:
    """Exact max of |p(u)| on [lo, hi] via the critical points of p."""
    candidates = [lo, hi]
    deriv = np.polynomial.polynomial.polyder(coeffs)
    if len(deriv) > 1 or (len(deriv) == 1 and deriv[0] != 0.0):
        roots = np.polynomial.polynomial.polyroots(deriv)
        for r in roots:
            if abs(r.imag) < 1e-9 and lo - 1e-12 <= r.real <= hi + 1e-12:
                candidates.append(float(np.clip(r.real, lo, hi)))
    vals = np.polynomial.polynomial.polyval(np.array(candidates), coeffs)
    return float(np.max(np.abs(vals)))


def merging_speed(event: MergingEvent, track: Track) -> float:
    """Planar speed magnitude of the ego at position F."""
    return track.speed_at(event.t_F)


# ---------------------------------------------------------------------------
# Time to collision
# ---------------------------------------------------------------------------

def ttc_1d(gap_bumper: float, v_follower: float, v_leader: float) -> float:
    """Lane-aligned TTC: bumper gap over closing speed, +inf when opening."""
    if gap_bumper < 0:
        raise DomainError(f"negative bumper gap {gap_bumper:.3f} (overlap)")
    closing = v_follower - v_leader
    if closing <= 0.0:
        return math.inf
    return gap_bumper / closing


def ttc_2d(p_i, v_i, p_j, v_j) -> float:
    """Vector-form TTC between two center points.

    d is the Euclidean distance, d_dot = (p_i - p_j) . (v_i - v_j) / d its
    rate; the pair is approaching while d_dot < 0 and TTC = -d / d_dot.
    """
    dp = np.asarray(p_i, dtype=float) - np.asarray(p_j, dtype=float)
    dv = np.asarray(v_i, dtype=float) - np.asarray(v_j, dtype=float)
    d = float(np.sqrt(dp @ dp))
    if d <= 0.0:
        raise DomainError("coincident positions have no defined TTC")
    d_dot = float(dp @ dv) / d
    if d_dot >= 0.0:
        return math.inf
    return -d / d_dot


def min_ttc(event: MergingEvent, timeline: NeighborTimeline,
            index: TrackIndex) -> tuple[float | None, float | None]:
    """Minimum finite 2D TTC against the current lead and rear over [D, F].

    +inf means the role existed but was never approaching; None marks the
    window as undefined (solid-line merges have no position D).
    """
    if event.t_D is None:
        return None, None
    ego = index.tracks_by_id[event.track_id]
    best = {"lead": math.inf, "rear": math.inf}
    for snap in timeline.snapshots:
        if snap.frame < event.t_D:
            continue
        for role, tid in (("lead", snap.lead_id), ("rear", snap.rear_id)):
            if tid is None:
                continue
            other = index.tracks_by_id[tid]
            if not other.covers(snap.frame):
                continue
            val = ttc_2d(ego.center_at(snap.frame), ego.velocity_at(snap.frame),
                         other.center_at(snap.frame), other.velocity_at(snap.frame))
            if val < best[role]:
                best[role] = val
    return best["lead"], best["rear"]


# ---------------------------------------------------------------------------
# Headways
# ---------------------------------------------------------------------------

def headways(event: MergingEvent, timeline: NeighborTimeline,
             index: TrackIndex) -> tuple[float | None, float | None,
                                         float | None, float | None]:
    """(lead_dhw, lead_thw, rear_dhw, rear_thw) at position F.

    Distance headways are the bumper-to-bumper gaps on the chain axis; the
    lead time headway divides by the ego speed, the rear one by the rear
    vehicle's speed.  Zero divisor speeds give +inf; absent roles give None.
    """
    final = timeline.final
    ego = index.tracks_by_id[event.track_id]

    lead_dhw = lead_thw = rear_dhw = rear_thw = None
    if final.lead_id is not None:
        lead_dhw = final.lead_gap
        ego_speed = ego.speed_at(event.t_F)
        lead_thw = (lead_dhw / ego_speed) if ego_speed > 0 else math.inf
    if final.rear_id is not None:
        rear_dhw = final.rear_gap
        rear = index.tracks_by_id[final.rear_id]
        rear_speed = rear.speed_at(event.t_F) if rear.covers(event.t_F) else 0.0
        rear_thw = (rear_dhw / rear_speed) if rear_speed > 0 else math.inf
    return lead_dhw, lead_thw, rear_dhw, rear_thw


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def static_indicators(event: MergingEvent, track: Track,
                      layout: MergingAreaLayout, timestep: float,
                      merge_chain: ChainGeometry | None,
                      boundary: ChainGeometry | None) -> IndicatorSet:
    """The threshold-independent indicators of one event.

    Chain-based indicators stay undefined when no map geometry is
    available; solid-line merges keep only the F-anchored quantities.
    """
    out = IndicatorSet()
    out.merging_speed = merging_speed(event, track)
    out.duration = merging_duration(event, timestep)
    out.consecutive_lc_duration = consecutive_lc_duration(event, timestep)
    if merge_chain is not None:
        dist = merging_distance(event, track, merge_chain)
        out.merging_distance = dist
        out.distance_ratio = distance_ratio(dist, layout)
    if boundary is not None:
        _, out.max_lat_speed, out.max_lat_accel = fit_lateral_kinematics(
            event, track, boundary, timestep)
    return out


def compute_indicator_set(event: MergingEvent, timeline: NeighborTimeline,
                          index: TrackIndex, layout: MergingAreaLayout,
                          timestep: float,
                          merge_chain: ChainGeometry | None,
                          boundary: ChainGeometry | None,
                          base: IndicatorSet | None = None) -> IndicatorSet:
    """All indicators of one (event, timeline) pair.

    ``base`` carries precomputed threshold-independent values so a
    threshold sweep does not refit the lateral polynomial per threshold.
    """
    ego = index.tracks_by_id[event.track_id]
    if base is None:
        base = static_indicators(event, ego, layout, timestep, merge_chain,
                                 boundary)
    out = IndicatorSet(**vars(base))
    out.min_ttc_lead, out.min_ttc_rear = min_ttc(event, timeline, index)
    (out.lead_dhw, out.lead_thw,
     out.rear_dhw, out.rear_thw) = headways(event, timeline, index)
    return out


def build_merge_chain(lanelet_map: LaneletMap,
                      layout: MergingAreaLayout) -> ChainGeometry:
    """Centerline chain of areas 2+3 (the x_D/x_F longitudinal axis)."""
    return ChainGeometry.from_map(lanelet_map, layout, (2, 3))


def build_merge_boundary(lanelet_map: LaneletMap,
                         layout: MergingAreaLayout) -> ChainGeometry:
    """Left boundary of areas 2+3: the painted line the merge crosses."""
    return ChainGeometry.boundary_from_map(lanelet_map, layout, (2, 3), side="left")
