"""Generalized traffic variables over labeled space-time regions.

For a region of chain length L observed over T seconds (|A| = L*T), every
vehicle whose center occupies the region contributes its distance
traveled inside (sum over frame intervals) and its time spent inside.
Flow is total distance over |A|, density total time over |A|, and
space-mean speed their ratio, so q = k*v holds identically.

Discretization: a frame interval [f, f+1) counts when the vehicle is
inside at frame f (left-closed accumulation); its distance contribution
is the planar displacement to the next frame.  Occupancy is decided by
the assigned-lanelet membership in the region's chain.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .events import MergingEvent
from .map_model import MergingAreaLayout
from .trajectory import Track


@dataclass(frozen=True)
class SpaceTimeRegion:
    """A lanelet chain observed over a frame window."""

    lanelet_chain: tuple[int, ...]
    length: float                    # m, chain length
    t0: int
    t1: int
    timestep: float

    def __post_init__(self):
        if self.length <= 0:
            raise DomainError(f"region length must be positive, got {self.length}")
        if self.t1 <= self.t0:
            raise DomainError(f"empty frame window [{self.t0}, {self.t1}]")

    @property
    def area_measure(self) -> float:
        """|A| = L * T in meter-seconds."""
        return self.length * (self.t1 - self.t0) * self.timestep


@dataclass(frozen=True)
class EdieEstimate:
    q: float                  # veh/s
    k: float                  # veh/m
    v: float | None           # m/s, None when no vehicle time was observed
    n_vehicles: int
    total_distance: float     # m, d(A)
    total_time: float         # s, t(A)

    @property
    def q_veh_h(self) -> float:
        return self.q * 3600.0

    @property
    def k_veh_km(self) -> float:
        return self.k * 1000.0

    @property
    def v_km_h(self) -> float | None:
        return None if self.v is None else self.v * 3.6


def edie_estimate(tracks: list[Track], region: SpaceTimeRegion) -> EdieEstimate:
    """Accumulate Edie's definitions over one region.

    Vehicles of any class and route count; partial traversals contribute
    pro rata by the frames whose center lies inside.
    """
    chain = frozenset(region.lanelet_chain)
    total_x = 0.0
    total_frames = 0
    n_vehicles = 0
    for tr in tracks:
        f_lo = max(region.t0, tr.first_frame)
        f_hi = min(region.t1, tr.last_frame)  # interval f needs frame f+1
        if f_hi <= f_lo:
            continue
        counted = False
        for frame in range(f_lo, f_hi):
            i = frame - tr.first_frame
            if not chain.intersection(tr.lanelet_lists[i]):
                continue
            dx = tr.x[i + 1] - tr.x[i]
            dy = tr.y[i + 1] - tr.y[i]
            total_x += (dx * dx + dy * dy) ** 0.5
            total_frames += 1
            counted = True
        if counted:
            n_vehicles += 1

    total_t = total_frames * region.timestep
    area = region.area_measure
    q = total_x / area
    k = total_t / area
    v = (total_x / total_t) if total_t > 0 else None
    return EdieEstimate(q=q, k=k, v=v, n_vehicles=n_vehicles,
                        total_distance=total_x, total_time=total_t)


def event_macro(event: MergingEvent, tracks: list[Track],
                layout: MergingAreaLayout,
                timestep: float) -> tuple[EdieEstimate, EdieEstimate]:
    """(upstream, downstream) estimates for one event's [t_B, t_F] window.

    Upstream is the area-4 chain, downstream the area-5 chain.
    """
    upstream = SpaceTimeRegion(
        lanelet_chain=layout.chain((4,)),
        length=layout.area_length(4),
        t0=event.t_B, t1=event.t_F, timestep=timestep)
    downstream = SpaceTimeRegion(
        lanelet_chain=layout.chain((5,)),
        length=layout.area_length(5),
        t0=event.t_B, t1=event.t_F, timestep=timestep)
    return edie_estimate(tracks, upstream), edie_estimate(tracks, downstream)
