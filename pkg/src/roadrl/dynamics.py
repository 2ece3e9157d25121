"""Longitudinal vehicle physics and the sensor suite.

A vehicle's state is the pair of its last two positions along its path; one
affine update per tick moves it, with separate acceleration and braking
models selected by the sign of the action. Braking can stop the vehicle but
never reverse it. Sensors are total functions: anything absent or beyond the
horizon saturates at the horizon value, keeping the state vector fixed-size.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import NumericFault
from .graph import RoadGraph
from .routing import Path

# Distance sensors saturate here (m); also the straight-road radius sentinel.
DEFAULT_HORIZON = 200.0


@dataclass(frozen=True)
class VehicleProps:
    m: float        # kg
    f_max: float    # N, maximum acceleration force
    eta: float      # friction coefficient
    tau: float      # brake correction factor
    length: float   # m

    def __post_init__(self):
        if self.m <= 0 or self.f_max <= 0 or self.eta < 0 or self.tau <= 0 or self.length <= 0:
            raise ValueError(f"invalid vehicle properties: {self}")


@dataclass(frozen=True)
class PhysConstants:
    t: float = 0.1       # s, sampling period
    g0: float = 9.81     # m/s^2
    kappa: float = 0.8   # static friction coefficient

    def __post_init__(self):
        if self.t <= 0 or self.kappa <= 0:
            raise ValueError(f"invalid physics constants: {self}")


@dataclass(frozen=True)
class MotionState:
    p: float        # current position along path (m)
    p_prev: float   # position one tick earlier

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.p_prev)):
            raise NumericFault(f"non-finite motion state {self}")


@dataclass(frozen=True)
class SensorReading:
    v: float
    v_limit: float
    a_long: float
    a_lat: float
    d_next_curve: float
    r_next_curve: float
    d_curve_next_intersection: float
    d_next_vehicle_same_path: float
    d_next_vehicle_next_intersection: float


def clamp_action(a: float) -> float:
    return -1.0 if a < -1.0 else (1.0 if a > 1.0 else a)


def step_motion(s: MotionState, a: float, props: VehicleProps, k: PhysConstants) -> MotionState:
    """One tick of the position update.

    Actions in [0, 1] drive the acceleration model, [-1, 0) the braking model;
    both share the friction-damped homogeneous part. If the update would move
    the vehicle backwards it stops dead instead (both state entries collapse
    to the current position).
    """
    if not math.isfinite(a):
        raise NumericFault(f"non-finite action {a}")
    a = clamp_action(a)
    denom = props.eta * k.t + props.m
    a00 = (props.eta * k.t + 2.0 * props.m) / denom
    a01 = -props.m / denom
    if a >= 0:
        b0 = props.f_max * k.t * k.t / denom
    else:
        b0 = k.t * k.t * k.g0 * k.kappa * props.tau * props.m / denom
    p_next = a00 * s.p + a01 * s.p_prev + b0 * a
    if p_next < s.p:
        return MotionState(s.p, s.p)
    return MotionState(p_next, s.p)


def velocity(s: MotionState, k: PhysConstants) -> float:
    return (s.p - s.p_prev) / k.t


def accel_long(prev_v: float, v: float, k: PhysConstants) -> float:
    return (v - prev_v) / k.t


class PathFrame:
    """Arc-length geometry of one path over an enhanced graph.

    Precomputes cumulative node arcs, the curve spans covering each interior
    node, and per-node arc positions, so per-tick sensor reads are cheap.
    """

    def __init__(self, g: RoadGraph, path: Path):
        self.graph = g
        self.path = path
        cum = [0.0]
        for eid in path.edges:
            cum.append(cum[-1] + g.edges[eid].gcd)
        self.cum = cum
        self.length = cum[-1]
        # (span_start, span_end, radius) per interior node, ordered along the path
        spans = []
        for i in range(len(path.edges) - 1):
            c = g.curves.get((path.edges[i], path.edges[i + 1]))
            if c is None:
                continue
            node_arc = cum[i + 1]
            spans.append((node_arc - c.entry_offset, node_arc + c.exit_offset, c.radius))
        self.spans = spans

    def edge_index_at(self, arc: float) -> int:
        idx = bisect_right(self.cum, arc) - 1
        return min(max(idx, 0), len(self.path.edges) - 1)

    def edge_id_at(self, arc: float) -> int:
        return self.path.edges[self.edge_index_at(arc)]

    def v_limit_at(self, arc: float) -> float:
        return self.graph.edges[self.edge_id_at(arc)].v_max

    def point_at(self, arc: float) -> tuple[float, float, float]:
        """(lat, lon, heading_deg) interpolated along the current edge."""
        idx = self.edge_index_at(arc)
        e = self.graph.edges[self.path.edges[idx]]
        a = self.graph.nodes[e.frm]
        b = self.graph.nodes[e.to]
        f = (arc - self.cum[idx]) / e.gcd
        f = min(max(f, 0.0), 1.0)
        lat = a.lat + (b.lat - a.lat) * f
        lon = a.lon + (b.lon - a.lon) * f
        east = (b.lon - a.lon) * math.cos(math.radians((a.lat + b.lat) / 2.0))
        north = b.lat - a.lat
        heading = math.degrees(math.atan2(east, north)) % 360.0
        return lat, lon, heading

    def arc_of_node_after(self, node: int, min_arc: float) -> float | None:
        """Arc of the first visit of `node` at or after min_arc, None if absent."""
        for i, n in enumerate(self.path.nodes):
            if n == node and self.cum[i] >= min_arc:
                return self.cum[i]
        return None


def accel_lat(v: float, frame: PathFrame, arc: float) -> float:
    """Centripetal acceleration v^2/r inside a curve span, 0 elsewhere."""
    for start, end, radius in frame.spans:
        if start <= arc <= end:
            return 0.0 if math.isinf(radius) else v * v / radius
        if start > arc:
            break
    return 0.0


@dataclass(frozen=True)
class VehiclePose:
    """What other vehicles expose to a sensor read: their frame, arc, length."""
    frame: PathFrame
    arc: float
    length: float


def read_sensors(
    frame: PathFrame,
    arc: float,
    v: float,
    prev_v: float,
    own_length: float,
    others: list[VehiclePose],
    intersections: set[int],
    k: PhysConstants,
    horizon: float = DEFAULT_HORIZON,
) -> SensorReading:
    g = frame.graph

    # next curve ahead with a real (finite) radius
    d_next_curve = horizon
    r_next_curve = horizon
    for start, _end, radius in frame.spans:
        if start >= arc and not math.isinf(radius):
            if start - arc < horizon:
                d_next_curve = start - arc
                r_next_curve = radius
            break

    # next intersection node along the path
    ix_arc = None
    ix_index = None
    for i in range(1, len(frame.path.nodes)):
        if frame.cum[i] >= arc and frame.path.nodes[i] in intersections:
            ix_arc = frame.cum[i]
            ix_index = i
            break

    d_curve_next_intersection = horizon
    if ix_index is not None and ix_index < len(frame.path.edges):
        c = g.curves.get((frame.path.edges[ix_index - 1], frame.path.edges[ix_index]))
        if c is not None:
            d = max(0.0, (ix_arc - c.entry_offset) - arc)
            d_curve_next_intersection = min(d, horizon)

    # nearest vehicle ahead on our own path, bumper to bumper
    d_next_vehicle = horizon
    remaining = {}
    for i in range(frame.edge_index_at(arc), len(frame.path.edges)):
        remaining.setdefault(frame.path.edges[i], []).append(i)
    for other in others:
        eid = other.frame.edge_id_at(other.arc)
        for i in remaining.get(eid, ()):
            offset = other.arc - other.frame.cum[other.frame.edge_index_at(other.arc)]
            cand = frame.cum[i] + offset
            if cand >= arc:
                gap = cand - arc - (own_length + other.length) / 2.0
                d_next_vehicle = min(d_next_vehicle, max(0.0, gap))
    d_next_vehicle = min(d_next_vehicle, horizon)

    # conflict distance: us to the next intersection plus the closest other vehicle to it
    d_conflict = horizon
    if ix_arc is not None:
        d_own = ix_arc - arc
        node = frame.path.nodes[ix_index]
        best_other = None
        for other in others:
            a_node = other.frame.arc_of_node_after(node, other.arc)
            if a_node is not None:
                d_o = a_node - other.arc
                best_other = d_o if best_other is None else min(best_other, d_o)
        if best_other is not None:
            d_conflict = min(d_own + best_other, horizon)

    return SensorReading(
        v=v,
        v_limit=frame.v_limit_at(arc),
        a_long=accel_long(prev_v, v, k),
        a_lat=accel_lat(v, frame, arc),
        d_next_curve=d_next_curve,
        r_next_curve=r_next_curve,
        d_curve_next_intersection=d_curve_next_intersection,
        d_next_vehicle_same_path=d_next_vehicle,
        d_next_vehicle_next_intersection=d_conflict,
    )
