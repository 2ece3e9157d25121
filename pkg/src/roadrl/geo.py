"""Geodesic primitives: WGS84 points, great-circle distance, local planar math."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateTriple

EARTH_RADIUS_M = 6_371_000.0

# Circles through three nearly-collinear points degenerate; below this triangle
# area (m^2) we call the configuration straight.
COLLINEAR_AREA_M2 = 1e-6

INFINITE_RADIUS = math.inf


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")


def haversine_gcd(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points on the mean-radius sphere."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def project_local(origin: GeoPoint, p: GeoPoint) -> tuple[float, float]:
    """Equirectangular projection of p into a meter plane centered on origin.

    Adequate at junction scale (tens of meters); x grows east, y grows north.
    """
    x = EARTH_RADIUS_M * math.radians(p.lon - origin.lon) * math.cos(math.radians(origin.lat))
    y = EARTH_RADIUS_M * math.radians(p.lat - origin.lat)
    return x, y


def circle_through(
    p1: tuple[float, float],
    p2: tuple[float, float],
    p3: tuple[float, float],
) -> tuple[tuple[float, float] | None, float]:
    """Circumcircle of three planar points as (center, radius).

    Returns (None, INFINITE_RADIUS) when the points are collinear within
    COLLINEAR_AREA_M2. Exactly duplicated points raise DegenerateTriple.
    """
    if p1 == p2 or p1 == p3 or p2 == p3:
        raise DegenerateTriple(f"duplicated point among {p1}, {p2}, {p3}")
    ax, ay = p1
    bx, by = p2
    cx, cy = p3
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    # |d| is four times the triangle area
    if abs(d) / 4.0 < COLLINEAR_AREA_M2:
        return None, INFINITE_RADIUS
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    radius = math.hypot(ax - ux, ay - uy)
    return (ux, uy), radius
