import math

import mpmath
import numpy as np
import pytest

from roadrl.errors import DegenerateTriple
from roadrl.geo import (
    EARTH_RADIUS_M,
    INFINITE_RADIUS,
    GeoPoint,
    circle_through,
    haversine_gcd,
    project_local,
)


def gcd_oracle(lat1, lon1, lat2, lon2):
    """High-precision great-circle distance via the Vincenty sphere formula.

    Different formula from the implementation (atan2 form instead of
    haversine), evaluated at 50 digits.
    """
    with mpmath.workdps(50):
        phi1, phi2 = mpmath.radians(lat1), mpmath.radians(lat2)
        dlam = mpmath.radians(lon2 - lon1)
        num = mpmath.sqrt(
            (mpmath.cos(phi2) * mpmath.sin(dlam)) ** 2
            + (
                mpmath.cos(phi1) * mpmath.sin(phi2)
                - mpmath.sin(phi1) * mpmath.cos(phi2) * mpmath.cos(dlam)
            )
            ** 2
        )
        den = mpmath.sin(phi1) * mpmath.sin(phi2) + mpmath.cos(phi1) * mpmath.cos(phi2) * mpmath.cos(dlam)
        return float(EARTH_RADIUS_M * mpmath.atan2(num, den))


def test_geopoint_bounds():
    GeoPoint(90, 180)
    GeoPoint(-90, -180)
    with pytest.raises(ValueError):
        GeoPoint(90.1, 0)
    with pytest.raises(ValueError):
        GeoPoint(0, -180.5)


def test_haversine_identical_points():
    assert haversine_gcd(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0


def test_haversine_one_degree_equator():
    # R * pi/180
    assert haversine_gcd(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(111194.93, abs=0.01)
    assert haversine_gcd(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(
        gcd_oracle(0, 0, 0, 1), abs=0.01
    )


def test_haversine_quarter_circle():
    # pi * R / 2
    assert haversine_gcd(GeoPoint(0, 0), GeoPoint(0, 90)) == pytest.approx(10007543.4, abs=0.1)


def test_haversine_symmetry(rng):
    for _ in range(300):
        a = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
        b = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
        assert haversine_gcd(a, b) == haversine_gcd(b, a)
        assert haversine_gcd(a, b) >= 0.0


def test_haversine_triangle_inequality(rng):
    for _ in range(300):
        pts = [GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180)) for _ in range(3)]
        ab = haversine_gcd(pts[0], pts[1])
        bc = haversine_gcd(pts[1], pts[2])
        ac = haversine_gcd(pts[0], pts[2])
        assert ac <= (ab + bc) * (1 + 1e-6)


def test_haversine_vs_oracle_random(rng):
    for _ in range(200):
        lat1, lat2 = rng.uniform(-89, 89, size=2)
        lon1, lon2 = rng.uniform(-179, 179, size=2)
        got = haversine_gcd(GeoPoint(lat1, lon1), GeoPoint(lat2, lon2))
        want = gcd_oracle(lat1, lon1, lat2, lon2)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-3)


def test_project_local_scale():
    origin = GeoPoint(0, 0)
    x, y = project_local(origin, GeoPoint(0, 0.001))
    assert x == pytest.approx(111194.93 * 0.001, rel=1e-6)
    assert y == 0.0
    x, y = project_local(origin, GeoPoint(0.001, 0))
    assert x == 0.0
    assert y == pytest.approx(111194.93 * 0.001, rel=1e-6)


def test_circle_through_example():
    center, radius = circle_through((0, 0), (1, 1), (2, 0))
    assert center[0] == pytest.approx(1.0, abs=1e-9)
    assert center[1] == pytest.approx(0.0, abs=1e-9)
    assert radius == pytest.approx(1.0, abs=1e-9)


def test_circle_through_collinear():
    center, radius = circle_through((0, 0), (1, 0), (2, 0))
    assert center is None
    assert radius == INFINITE_RADIUS


def test_circle_through_duplicate():
    with pytest.raises(DegenerateTriple):
        circle_through((0, 0), (0, 0), (1, 1))


def test_circle_through_equidistant(rng):
    checked = 0
    while checked < 200:
        pts = [tuple(rng.uniform(-100, 100, size=2)) for _ in range(3)]
        center, radius = circle_through(*pts)
        if center is None:
            continue
        dists = [math.hypot(p[0] - center[0], p[1] - center[1]) for p in pts]
        for d in dists:
            assert d == pytest.approx(radius, rel=1e-9)
        checked += 1
