import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from roadrl.errors import DegenerateInput
from roadrl.geo import GeoPoint
from roadrl.graph import load_network, save_network
from roadrl.netgen import (
    METERS_PER_DEGREE,
    NetGenSpec,
    Triangulation,
    delaunay,
    generate,
    map_corners,
    sample_nodes,
    thin_edges,
)


def spec(**kw):
    base = dict(height_m=5000, width_m=5000, n_nodes=20, density_pct=80, seed=0)
    base.update(kw)
    return NetGenSpec(**base)


# -- spec validation and corners ----------------------------------------------


def test_spec_rejects_bad_values():
    with pytest.raises(ValueError):
        spec(height_m=0)
    with pytest.raises(ValueError):
        spec(n_nodes=2)
    with pytest.raises(ValueError):
        spec(density_pct=0)
    with pytest.raises(ValueError):
        spec(density_pct=101)


def test_map_corners_one_degree():
    sw, ne = map_corners(spec(height_m=METERS_PER_DEGREE, width_m=METERS_PER_DEGREE))
    assert (sw.lat, sw.lon) == (0.0, 0.0)
    assert ne.lat == pytest.approx(1.0)
    assert ne.lon == pytest.approx(1.0)


def test_map_corners_square_symmetry():
    sw, ne = map_corners(spec(height_m=1234.5, width_m=1234.5))
    assert ne.lat == ne.lon
    assert ne.lat > sw.lat and ne.lon > sw.lon


# -- sampling ------------------------------------------------------------------


def test_sample_nodes_inside_rectangle():
    s = spec(n_nodes=3)
    pts = sample_nodes(s, np.random.default_rng(1))
    _, ne = map_corners(s)
    assert len(pts) == 3
    for p in pts:
        assert 0 <= p.lat <= ne.lat
        assert 0 <= p.lon <= ne.lon


def test_sample_nodes_deterministic():
    s = spec(n_nodes=50)
    a = sample_nodes(s, np.random.default_rng(7))
    b = sample_nodes(s, np.random.default_rng(7))
    assert a == b


def test_sample_nodes_uniform_mean():
    s = spec(n_nodes=10_000)
    pts = sample_nodes(s, np.random.default_rng(3))
    _, ne = map_corners(s)
    lats = np.array([p.lat for p in pts])
    lons = np.array([p.lon for p in pts])
    for span, values in ((ne.lat, lats), (ne.lon, lons)):
        sigma = span / math.sqrt(12 * len(values))
        assert abs(values.mean() - span / 2) < 3 * sigma


# -- Delaunay ------------------------------------------------------------------


def test_delaunay_triangle():
    tri = delaunay([(0, 0), (1, 0), (0, 1)])
    assert tri.triangles == [(0, 1, 2)]
    assert len(tri.edge_set()) == 3


def test_delaunay_unit_square_tie_break():
    # all four cocircular; the diagonal must touch the lowest vertex index
    tri = delaunay([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert len(tri.triangles) == 2
    edges = tri.edge_set()
    assert len(edges) == 5
    assert (0, 2) in edges
    assert (1, 3) not in edges


def test_delaunay_rejects_degenerate():
    with pytest.raises(DegenerateInput):
        delaunay([(0, 0), (1, 1)])
    with pytest.raises(DegenerateInput):
        delaunay([(0, 0), (1, 0), (2, 0), (3, 0)])
    with pytest.raises(DegenerateInput):
        delaunay([(0, 0), (0, 0), (1, 1)])


def _circumcircle(a, b, c):
    (ax, ay), (bx, by), (cx, cy) = a, b, c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return (ux, uy), math.hypot(ax - ux, ay - uy)


def assert_empty_circumcircle(points, tri: Triangulation, tol=1e-9):
    for t in tri.triangles:
        (ux, uy), r = _circumcircle(points[t[0]], points[t[1]], points[t[2]])
        for i, p in enumerate(points):
            if i in t:
                continue
            d = math.hypot(p[0] - ux, p[1] - uy)
            assert d >= r * (1.0 - tol), f"point {i} inside circumcircle of {t}"


def test_delaunay_empty_circumcircle_random():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 51))
        pts = [tuple(q) for q in rng.uniform(0, 100, size=(n, 2))]
        tri = delaunay(pts)
        assert_empty_circumcircle(pts, tri)


def test_delaunay_edge_count_identity():
    # edges = 3n - 3 - h, hull size h from an independent implementation
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(4, 51))
        pts = rng.uniform(0, 100, size=(n, 2))
        tri = delaunay([tuple(q) for q in pts])
        h = len(ConvexHull(pts).vertices)
        assert len(tri.edge_set()) == 3 * n - 3 - h


# -- thinning ------------------------------------------------------------------


def _fake_triangulation(n_edges):
    # a fan: triangles (0, i, i+1) give exactly the wanted edge count patterns
    tris = []
    verts = [(float(i), float(i * i % 7)) for i in range(n_edges + 2)]
    for i in range(1, n_edges):
        tris.append((0, i, i + 1))
    return Triangulation(verts, tris)


def test_thin_edges_half():
    tri = _fake_triangulation(7)  # fan with 6 triangles -> 13 edges; build exact set instead
    edges = tri.edge_set()
    n = len(edges)
    kept = thin_edges(tri, 50.0, np.random.default_rng(0))
    assert len(kept) == int(math.floor(0.5 * n + 0.5))


def test_thin_edges_identity_at_full_density():
    tri = delaunay([(0, 0), (4, 0), (2, 3), (2, 1)])
    kept = thin_edges(tri, 100.0, np.random.default_rng(0))
    assert kept == tri.edge_set()


def test_thin_edges_round_half_away():
    # 5 edges at 50% -> round(2.5) = 3 kept, 2 removed
    tri = delaunay([(0, 0), (2, 0), (1, 1.5)])  # 3 edges
    class Fake:
        def __init__(self, edges):
            self._edges = edges
        def edge_set(self):
            return self._edges
    fake = Fake([(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)])
    kept = thin_edges(fake, 50.0, np.random.default_rng(0))
    assert len(kept) == 3


def test_thin_edges_removes_distinct(rng):
    tri = delaunay([tuple(q) for q in rng.uniform(0, 10, size=(30, 2))])
    full = tri.edge_set()
    kept = thin_edges(tri, 40.0, rng)
    assert len(set(kept)) == len(kept)
    assert set(kept) <= set(full)


# -- full generation -----------------------------------------------------------


def test_generate_minimal():
    g = generate(spec(n_nodes=3, density_pct=100))
    assert g.n_nodes == 3
    assert g.n_edges == 6


def test_generate_single_component():
    for seed in range(5):
        g = generate(spec(n_nodes=25, density_pct=60, seed=seed))
        seen = {0}
        frontier = [0]
        undirected = [set() for _ in range(g.n_nodes)]
        for e in g.edges:
            undirected[e.frm].add(e.to)
            undirected[e.to].add(e.frm)
        while frontier:
            u = frontier.pop()
            for v in undirected[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        assert seen == set(range(g.n_nodes))


def test_generate_byte_reproducible(tmp_path):
    for run in ("a", "b"):
        g = generate(spec(n_nodes=30, density_pct=70, seed=123))
        save_network(g, tmp_path / f"net_{run}.bin")
    assert (tmp_path / "net_a.bin").read_bytes() == (tmp_path / "net_b.bin").read_bytes()


def test_generate_enhanced_invariants():
    g = generate(spec(n_nodes=20, density_pct=90, seed=9))
    assert g.enhanced
    for e in g.edges:
        assert e.gcd > 0 and e.v_max > 0 and e.w_fast > 0
    for (ein, eout), c in g.curves.items():
        assert g.edges[ein].to == g.edges[eout].frm
        assert c.radius > 0
