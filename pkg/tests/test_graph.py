import itertools
import math

import numpy as np
import pytest

from roadrl.errors import (
    DegenerateEdge,
    EmptyGraph,
    InvalidDefault,
    InvariantViolation,
    NotEnhanced,
    TruncatedFile,
    VersionMismatch,
)
from roadrl.geo import INFINITE_RADIUS, GeoPoint
from roadrl.graph import (
    RoadGraph,
    assign_speed_limits,
    enhance,
    enhance_curves,
    enhance_distances,
    enhance_fastest_weights,
    enhance_speed_limits,
    largest_wcc,
    load_network,
    save_network,
)
from roadrl.netgen import NetGenSpec, generate

from conftest import equator_graph


# -- cleaning -------------------------------------------------------------


def test_wcc_keeps_largest():
    g = equator_graph(
        [(0, 0), (0, 0.001), (0, 0.002), (0.01, 0.01)],
        [(0, 1), (1, 2)],
    )
    out = largest_wcc(g)
    assert out.n_nodes == 3
    assert out.n_edges == 2


def test_wcc_identity_when_connected():
    g = equator_graph([(0, 0), (0, 0.001), (0, 0.002)], [(0, 1), (1, 2), (2, 0)])
    out = largest_wcc(g)
    assert out.n_nodes == 3
    assert [(e.frm, e.to) for e in out.edges] == [(0, 1), (1, 2), (2, 0)]


def test_wcc_empty_graph():
    with pytest.raises(EmptyGraph):
        largest_wcc(RoadGraph())


def test_wcc_tie_break_exhaustive():
    # every digraph on nodes {0,1} and {2,3} forming two 2-node components:
    # the survivor must contain node 0
    pair_options = [[(0, 1)], [(1, 0)], [(0, 1), (1, 0)]]
    other_options = [[(2, 3)], [(3, 2)], [(2, 3), (3, 2)]]
    coords = [(0, 0), (0, 0.001), (0, 0.002), (0, 0.003)]
    for first, second in itertools.product(pair_options, other_options):
        g = equator_graph(coords, first + second)
        out = largest_wcc(g)
        assert out.n_nodes == 2
        kept = {(0, 0), (0, 0.001)}
        assert {(p.lat, p.lon) for p in out.nodes} == kept


def _wcc_count_union_find(g: RoadGraph) -> int:
    parent = list(range(g.n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges:
        ra, rb = find(e.frm), find(e.to)
        if ra != rb:
            parent[ra] = rb
    return len({find(n) for n in range(g.n_nodes)})


def test_wcc_single_component_random(rng):
    for _ in range(25):
        n = int(rng.integers(2, 15))
        g = RoadGraph()
        for i in range(n):
            g.add_node(GeoPoint(float(rng.uniform(0, 0.01)), float(rng.uniform(0, 0.01))))
        for _ in range(int(rng.integers(1, 2 * n))):
            a, b = rng.integers(0, n, size=2)
            if a != b:
                g.add_edge(int(a), int(b))
        if g.n_edges == 0:
            continue
        out = largest_wcc(g)
        assert _wcc_count_union_find(out) == 1


# -- enhancement -----------------------------------------------------------


def test_enhance_distances_equator_edge():
    g = equator_graph([(0, 0), (0, 1)], [(0, 1)])
    enhance_distances(g)
    assert g.edges[0].gcd == pytest.approx(111194.93, abs=0.01)


def test_enhance_distances_no_edges():
    g = equator_graph([(0, 0)], [])
    enhance_distances(g)
    assert g.n_edges == 0


def test_enhance_distances_degenerate_edge():
    g = equator_graph([(0, 0), (0, 0)], [(0, 1)])
    with pytest.raises(DegenerateEdge) as exc:
        enhance_distances(g)
    assert exc.value.edge_ids == [0]


def test_enhance_speed_limits():
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1)])
    g.add_edge(1, 0, v_max=10.0)
    enhance_speed_limits(g, 13.9)
    assert g.edges[0].v_max == 13.9
    assert g.edges[1].v_max == 10.0


def test_enhance_speed_limits_invalid_default():
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1)])
    with pytest.raises(InvalidDefault):
        enhance_speed_limits(g, 0.0)


def test_enhance_fastest_weights():
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1)])
    g.edges[0].gcd = 100.0
    g.edges[0].v_max = 5.0
    enhance_fastest_weights(g)
    assert g.edges[0].w_fast == 20.0
    g.edges[0].v_max = 10.0
    enhance_fastest_weights(g)
    assert g.edges[0].w_fast == 10.0


def test_enhance_fastest_weights_missing_vmax():
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1)])
    g.edges[0].gcd = 100.0
    with pytest.raises(NotEnhanced):
        enhance_fastest_weights(g)


def test_weight_identity_after_enhancement(rng):
    g = generate(NetGenSpec(3000, 3000, 25, 85, seed=5))
    for e in g.edges:
        assert abs(e.w_fast * e.v_max - e.gcd) < 1e-9 * e.gcd


# -- curves ------------------------------------------------------------------


def test_curves_collinear_pair_infinite():
    g = equator_graph([(0, 0), (0, 0.001), (0, 0.002)], [(0, 1), (1, 2)])
    enhance(g)
    c = g.curves[(0, 1)]
    assert c.radius == INFINITE_RADIUS
    assert c.center is None
    assert c.entry_offset == 10.0  # spacing ~111 m, so the cap is binding


def test_curves_right_angle_junction():
    # incoming along +x, outgoing along +y, offsets 10 m: circumcircle of
    # (-10,0),(0,0),(0,10) has center (-5,5) and radius 5*sqrt(2)
    g = equator_graph([(0, -0.001), (0, 0), (0.001, 0)], [(0, 1), (1, 2)])
    enhance(g)
    c = g.curves[(0, 1)]
    assert c.radius == pytest.approx(5.0 * math.sqrt(2.0), abs=1e-6)
    assert c.center[0] == pytest.approx(-5.0, abs=1e-6)
    assert c.center[1] == pytest.approx(5.0, abs=1e-6)


def test_curves_pair_count_one_in_two_out():
    g = equator_graph(
        [(0, 0), (0, 0.001), (0.001, 0.002), (-0.001, 0.002)],
        [(0, 1), (1, 2), (1, 3)],
    )
    enhance(g)
    assert len(g.curves) == 2
    assert (0, 1) in g.curves and (0, 2) in g.curves


def test_curves_u_turn_fixed_radius():
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1), (1, 0)])
    enhance(g)
    assert g.curves[(0, 1)].radius == 1.0
    assert g.curves[(1, 0)].radius == 1.0


def test_curves_offset_capped_by_half_edge():
    g = equator_graph([(0, 0), (0, 0.0001), (0.0001, 0.0001)], [(0, 1), (1, 2)])
    enhance(g)  # edges ~11.1 m, so offset is gcd/2, not the 10 m cap
    c = g.curves[(0, 1)]
    assert c.entry_offset == pytest.approx(g.edges[0].gcd / 2.0)


def test_curve_chain_merging_shares_radius():
    # four points on a circle, chords ~11 m each: a digitized curve that the
    # chain pass should re-fit as one circle
    r_deg = 0.0002
    pts = [
        (r_deg * math.sin(t), r_deg * (1 - math.cos(t)))
        for t in (0.0, 0.5, 1.0, 1.5)
    ]
    g = equator_graph(pts, [(0, 1), (1, 2), (2, 3)])
    enhance(g)
    r1 = g.curves[(0, 1)].radius
    r2 = g.curves[(1, 2)].radius
    assert math.isfinite(r1)
    assert r1 == pytest.approx(r2, rel=1e-9)


def test_assign_speed_limits(rng):
    g = equator_graph([(0, 0), (0, 0.001), (0, 0.002)], [(0, 1), (1, 2)])
    enhance(g)
    assign_speed_limits(g, [5, 6, 7, 8, 9], rng)
    for e in g.edges:
        assert e.v_max in {5.0, 6.0, 7.0, 8.0, 9.0}
        assert e.w_fast == e.gcd / e.v_max


# -- serialization -----------------------------------------------------------


def _graphs_equal(a: RoadGraph, b: RoadGraph) -> bool:
    if a.n_nodes != b.n_nodes or a.n_edges != b.n_edges:
        return False
    for pa, pb in zip(a.nodes, b.nodes):
        if pa != pb:
            return False
    for ea, eb in zip(a.edges, b.edges):
        if (ea.frm, ea.to, ea.v_max, ea.gcd, ea.w_fast) != (eb.frm, eb.to, eb.v_max, eb.gcd, eb.w_fast):
            return False
    if set(a.curves) != set(b.curves):
        return False
    for key, ca in a.curves.items():
        cb = b.curves[key]
        if (ca.center, ca.radius, ca.entry_offset, ca.exit_offset) != (
            cb.center, cb.radius, cb.entry_offset, cb.exit_offset,
        ):
            return False
    return True


def test_save_load_round_trip(tmp_path):
    g = equator_graph([(0, 0), (0, 0.001), (0.001, 0.001)], [(0, 1), (1, 2), (2, 0)])
    enhance(g)
    path = tmp_path / "net.bin"
    save_network(g, path)
    g2 = load_network(path)
    assert _graphs_equal(g, g2)


def test_save_load_round_trip_random_networks(tmp_path, rng):
    for seed in range(8):
        g = generate(NetGenSpec(2000, 2500, 15, 75, seed=seed))
        path = tmp_path / f"net{seed}.bin"
        save_network(g, path)
        assert _graphs_equal(g, load_network(path))


def test_load_rejects_unknown_version(tmp_path):
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1), (1, 0)])
    enhance(g)
    path = tmp_path / "net.bin"
    save_network(g, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 0x7F
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionMismatch):
        load_network(path)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "net.bin"
    path.write_bytes(b"NOPE\x01{}")
    with pytest.raises(VersionMismatch):
        load_network(path)


def test_load_rejects_truncated(tmp_path):
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1), (1, 0)])
    enhance(g)
    path = tmp_path / "net.bin"
    save_network(g, path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(TruncatedFile):
        load_network(path)
    path.write_bytes(blob[:3])
    with pytest.raises(TruncatedFile):
        load_network(path)


def test_load_rejects_dangling_edge(tmp_path):
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1), (1, 0)])
    enhance(g)
    path = tmp_path / "net.bin"
    save_network(g, path)
    text = path.read_bytes()
    patched = text.replace(b'"from":1,"to":0', b'"from":1,"to":9')
    path.write_bytes(patched)
    with pytest.raises(InvariantViolation):
        load_network(path)


def test_save_requires_enhanced(tmp_path):
    g = equator_graph([(0, 0), (0, 0.001)], [(0, 1)])
    with pytest.raises(NotEnhanced):
        save_network(g, tmp_path / "x.bin")
