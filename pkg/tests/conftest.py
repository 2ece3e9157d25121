import numpy as np
import pytest

from roadrl.geo import GeoPoint
from roadrl.graph import RoadGraph, enhance


def straight_road_xml(n_nodes: int = 21, spacing_deg: float = 0.002, highway="residential",
                      extra_tags: str = "") -> bytes:
    """OSM-XML for a straight two-way road along the equator."""
    nodes = "".join(
        f'<node id="{i}" lat="0" lon="{i * spacing_deg:.6f}"/>' for i in range(n_nodes)
    )
    refs = "".join(f'<nd ref="{i}"/>' for i in range(n_nodes))
    xml = (
        '<?xml version="1.0" encoding="UTF-8"?><osm version="0.6">'
        f'{nodes}<way id="1">{refs}<tag k="highway" v="{highway}"/>{extra_tags}</way></osm>'
    )
    return xml.encode("utf-8")


def equator_graph(lons_lats, edges, v_max=None) -> RoadGraph:
    """Small hand-built graph; lons_lats are (lat, lon) degree pairs."""
    g = RoadGraph()
    for lat, lon in lons_lats:
        g.add_node(GeoPoint(lat, lon))
    for frm, to in edges:
        g.add_edge(frm, to, v_max=v_max)
    return g


def enhanced_line(n=4, spacing=0.001, v_max=10.0) -> RoadGraph:
    """Two-way straight chain of n nodes, enhanced; spacing in degrees (~111 m each)."""
    g = RoadGraph()
    for i in range(n):
        g.add_node(GeoPoint(0.0, i * spacing))
    for i in range(n - 1):
        g.add_edge(i, i + 1, v_max=v_max)
        g.add_edge(i + 1, i, v_max=v_max)
    return enhance(g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
