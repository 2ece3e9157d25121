"""Artificial road networks.

Nodes are sampled uniformly inside a metric rectangle anchored at the equator,
connected by Delaunay triangulation (no crossing roads), and thinned to a
requested edge density before the usual cleaning and enhancement passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput
from .geo import GeoPoint
from .graph import (
    DEFAULT_OFFSET_CAP,
    DEFAULT_SPEED_LIMIT,
    RoadGraph,
    enhance,
    largest_wcc,
)

# Equirectangular scale at the equator, both axes.
METERS_PER_DEGREE = 111_320.0

_GENERATE_ATTEMPTS = 8


@dataclass(frozen=True)
class NetGenSpec:
    height_m: float
    width_m: float
    n_nodes: int
    density_pct: float
    seed: int

    def __post_init__(self):
        if self.height_m <= 0 or self.width_m <= 0:
            raise ValueError("map height and width must be positive")
        if self.n_nodes < 3:
            raise ValueError("need at least 3 nodes")
        if not (0 < self.density_pct <= 100):
            raise ValueError("density must be in (0, 100]")


class Triangulation:
    """Vertices, triangle index triples, and the induced undirected edge set."""

    def __init__(self, vertices: list[tuple[float, float]], triangles: list[tuple[int, int, int]]):
        self.vertices = vertices
        self.triangles = [tuple(sorted(t)) for t in triangles]
        self.triangles.sort()

    def edge_set(self) -> list[tuple[int, int]]:
        edges = set()
        for a, b, c in self.triangles:
            edges.update([(a, b), (a, c), (b, c)])
        return sorted(edges)


def map_corners(spec: NetGenSpec) -> tuple[GeoPoint, GeoPoint]:
    """South-west and north-east corner of the map rectangle."""
    return (
        GeoPoint(0.0, 0.0),
        GeoPoint(spec.height_m / METERS_PER_DEGREE, spec.width_m / METERS_PER_DEGREE),
    )


def sample_nodes(spec: NetGenSpec, rng: np.random.Generator) -> list[GeoPoint]:
    """n_nodes points i.i.d. uniform inside the map rectangle."""
    _, ne = map_corners(spec)
    u = rng.uniform(size=(spec.n_nodes, 2))
    return [GeoPoint(u[i, 0] * ne.lat, u[i, 1] * ne.lon) for i in range(spec.n_nodes)]


# -- Delaunay (incremental Bowyer-Watson) --------------------------------------

def _circumcircle(p: list[tuple[float, float]], tri: tuple[int, int, int]):
    """(center, squared radius) of a triangle's circumcircle, None if degenerate."""
    (ax, ay), (bx, by), (cx, cy) = p[tri[0]], p[tri[1]], p[tri[2]]
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return (ux, uy), r2


def _incircle_rel(p, tri, idx) -> float:
    """Relative (d^2 - r^2) / r^2 of point idx against tri's circumcircle.

    Negative means strictly inside, ~0 cocircular, positive outside.
    """
    cc = _circumcircle(p, tri)
    if cc is None:
        return math.inf
    (ux, uy), r2 = cc
    x, y = p[idx]
    d2 = (x - ux) ** 2 + (y - uy) ** 2
    return (d2 - r2) / r2 if r2 > 0 else math.inf


def delaunay(points: list[tuple[float, float]]) -> Triangulation:
    """Delaunay triangulation of planar points.

    Incremental insertion into a super-triangle; after removing the
    super-triangle a legalization sweep enforces the empty-circumcircle
    property and resolves cocircular quads toward the diagonal incident to
    the lowest vertex index, making the result deterministic.
    """
    n = len(points)
    if n < 3:
        raise DegenerateInput(f"need at least 3 points, got {n}")
    if len(set(points)) != n:
        raise DegenerateInput("duplicate points")
    # all points collinear iff every triple anchored at (p0, p1) is
    ax, ay = points[0]
    bx, by = points[1]
    if all(abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax)) < 1e-12 for cx, cy in points[2:]):
        raise DegenerateInput("all points collinear")

    xs = [q[0] for q in points]
    ys = [q[1] for q in points]
    cx = (min(xs) + max(xs)) / 2.0
    cy = (min(ys) + max(ys)) / 2.0
    d = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9) * 64.0
    verts = list(points) + [(cx - 16.0 * d, cy - d), (cx + 16.0 * d, cy - d), (cx, cy + 16.0 * d)]

    # growable per-triangle storage; circumcircles cached for vectorized scans
    tris: list[tuple[int, int, int]] = []
    cap = 64
    alive = np.zeros(cap, dtype=bool)
    cxs = np.empty(cap)
    cys = np.empty(cap)
    r2s = np.empty(cap)

    def add_tri(t: tuple[int, int, int]):
        nonlocal cap, alive, cxs, cys, r2s
        m = len(tris)
        if m == cap:
            cap *= 2
            alive = np.resize(alive, cap)
            cxs = np.resize(cxs, cap)
            cys = np.resize(cys, cap)
            r2s = np.resize(r2s, cap)
        cc = _circumcircle(verts, t)
        if cc is None:  # degenerate sliver: poison so it is always re-opened
            cxs[m], cys[m], r2s[m] = 0.0, 0.0, math.inf
        else:
            (ux, uy), r2 = cc
            cxs[m], cys[m], r2s[m] = ux, uy, r2
        alive[m] = True
        tris.append(tuple(sorted(t)))

    add_tri((n, n + 1, n + 2))
    for i in range(n):
        px, py = verts[i]
        m = len(tris)
        d2 = (px - cxs[:m]) ** 2 + (py - cys[:m]) ** 2
        # strict test: borderline cocircular points settle in legalization
        bad = np.nonzero(alive[:m] & (d2 < r2s[:m]))[0]
        boundary: dict[tuple[int, int], int] = {}
        for bi in bad:
            t = tris[bi]
            alive[bi] = False
            for u, v in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
                boundary[(u, v)] = boundary.get((u, v), 0) + 1
        for (u, v), count in boundary.items():
            if count == 1:
                add_tri((u, v, i))

    final = {t for t, keep in zip(tris, alive) if keep and all(v < n for v in t)}
    tri_list = _legalize(verts[:n], sorted(final))
    return Triangulation(points, tri_list)


def _legalize(p, triangles: list[tuple[int, int, int]], tol: float = 1e-9):
    """Flip non-Delaunay interior edges until stable (with index tie-break)."""
    tris = set(triangles)
    for _ in range(16 * max(len(tris), 1)):
        edge_map: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for t in tris:
            for u, v in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
                edge_map.setdefault((u, v), []).append(t)
        flipped = False
        for (u, v), owners in sorted(edge_map.items()):
            if len(owners) != 2:
                continue
            t1, t2 = owners
            w1 = next(x for x in t1 if x not in (u, v))
            w2 = next(x for x in t2 if x not in (u, v))
            val = _incircle_rel(p, t1, w2)
            do_flip = False
            if val < -tol:
                do_flip = True
            elif abs(val) <= tol and min(u, v, w1, w2) in (w1, w2):
                do_flip = True
            if do_flip and _quad_convex(p, u, v, w1, w2):
                tris.discard(t1)
                tris.discard(t2)
                tris.add(tuple(sorted((w1, w2, u))))
                tris.add(tuple(sorted((w1, w2, v))))
                flipped = True
                break
        if not flipped:
            return sorted(tris)
    return sorted(tris)


def _quad_convex(p, u, v, w1, w2) -> bool:
    """True when diagonal w1-w2 lies inside quad u,w1,v,w2 (flip is valid)."""
    (x1, y1), (x2, y2) = p[w1], p[w2]
    (xu, yu), (xv, yv) = p[u], p[v]
    s_u = (x2 - x1) * (yu - y1) - (y2 - y1) * (xu - x1)
    s_v = (x2 - x1) * (yv - y1) - (y2 - y1) * (xv - x1)
    return s_u * s_v < 0


# -- thinning and assembly -----------------------------------------------------

def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def thin_edges(
    tri: Triangulation, density_pct: float, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Uniformly remove edges until round(density_pct% of the original count) remain."""
    edges = tri.edge_set()
    n_prime = len(edges)
    n_target = _round_half_away(density_pct / 100.0 * n_prime)
    n_remove = n_prime - n_target
    if n_remove <= 0:
        return edges
    drop = set(rng.choice(n_prime, size=n_remove, replace=False).tolist())
    return [e for i, e in enumerate(edges) if i not in drop]


def generate(
    spec: NetGenSpec,
    default_v: float = DEFAULT_SPEED_LIMIT,
    offset_cap: float = DEFAULT_OFFSET_CAP,
) -> RoadGraph:
    graph, _ = generate_with_info(spec, default_v, offset_cap)
    return graph


def generate_with_info(
    spec: NetGenSpec,
    default_v: float = DEFAULT_SPEED_LIMIT,
    offset_cap: float = DEFAULT_OFFSET_CAP,
) -> tuple[RoadGraph, dict]:
    """Full pipeline. Returns the enhanced graph plus generation counters.

    Collinear or duplicate samples are retried with a fresh sub-seed a few
    times before giving up. Thinning may disconnect the graph; the cleaning
    pass keeps the largest component, so the realized density (reported, not
    corrected) can deviate from the request.
    """
    seq = np.random.SeedSequence(spec.seed)
    children = seq.spawn(_GENERATE_ATTEMPTS)
    last_exc: Exception | None = None
    for child in children:
        rng = np.random.default_rng(child)
        nodes = sample_nodes(spec, rng)
        planar = [(p.lon, p.lat) for p in nodes]
        try:
            tri = delaunay(planar)
        except DegenerateInput as exc:
            last_exc = exc
            continue
        kept = thin_edges(tri, spec.density_pct, rng)
        g = RoadGraph()
        for p in nodes:
            g.add_node(p)
        for a, b in kept:
            g.add_edge(a, b)
            g.add_edge(b, a)
        g = largest_wcc(g)
        enhance(g, default_v=default_v, offset_cap=offset_cap)
        n_prime = len(tri.edge_set())
        info = {
            "n_nodes": g.n_nodes,
            "n_edges_directed": g.n_edges,
            "n_edges_delaunay": n_prime,
            "realized_density_pct": 100.0 * g.undirected_road_count() / n_prime,
        }
        return g, info
    raise DegenerateInput(f"generation failed after {_GENERATE_ATTEMPTS} attempts: {last_exc}")
