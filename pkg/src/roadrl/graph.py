"""Road-network data model: directed geo-referenced graph, cleaning, enhancement, file I/O.

A RoadGraph starts as bare topology (nodes with coordinates, directed edges,
optional speed limits). The enhancement passes fill in derived per-edge data
(great-circle length, default speed limits, traversal-time weights) and fit a
circular curve to every ordered pair of edges meeting at a node, so lateral
accelerations at junctions are finite. Enhanced graphs round-trip through a
versioned binary-prefixed JSON file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import (
    DegenerateEdge,
    EmptyGraph,
    InvalidDefault,
    InvariantViolation,
    NotEnhanced,
    TruncatedFile,
    VersionMismatch,
)
from .geo import (
    INFINITE_RADIUS,
    GeoPoint,
    circle_through,
    haversine_gcd,
    project_local,
)

NETWORK_MAGIC = b"DSAR"
NETWORK_VERSION = 1

# Where along an edge a junction curve begins, at most (meters).
DEFAULT_OFFSET_CAP = 10.0
# Urban fallback applied to edges without a speed limit (m/s).
DEFAULT_SPEED_LIMIT = 13.9
# Turning back onto the reverse edge has no circumcircle; use a tight fixed arc.
U_TURN_RADIUS = 1.0


@dataclass
class RoadEdge:
    frm: int
    to: int
    v_max: float | None = None
    gcd: float | None = None
    w_fast: float | None = None


@dataclass
class Curve:
    in_edge: int
    out_edge: int
    center: tuple[float, float] | None  # local meters, None when straight
    radius: float  # INFINITE_RADIUS for straight-through pairs
    entry_offset: float
    exit_offset: float


class RoadGraph:
    """Directed road graph with dense integer node/edge ids."""

    def __init__(self):
        self.nodes: list[GeoPoint] = []
        self.edges: list[RoadEdge] = []
        self.adjacency: list[list[int]] = []
        self.curves: dict[tuple[int, int], Curve] = {}
        self.enhanced = False

    # -- construction ---------------------------------------------------

    def add_node(self, p: GeoPoint) -> int:
        self.nodes.append(p)
        self.adjacency.append([])
        return len(self.nodes) - 1

    def add_edge(self, frm: int, to: int, v_max: float | None = None) -> int:
        if frm == to:
            raise InvariantViolation(f"self-loop at node {frm}")
        if not (0 <= frm < len(self.nodes)) or not (0 <= to < len(self.nodes)):
            raise InvariantViolation(f"edge ({frm}, {to}) references missing node")
        self.edges.append(RoadEdge(frm, to, v_max=v_max))
        eid = len(self.edges) - 1
        self.adjacency[frm].append(eid)
        return eid

    # -- queries ----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def out_edges(self, node: int) -> list[int]:
        return self.adjacency[node]

    def undirected_neighbors(self, node: int) -> set[int]:
        nbrs = {self.edges[e].to for e in self.adjacency[node]}
        nbrs.update(e.frm for e in self.edges if e.to == node)
        return nbrs

    def undirected_degrees(self) -> list[int]:
        """Distinct-neighbor count per node on the underlying road set."""
        nbrs: list[set[int]] = [set() for _ in self.nodes]
        for e in self.edges:
            nbrs[e.frm].add(e.to)
            nbrs[e.to].add(e.frm)
        return [len(s) for s in nbrs]

    def intersections(self) -> set[int]:
        return {n for n, d in enumerate(self.undirected_degrees()) if d >= 3}

    def reverse_edge_of(self, eid: int) -> int | None:
        e = self.edges[eid]
        for cand in self.adjacency[e.to]:
            if self.edges[cand].to == e.frm:
                return cand
        return None

    def undirected_road_count(self) -> int:
        return len({(min(e.frm, e.to), max(e.frm, e.to)) for e in self.edges})


# -- cleaning -----------------------------------------------------------------

def largest_wcc(g: RoadGraph) -> RoadGraph:
    """Subgraph induced by the largest weakly connected component, ids re-densified.

    Size ties go to the component containing the smallest original node id.
    """
    if g.n_nodes == 0:
        raise EmptyGraph("graph has no nodes")
    comp = [-1] * g.n_nodes
    undirected: list[list[int]] = [[] for _ in range(g.n_nodes)]
    for e in g.edges:
        undirected[e.frm].append(e.to)
        undirected[e.to].append(e.frm)
    n_comp = 0
    for start in range(g.n_nodes):
        if comp[start] != -1:
            continue
        stack = [start]
        comp[start] = n_comp
        while stack:
            u = stack.pop()
            for v in undirected[u]:
                if comp[v] == -1:
                    comp[v] = n_comp
                    stack.append(v)
        n_comp += 1
    sizes = [0] * n_comp
    for c in comp:
        sizes[c] += 1
    # comp index == component of its smallest node because nodes are scanned in
    # ascending order, so max() on (size, -index) encodes the tie-break
    best = max(range(n_comp), key=lambda c: (sizes[c], -c))

    out = RoadGraph()
    remap: dict[int, int] = {}
    for n in range(g.n_nodes):
        if comp[n] == best:
            remap[n] = out.add_node(g.nodes[n])
    for e in g.edges:
        if comp[e.frm] == best:
            out.edges.append(RoadEdge(remap[e.frm], remap[e.to], e.v_max, e.gcd, e.w_fast))
            out.adjacency[remap[e.frm]].append(len(out.edges) - 1)
    return out


# -- enhancement --------------------------------------------------------------

def enhance_distances(g: RoadGraph) -> RoadGraph:
    degenerate = [i for i, e in enumerate(g.edges) if g.nodes[e.frm] == g.nodes[e.to]]
    if degenerate:
        raise DegenerateEdge(degenerate)
    for e in g.edges:
        e.gcd = haversine_gcd(g.nodes[e.frm], g.nodes[e.to])
    return g


def enhance_speed_limits(g: RoadGraph, default_v: float = DEFAULT_SPEED_LIMIT) -> RoadGraph:
    if default_v <= 0:
        raise InvalidDefault(f"default speed limit must be positive, got {default_v}")
    for e in g.edges:
        if e.v_max is None:
            e.v_max = default_v
    return g


def enhance_fastest_weights(g: RoadGraph) -> RoadGraph:
    for i, e in enumerate(g.edges):
        if e.gcd is None or e.v_max is None:
            raise NotEnhanced(f"edge {i} missing gcd or v_max")
        e.w_fast = e.gcd / e.v_max
    return g


def _neighbor_sets(g: RoadGraph) -> list[set[int]]:
    nbrs: list[set[int]] = [set() for _ in g.nodes]
    for e in g.edges:
        nbrs[e.frm].add(e.to)
        nbrs[e.to].add(e.frm)
    return nbrs


def _edge_unit_vectors(g: RoadGraph, node: int, neighbors: set[int]) -> dict[int, tuple[float, float]]:
    """Unit direction (local plane at node) toward each neighbor."""
    origin = g.nodes[node]
    units = {}
    for nbr in neighbors:
        x, y = project_local(origin, g.nodes[nbr])
        n = math.hypot(x, y)
        if n > 0:
            units[nbr] = (x / n, y / n)
    return units


def _pair_offset(g: RoadGraph, ein: int, eout: int, offset_cap: float) -> float:
    return min(offset_cap, g.edges[ein].gcd / 2.0, g.edges[eout].gcd / 2.0)


def enhance_curves(g: RoadGraph, offset_cap: float = DEFAULT_OFFSET_CAP) -> RoadGraph:
    """Fit a circle to every ordered pair of edges that meet at a node.

    The circle passes through a point `o` meters before the shared node on the
    incoming edge, the node itself, and `o` meters after it on the outgoing
    edge. Collinear pairs are stored with infinite radius; U-turn pairs (an
    edge followed by its exact reverse) get the fixed U_TURN_RADIUS. Runs of
    short edges with a monotone heading change are then re-fitted as a single
    circle (see _merge_chains), which smoothes curves digitized with several
    nodes.
    """
    for i, e in enumerate(g.edges):
        if e.gcd is None:
            raise NotEnhanced(f"edge {i} missing gcd; run enhance_distances first")
    g.curves = {}
    incoming: list[list[int]] = [[] for _ in range(g.n_nodes)]
    for eid, e in enumerate(g.edges):
        incoming[e.to].append(eid)
    nbr_sets = _neighbor_sets(g)
    for node in range(g.n_nodes):
        if not incoming[node] or not g.adjacency[node]:
            continue
        units = _edge_unit_vectors(g, node, nbr_sets[node])
        for ein in incoming[node]:
            for eout in g.adjacency[node]:
                o = _pair_offset(g, ein, eout, offset_cap)
                e_in, e_out = g.edges[ein], g.edges[eout]
                if e_out.to == e_in.frm:
                    g.curves[(ein, eout)] = Curve(ein, eout, (0.0, 0.0), U_TURN_RADIUS, o, o)
                    continue
                ux_in, uy_in = units[e_in.frm]
                ux_out, uy_out = units[e_out.to]
                p1 = (ux_in * o, uy_in * o)
                p3 = (ux_out * o, uy_out * o)
                center, radius = circle_through(p1, (0.0, 0.0), p3)
                g.curves[(ein, eout)] = Curve(ein, eout, center, radius, o, o)
    _merge_chains(g, offset_cap, nbr_sets)
    g.enhanced = True
    return g


def _turn_sign(g: RoadGraph, ein: int, eout: int, neighbors: set[int]) -> int:
    """Sign of the heading change when driving ein then eout (0 = straight)."""
    node = g.edges[ein].to
    units = _edge_unit_vectors(g, node, neighbors)
    bx, by = units[g.edges[ein].frm]  # toward where we came from
    fx, fy = units[g.edges[eout].to]
    # direction of travel on ein is -back vector
    cross = (-bx) * fy - (-by) * fx
    if abs(cross) < 1e-12:
        return 0
    return 1 if cross > 0 else -1


def _merge_chains(g: RoadGraph, offset_cap: float, nbr_sets: list[set[int]]) -> None:
    """Re-fit runs of short edges as one circle shared by all their edge pairs.

    A chain is a maximal directed run e_1..e_k (k >= 2) whose interior nodes
    are plain degree-2 road points, whose edges are all shorter than twice the
    offset cap, and whose turn direction never flips. The shared circle goes
    through the chain's entry point, its middle node, and its exit point.
    """
    short = [e.gcd < 2.0 * offset_cap for e in g.edges]
    degrees = [len(s) for s in nbr_sets]
    next_in_chain: dict[int, int] = {}
    for ein, eout in g.curves:
        if not (short[ein] and short[eout]):
            continue
        e_in, e_out = g.edges[ein], g.edges[eout]
        if e_out.to == e_in.frm:  # U-turn pairs never chain
            continue
        if degrees[e_in.to] != 2:
            continue
        next_in_chain[ein] = eout

    consumed: set[int] = set()
    with_pred = set(next_in_chain.values())
    heads = sorted(k for k in next_in_chain if k not in with_pred)
    # all-short cycles have no head; break them at the lowest edge id
    heads += sorted(k for k in next_in_chain if k in with_pred)
    for start in heads:
        if start in consumed:
            continue
        chain = [start]
        sign = 0
        while chain[-1] in next_in_chain:
            nxt = next_in_chain[chain[-1]]
            if nxt in consumed or nxt in chain:
                break
            s = _turn_sign(g, chain[-1], nxt, nbr_sets[g.edges[chain[-1]].to])
            if sign != 0 and s != 0 and s != sign:
                break
            sign = sign or s
            chain.append(nxt)
        if len(chain) < 2:
            continue
        consumed.update(chain)
        interior = [g.edges[e].to for e in chain[:-1]]
        mid_node = interior[(len(interior) - 1) // 2]
        origin = g.nodes[mid_node]

        def local(node: int) -> tuple[float, float]:
            return project_local(origin, g.nodes[node])

        first, second = chain[0], chain[1]
        o_first = _pair_offset(g, first, second, offset_cap)
        n1 = g.edges[first].to
        p_from = local(g.edges[first].frm)
        p_n1 = local(n1)
        d1 = math.hypot(p_from[0] - p_n1[0], p_from[1] - p_n1[1])
        entry = (
            p_n1[0] + (p_from[0] - p_n1[0]) * o_first / d1,
            p_n1[1] + (p_from[1] - p_n1[1]) * o_first / d1,
        )
        last, prev_last = chain[-1], chain[-2]
        o_last = _pair_offset(g, prev_last, last, offset_cap)
        nk = g.edges[last].frm
        p_to = local(g.edges[last].to)
        p_nk = local(nk)
        dk = math.hypot(p_to[0] - p_nk[0], p_to[1] - p_nk[1])
        exit_ = (
            p_nk[0] + (p_to[0] - p_nk[0]) * o_last / dk,
            p_nk[1] + (p_to[1] - p_nk[1]) * o_last / dk,
        )
        mid = (0.0, 0.0)
        if entry == mid or exit_ == mid or entry == exit_:
            continue
        center_mid, radius = circle_through(entry, mid, exit_)
        for ein, eout in zip(chain[:-1], chain[1:]):
            cur = g.curves[(ein, eout)]
            if center_mid is None:
                cur.center, cur.radius = None, INFINITE_RADIUS
            else:
                nx, ny = local(g.edges[ein].to)
                cur.center = (center_mid[0] - nx, center_mid[1] - ny)
                cur.radius = radius


def enhance(
    g: RoadGraph,
    default_v: float = DEFAULT_SPEED_LIMIT,
    offset_cap: float = DEFAULT_OFFSET_CAP,
) -> RoadGraph:
    """Run the full enhancement pipeline in order."""
    enhance_distances(g)
    enhance_speed_limits(g, default_v)
    enhance_fastest_weights(g)
    enhance_curves(g, offset_cap)
    return g


def assign_speed_limits(g: RoadGraph, choices, rng) -> RoadGraph:
    """Overwrite every edge's speed limit with a uniform draw from choices.

    Used by experiments that need controlled limit variation on a network;
    fastest-path weights are re-derived when already present.
    """
    values = list(choices)
    for e in g.edges:
        e.v_max = float(values[rng.integers(0, len(values))])
        if e.gcd is not None:
            e.w_fast = e.gcd / e.v_max
    return g


# -- serialization ------------------------------------------------------------

def _f(x: float) -> str:
    # 17 significant digits: lossless for binary64
    return format(x, ".17g")


def save_network(g: RoadGraph, path) -> None:
    if not g.enhanced:
        raise NotEnhanced("only enhanced graphs are saved")
    nodes = ",".join(
        f'{{"id":{i},"lat":{_f(p.lat)},"lon":{_f(p.lon)}}}' for i, p in enumerate(g.nodes)
    )
    edges = ",".join(
        f'{{"id":{i},"from":{e.frm},"to":{e.to},"vmax":{_f(e.v_max)},'
        f'"gcd":{_f(e.gcd)},"wfast":{_f(e.w_fast)}}}'
        for i, e in enumerate(g.edges)
    )
    curves = []
    for key in sorted(g.curves):
        c = g.curves[key]
        if math.isinf(c.radius):
            cx, cy, r = "0", "0", '"inf"'
        else:
            cx, cy, r = _f(c.center[0]), _f(c.center[1]), _f(c.radius)
        curves.append(
            f'{{"in":{c.in_edge},"out":{c.out_edge},"cx":{cx},"cy":{cy},'
            f'"r":{r},"eo":{_f(c.entry_offset)},"xo":{_f(c.exit_offset)}}}'
        )
    doc = f'{{"nodes":[{nodes}],"edges":[{edges}],"curves":[{",".join(curves)}]}}'
    with open(path, "wb") as fh:
        fh.write(NETWORK_MAGIC)
        fh.write(bytes([NETWORK_VERSION]))
        fh.write(doc.encode("utf-8"))


def load_network(path) -> RoadGraph:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 5:
        raise TruncatedFile(f"{path}: too short to hold header")
    if blob[:4] != NETWORK_MAGIC:
        raise VersionMismatch(f"{path}: bad magic {blob[:4]!r}")
    if blob[4] != NETWORK_VERSION:
        raise VersionMismatch(f"{path}: unsupported format version {blob[4]}")
    try:
        doc = json.loads(blob[5:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedFile(f"{path}: {exc}") from exc

    g = RoadGraph()
    try:
        for i, n in enumerate(doc["nodes"]):
            if n["id"] != i:
                raise InvariantViolation(f"node ids not dense at index {i}")
            g.add_node(GeoPoint(n["lat"], n["lon"]))
        for i, e in enumerate(doc["edges"]):
            if e["id"] != i:
                raise InvariantViolation(f"edge ids not dense at index {i}")
            if not (0 <= e["from"] < g.n_nodes) or not (0 <= e["to"] < g.n_nodes):
                raise InvariantViolation(f"edge {i} references missing node")
            eid = g.add_edge(e["from"], e["to"], v_max=float(e["vmax"]))
            edge = g.edges[eid]
            edge.gcd = float(e["gcd"])
            edge.w_fast = float(e["wfast"])
            if edge.v_max <= 0 or edge.gcd <= 0 or edge.w_fast <= 0:
                raise InvariantViolation(f"edge {i} has non-positive derived fields")
        for c in doc["curves"]:
            ein, eout = c["in"], c["out"]
            if not (0 <= ein < g.n_edges) or not (0 <= eout < g.n_edges):
                raise InvariantViolation(f"curve ({ein}, {eout}) references missing edge")
            if g.edges[ein].to != g.edges[eout].frm:
                raise InvariantViolation(f"curve ({ein}, {eout}) edges do not share a node")
            if c["r"] == "inf":
                center, radius = None, INFINITE_RADIUS
            else:
                center, radius = (float(c["cx"]), float(c["cy"])), float(c["r"])
                if radius <= 0:
                    raise InvariantViolation(f"curve ({ein}, {eout}) has non-positive radius")
            g.curves[(ein, eout)] = Curve(ein, eout, center, radius,
                                          float(c["eo"]), float(c["xo"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvariantViolation(f"{path}: malformed document: {exc}") from exc
    g.enhanced = True
    return g
