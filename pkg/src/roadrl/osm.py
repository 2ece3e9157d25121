"""OSM-XML import: streaming extraction of nodes and drivable ways into a RoadGraph.

Open map data is noisy; the importer keeps whatever it can use (counting what
it drops), splits ways at every intermediate node so mid-way junctions become
real graph nodes, and leaves cleaning/enhancement to the graph module.
"""

from __future__ import annotations

import xml.parsers.expat
from dataclasses import dataclass

from .errors import EmptyNetwork, ParseError
from .geo import GeoPoint
from .graph import (
    DEFAULT_OFFSET_CAP,
    DEFAULT_SPEED_LIMIT,
    RoadGraph,
    enhance,
    largest_wcc,
)

# Road types vehicles may drive on. OSM does not define such a list; this is
# the usual convention and can be overridden per import.
DRIVABLE_HIGHWAYS = frozenset(
    base + suffix
    for base in (
        "motorway", "trunk", "primary", "secondary", "tertiary",
        "unclassified", "residential", "living_street", "service",
    )
    for suffix in ("", "_link")
)

MPH_TO_KMH = 1.609344


@dataclass
class RawNode:
    osm_id: int
    lat: float
    lon: float


@dataclass
class RawWay:
    osm_id: int
    refs: list[int]
    tags: dict[str, str]


@dataclass
class ImportReport:
    nodes_extracted: int = 0
    nodes_skipped_invalid: int = 0
    ways_extracted: int = 0
    ways_skipped_invalid: int = 0
    ways_skipped_type: int = 0
    ways_skipped_unknown_type: int = 0
    edges_missing_vmax: int = 0
    refs_dangling: int = 0

    def lines(self) -> list[str]:
        return [f"{k}={v}" for k, v in vars(self).items()]


@dataclass
class Drivable:
    oneway: bool
    v_max: float | None
    reverse_refs: bool = False


@dataclass
class Rejected:
    reason: str


def parse_osm_xml(data: bytes, report: ImportReport | None = None) -> list[RawNode | RawWay]:
    """Extract every usable <node> and <way> from OSM-XML, in document order.

    Unknown elements and attributes are ignored. Nodes without usable
    id/lat/lon and ways with fewer than two node refs are skipped and counted.
    Malformed XML raises ParseError carrying the byte offset.
    """
    report = report if report is not None else ImportReport()
    entities: list[RawNode | RawWay] = []
    stack: list[str] = []
    way: RawWay | None = None

    parser = xml.parsers.expat.ParserCreate()

    def start(name, attrs):
        nonlocal way
        stack.append(name)
        if name == "node" and len(stack) == 2:
            try:
                entities.append(RawNode(int(attrs["id"]), float(attrs["lat"]), float(attrs["lon"])))
                report.nodes_extracted += 1
            except (KeyError, ValueError):
                report.nodes_skipped_invalid += 1
        elif name == "way" and len(stack) == 2:
            try:
                way = RawWay(int(attrs["id"]), [], {})
            except (KeyError, ValueError):
                way = None
                report.ways_skipped_invalid += 1
        elif name == "nd" and way is not None and stack[-2] == "way":
            try:
                way.refs.append(int(attrs["ref"]))
            except (KeyError, ValueError):
                pass
        elif name == "tag" and way is not None and stack[-2] == "way":
            if "k" in attrs and "v" in attrs:
                way.tags[attrs["k"]] = attrs["v"]

    def end(name):
        nonlocal way
        stack.pop()
        if name == "way" and way is not None:
            if len(way.refs) >= 2:
                entities.append(way)
                report.ways_extracted += 1
            else:
                report.ways_skipped_invalid += 1
            way = None

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        parser.Parse(data, True)
    except xml.parsers.expat.ExpatError as exc:
        raise ParseError(str(exc), byte_offset=parser.ErrorByteIndex) from exc
    return entities


def _parse_maxspeed(raw: str) -> float | None:
    """OSM maxspeed value to m/s; None when not a plain number."""
    s = raw.strip().lower()
    factor = 1.0
    if s.endswith("mph"):
        s = s[: -len("mph")].strip()
        factor = MPH_TO_KMH
    try:
        kmh = float(s) * factor
    except ValueError:
        return None  # "walk", "none", ranges, signals...
    if kmh <= 0:
        return None
    return kmh / 3.6


def classify_way(tags: dict[str, str], whitelist=DRIVABLE_HIGHWAYS) -> Drivable | Rejected:
    highway = tags.get("highway")
    if highway is None:
        return Rejected("unknown_type")
    if highway not in whitelist:
        return Rejected("type")
    v_max = _parse_maxspeed(tags["maxspeed"]) if "maxspeed" in tags else None
    oneway = tags.get("oneway", "")
    if oneway in ("yes", "true", "1"):
        return Drivable(oneway=True, v_max=v_max)
    if oneway == "-1":
        return Drivable(oneway=True, v_max=v_max, reverse_refs=True)
    return Drivable(oneway=False, v_max=v_max)


def build_graph(
    entities: list[RawNode | RawWay],
    report: ImportReport,
    whitelist=DRIVABLE_HIGHWAYS,
) -> RoadGraph:
    """Assemble the raw directed graph from parsed entities.

    Each consecutive ref pair of a drivable way becomes a directed edge (two
    opposite edges unless one-way). Duplicate (from, to) edges collapse to the
    larger speed limit. The result still needs cleaning and enhancement.
    """
    coords: dict[int, GeoPoint] = {}
    for ent in entities:
        if isinstance(ent, RawNode):
            try:
                coords[ent.osm_id] = GeoPoint(ent.lat, ent.lon)
            except ValueError:
                report.nodes_skipped_invalid += 1

    # (from_osm, to_osm) -> v_max, insertion-ordered
    arcs: dict[tuple[int, int], float | None] = {}

    def add_arc(a: int, b: int, v_max: float | None):
        if (a, b) in arcs:
            old = arcs[(a, b)]
            arcs[(a, b)] = v_max if old is None else (old if v_max is None else max(old, v_max))
        else:
            arcs[(a, b)] = v_max

    any_drivable = False
    for ent in entities:
        if not isinstance(ent, RawWay):
            continue
        verdict = classify_way(ent.tags, whitelist)
        if isinstance(verdict, Rejected):
            if verdict.reason == "type":
                report.ways_skipped_type += 1
            else:
                report.ways_skipped_unknown_type += 1
            continue
        any_drivable = True
        refs = list(reversed(ent.refs)) if verdict.reverse_refs else ent.refs
        for a, b in zip(refs, refs[1:]):
            if a not in coords or b not in coords or a == b:
                report.refs_dangling += 1
                continue
            if verdict.v_max is None:
                report.edges_missing_vmax += 2 if not verdict.oneway else 1
            add_arc(a, b, verdict.v_max)
            if not verdict.oneway:
                add_arc(b, a, verdict.v_max)
    if not any_drivable or not arcs:
        raise EmptyNetwork("no drivable ways in input")

    g = RoadGraph()
    dense: dict[int, int] = {}
    for a, b in arcs:
        for osm_id in (a, b):
            if osm_id not in dense:
                dense[osm_id] = g.add_node(coords[osm_id])
    for (a, b), v_max in arcs.items():
        g.add_edge(dense[a], dense[b], v_max=v_max)
    return g


def import_osm(
    data: bytes,
    default_v: float = DEFAULT_SPEED_LIMIT,
    offset_cap: float = DEFAULT_OFFSET_CAP,
    whitelist=DRIVABLE_HIGHWAYS,
) -> tuple[RoadGraph, ImportReport]:
    """Parse, assemble, clean, and enhance an OSM-XML byte string."""
    report = ImportReport()
    entities = parse_osm_xml(data, report)
    g = build_graph(entities, report, whitelist)
    g = largest_wcc(g)
    enhance(g, default_v=default_v, offset_cap=offset_cap)
    return g, report
