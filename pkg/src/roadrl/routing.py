"""Single-pair Dijkstra over an enhanced road graph (shortest or fastest weights)."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass

from .errors import InvalidWeight, NotEnhanced, SameNode
from .graph import RoadEdge, RoadGraph


class PathMode(enum.Enum):
    SHORTEST = "shortest"  # weight = great-circle edge length (m)
    FASTEST = "fastest"    # weight = length / speed limit (s)


@dataclass
class Path:
    nodes: list[int]
    edges: list[int]
    total_cost: float


def mode_weight(e: RoadEdge, mode: PathMode) -> float:
    if mode is PathMode.SHORTEST:
        if e.gcd is None:
            raise NotEnhanced("edge has no distance; enhance the graph first")
        return e.gcd
    if e.w_fast is None:
        raise NotEnhanced("edge has no fastest weight; enhance the graph first")
    return e.w_fast


def dijkstra(g: RoadGraph, start: int, goal: int, mode: PathMode) -> Path | None:
    """Minimal-cost directed path from start to goal, None when unreachable.

    Ties on tentative cost break toward the lower node id, so results are
    deterministic. Non-positive weights are rejected.
    """
    if start == goal:
        raise SameNode(f"start and goal are both node {start}")
    dist: dict[int, float] = {start: 0.0}
    prev: dict[int, tuple[int, int]] = {}
    settled: set[int] = set()
    heap: list[tuple[float, int]] = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        if u == goal:
            break
        for eid in g.adjacency[u]:
            e = g.edges[eid]
            w = mode_weight(e, mode)
            if w <= 0:
                raise InvalidWeight(f"edge {eid} has non-positive weight {w}")
            nd = d + w
            if e.to not in settled and nd < dist.get(e.to, float("inf")):
                dist[e.to] = nd
                prev[e.to] = (u, eid)
                heapq.heappush(heap, (nd, e.to))
    if goal not in settled:
        return None
    nodes = [goal]
    edges: list[int] = []
    while nodes[-1] != start:
        u, eid = prev[nodes[-1]]
        nodes.append(u)
        edges.append(eid)
    nodes.reverse()
    edges.reverse()
    return Path(nodes=nodes, edges=edges, total_cost=dist[goal])
