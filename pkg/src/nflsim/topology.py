"""Network topologies: generation, edge-list I/O, deterministic shortest paths
and static monitor coverage."""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import seeding


class TopologyError(ValueError):
    pass


class GraphParseError(TopologyError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Graph:
    """Undirected simple connected graph on nodes ``0..node_count-1``.

    ``edges`` holds ``(u, v)`` tuples with ``u < v``, sorted.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.node_count
        if n < 2:
            raise TopologyError("graph needs at least 2 nodes")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise TopologyError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise TopologyError(f"edge ({u}, {v}) out of range for {n} nodes")
            e = (min(u, v), max(u, v))
            if e in norm:
                raise TopologyError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))
        if not is_connected(self):
            raise TopologyError("graph is not connected")

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    def neighbours(self, node: int) -> tuple[int, ...]:
        """Neighbours of ``node`` in ascending address order."""
        return self._adj[node]

    def degree(self, node: int) -> int:
        return len(self._adj[node])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def is_connected(g: Graph) -> bool:
    seen = {0}
    todo = deque([0])
    while todo:
        u = todo.popleft()
        for v in g._adj[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return len(seen) == g.node_count


def line_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def star_graph(leaves: int) -> Graph:
    """Hub is the last address, leaves are ``0..leaves-1``."""
    return Graph(leaves + 1, tuple((i, leaves) for i in range(leaves)))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def generate_connected_graph(n: int, p: float, seed: int, max_tries: int = 1000) -> Graph:
    """Draw G(n, p) graphs until one is connected.

    Attempt ``i`` uses the substream ``(seed, i)``, so the result is a pure
    function of ``(n, p, seed)``.
    """
    if n < 2:
        raise TopologyError("n must be >= 2")
    if not 0 < p <= 1:
        raise TopologyError("p must lie in (0, 1]")
    pairs = list(itertools.combinations(range(n), 2))
    for attempt in range(max_tries):
        rng = seeding.make_rng(seed, seeding.TOPOLOGY, attempt)
        keep = rng.random(len(pairs)) < p
        edges = tuple(e for e, k in zip(pairs, keep) if k)
        try:
            return Graph(n, edges)
        except TopologyError:
            continue
    raise TopologyError(
        f"could not generate connected graph with n={n}, p={p} after {max_tries} tries"
    )


def unit_weights(g: Graph) -> dict[tuple[int, int], float]:
    return {e: 1.0 for e in g.edges}


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-9)


def distances_to(g: Graph, w: Mapping[tuple[int, int], float], dst: int) -> list[float]:
    """Dijkstra from ``dst``; weights are symmetric so this is distance *to* dst."""
    dist = [math.inf] * g.node_count
    dist[dst] = 0.0
    heap = [(0.0, dst)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v in g._adj[u]:
            nd = d + w[edge_key(u, v)]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def next_hop(g: Graph, w: Mapping[tuple[int, int], float], dist: list[float], node: int) -> int:
    """Smallest-address neighbour lying on a shortest path from ``node``.

    Choosing the smallest valid next hop at every node yields the
    lexicographically smallest of all minimum-cost paths.
    """
    for v in g._adj[node]:
        if _close(w[edge_key(node, v)] + dist[v], dist[node]):
            return v
    raise TopologyError(f"no shortest-path successor at node {node}")


def shortest_path(g: Graph, w: Mapping[tuple[int, int], float] | None, src: int, dst: int) -> list[int]:
    """Minimum-weight path from ``src`` to ``dst``.

    Ties are broken towards the lexicographically smallest address sequence.
    ``w=None`` means unit weights.
    """
    if src == dst:
        raise TopologyError("src and dst must differ")
    if w is None:
        w = unit_weights(g)
    dist = distances_to(g, w, dst)
    path = [src]
    while path[-1] != dst:
        path.append(next_hop(g, w, dist, path[-1]))
    return path


def path_cost(w: Mapping[tuple[int, int], float], path: Iterable[int]) -> float:
    path = list(path)
    return sum(w[edge_key(a, b)] for a, b in zip(path, path[1:]))


def hop_distances(g: Graph, src: int) -> list[int]:
    dist = [-1] * g.node_count
    dist[src] = 0
    todo = deque([src])
    while todo:
        u = todo.popleft()
        for v in g._adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                todo.append(v)
    return dist


class StaticPaths:
    """Memoised unit-weight deterministic paths for one graph."""

    def __init__(self, g: Graph):
        self.g = g
        self._w = unit_weights(g)
        self._dist: dict[int, list[float]] = {}
        self._paths: dict[tuple[int, int], tuple[int, ...]] = {}

    def path(self, src: int, dst: int) -> tuple[int, ...]:
        key = (src, dst)
        if key not in self._paths:
            if dst not in self._dist:
                self._dist[dst] = distances_to(self.g, self._w, dst)
            dist = self._dist[dst]
            p = [src]
            while p[-1] != dst:
                p.append(next_hop(self.g, self._w, dist, p[-1]))
            self._paths[key] = tuple(p)
        return self._paths[key]

    def coverage(self, monitors: Iterable[int]) -> set[int]:
        ms = list(dict.fromkeys(monitors))
        covered = set(ms)
        for a, b in itertools.permutations(ms, 2):
            covered.update(self.path(a, b))
        return covered


def static_coverage(g: Graph, monitors: Iterable[int]) -> set[int]:
    """Nodes on the unit-weight deterministic path of any ordered monitor pair,
    monitors included."""
    return StaticPaths(g).coverage(monitors)


def export_graph(g: Graph) -> str:
    lines = [str(g.node_count)] + [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


def import_graph(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise GraphParseError(1, "missing node count")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise GraphParseError(1, f"bad node count {lines[0]!r}") from None
    edges = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 2:
            raise GraphParseError(lineno, f"expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(lineno, f"non-integer address in {raw!r}") from None
        if u < 0 or v < 0:
            raise GraphParseError(lineno, f"negative address in {raw!r}")
        edges.append((u, v))
    return Graph(n, tuple(edges))


def read_graph(path) -> Graph:
    with open(path) as fh:
        return import_graph(fh.read())


def write_graph(g: Graph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(export_graph(g))
