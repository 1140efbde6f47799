"""Monitor placement: Ma-style fringe-first, greedy coverage, random control and
a deliberately clustered worst case.

All coverage is measured on the static unit-weight paths of the topology,
since placement happens before any traffic exists.
"""

from __future__ import annotations

import itertools
import warnings
from typing import Callable

import numpy as np

from . import seeding
from .topology import Graph, StaticPaths, hop_distances


class PlacementError(ValueError):
    pass


class CoverageWarning(UserWarning):
    pass


def _check_k(g: Graph, k: int) -> None:
    if not 2 <= k <= g.node_count:
        raise PlacementError(f"k={k} outside [2, {g.node_count}]")


def farthest_pair(g: Graph) -> tuple[int, int]:
    """Pair at maximum hop distance; lexicographically smallest on ties."""
    best, pair = -1, (0, 1)
    for u in g.nodes:
        dist = hop_distances(g, u)
        for v in range(u + 1, g.node_count):
            if dist[v] > best:
                best, pair = dist[v], (u, v)
    return pair


def _gain_step(paths: StaticPaths, monitors: list[int], choose: Callable[[int, int], bool], pool) -> int:
    covered = len(paths.coverage(monitors))
    best_v, best_gain = None, None
    for v in pool:
        gain = len(paths.coverage(monitors + [v])) - covered
        if best_gain is None or choose(gain, best_gain):
            best_v, best_gain = v, gain
    return best_v


def _extend_greedy(g: Graph, monitors: list[int], k: int, paths: StaticPaths) -> list[int]:
    while len(monitors) < k:
        pool = [v for v in g.nodes if v not in monitors]
        # strict > keeps the smallest address on ties (pool is ascending)
        monitors.append(_gain_step(paths, monitors, lambda a, b: a > b, pool))
    return monitors


def place_greedy(g: Graph, k: int) -> list[int]:
    _check_k(g, k)
    return _extend_greedy(g, list(farthest_pair(g)), k, StaticPaths(g))


def fringe_nodes(g: Graph) -> list[int]:
    """Degree-1 nodes: never interior to a simple path, so unobservable
    unless they are monitors themselves."""
    return [v for v in g.nodes if g.degree(v) == 1]


def place_ma(g: Graph, k: int) -> list[int]:
    _check_k(g, k)
    fringe = fringe_nodes(g)
    if len(fringe) > k:
        warnings.warn(
            f"{len(fringe)} fringe nodes exceed k={k}; {len(fringe) - k} stay unobservable",
            CoverageWarning,
            stacklevel=2,
        )
    monitors = fringe[:k]
    if len(monitors) == 0:
        monitors = list(farthest_pair(g))
    elif len(monitors) == 1:
        dist = hop_distances(g, monitors[0])
        far = max(g.nodes, key=lambda v: (dist[v], -v))
        monitors.append(far)
    return _extend_greedy(g, monitors, k, StaticPaths(g))


def place_random(g: Graph, k: int, seed: int) -> list[int]:
    _check_k(g, k)
    rng = seeding.make_rng(seed, seeding.PLACEMENT)
    return [int(x) for x in rng.choice(g.node_count, size=k, replace=False)]


def place_worst(g: Graph, k: int) -> list[int]:
    """Grow a tight cluster from the lowest-degree node, adding the neighbour
    that covers the fewest new nodes."""
    _check_k(g, k)
    paths = StaticPaths(g)
    start = min(g.nodes, key=lambda v: (g.degree(v), v))
    monitors = [start]
    while len(monitors) < k:
        chosen = set(monitors)
        adjacent = sorted({u for m in monitors for u in g.neighbours(m)} - chosen)
        pool = adjacent or [v for v in g.nodes if v not in chosen]
        monitors.append(_gain_step(paths, monitors, lambda a, b: a < b, pool))
    return monitors


ALGORITHMS = {
    "ma": place_ma,
    "greedy": place_greedy,
    "random": place_random,
    "worst": place_worst,
}


def place(algorithm: str, g: Graph, k: int, seed: int = 0) -> list[int]:
    if algorithm not in ALGORITHMS:
        raise PlacementError(f"unknown placement algorithm {algorithm!r}")
    if algorithm == "random":
        return place_random(g, k, seed)
    return ALGORITHMS[algorithm](g, k)


def coverage_fraction(g: Graph, monitors) -> float:
    return len(StaticPaths(g).coverage(monitors)) / g.node_count


def subset_coverages(g: Graph, k: int) -> np.ndarray:
    """Coverage size of every k-subset, for exhaustive comparisons."""
    paths = StaticPaths(g)
    return np.array([len(paths.coverage(list(c))) for c in itertools.combinations(g.nodes, k)])
