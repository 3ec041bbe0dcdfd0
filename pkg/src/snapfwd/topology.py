"""Identified, connected, undirected networks.

Processors are the integers ``0..n-1``. Neighbor sets are kept in ascending
id order so that every "arbitrary neighbor" choice made elsewhere resolves to
the smallest id.
"""
from __future__ import annotations

import random
from collections import deque
from typing import Iterable, Sequence


class TopologyError(ValueError):
    pass


class Topology:
    """Immutable network graph with its structural constants.

    ``n``, ``max_degree`` (Δ) and ``diameter`` (D) are computed once at
    construction, together with the all-pairs hop distance table.
    """

    __slots__ = ("n", "neighbors", "dist", "max_degree", "diameter", "edges")

    def __init__(self, n: int, neighbors: Sequence[Sequence[int]]):
        self.n = n
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(ns)) for ns in neighbors)
        self.edges = tuple(sorted((p, q) for p in range(n) for q in self.neighbors[p] if p < q))
        self.dist = _all_pairs_bfs(n, self.neighbors)
        self.max_degree = max((len(ns) for ns in self.neighbors), default=0)
        self.diameter = max((max(row) for row in self.dist), default=0)

    @classmethod
    def build(cls, edges: Iterable[Sequence[int]], n: int | None = None) -> "Topology":
        """Validate an edge list and return the topology.

        Rejects self-loops, duplicate edges (in either orientation), endpoints
        outside ``0..n-1`` and disconnected graphs. When ``n`` is omitted it
        is inferred as ``max id + 1`` (one node for an empty edge list).
        """
        edges = [tuple(e) for e in edges]
        for e in edges:
            if len(e) != 2:
                raise TopologyError(f"edge {e!r} must have exactly two endpoints")
        if n is None:
            n = 1 + max((max(e) for e in edges), default=0)
        if n < 1:
            raise TopologyError("a network needs at least one processor")
        adj: list[set[int]] = [set() for _ in range(n)]
        for p, q in edges:
            for x in (p, q):
                if not isinstance(x, int) or not 0 <= x < n:
                    raise TopologyError(f"endpoint {x!r} outside 0..{n - 1}")
            if p == q:
                raise TopologyError(f"self-loop on {p}")
            if q in adj[p]:
                raise TopologyError(f"duplicate edge {p}-{q}")
            adj[p].add(q)
            adj[q].add(p)
        if not _connected(n, adj):
            raise TopologyError("network is disconnected")
        return cls(n, adj)

    def degree(self, p: int) -> int:
        return len(self.neighbors[p])

    def __repr__(self) -> str:
        return f"Topology(n={self.n}, edges={list(self.edges)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Topology) and (self.n, self.edges) == (other.n, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges))


def _connected(n, adj) -> bool:
    seen = {0}
    todo = [0]
    while todo:
        p = todo.pop()
        for q in adj[p]:
            if q not in seen:
                seen.add(q)
                todo.append(q)
    return len(seen) == n


def _all_pairs_bfs(n, neighbors):
    table = []
    for src in range(n):
        row = [-1] * n
        row[src] = 0
        queue = deque([src])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if row[q] < 0:
                    row[q] = row[p] + 1
                    queue.append(q)
        table.append(tuple(row))
    return tuple(table)


# Graphs used throughout the examples and tests.

def figure_network() -> Topology:
    """The five-processor network a..e = 0..4 with links a-c, b-c, c-d, d-e."""
    return Topology.build([(0, 2), (1, 2), (2, 3), (3, 4)])


def path(n: int) -> Topology:
    return Topology.build([(i, i + 1) for i in range(n - 1)], n=n)


def ring(n: int) -> Topology:
    return Topology.build([(i, (i + 1) % n) for i in range(n)], n=n)


def complete(n: int) -> Topology:
    return Topology.build([(i, j) for i in range(n) for j in range(i + 1, n)], n=n)


def star(n: int) -> Topology:
    return Topology.build([(0, i) for i in range(1, n)], n=n)


def random_connected(n: int, seed: int, extra_edge_p: float = 0.3) -> Topology:
    """Random spanning tree plus each remaining pair with probability ``extra_edge_p``."""
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    edges = {tuple(sorted((order[i], order[rng.randrange(i)]))) for i in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_p:
                edges.add((i, j))
    return Topology.build(sorted(edges), n=n)
