"""Self-stabilizing silent shortest-path routing.

Each processor ``p`` keeps, for every destination ``d``, a pair
``(dist_est, next_hop)``. The table is locally consistent when it equals the
Bellman-Ford recomputation from the neighbors' estimates:

* ``d == p``: ``(0, smallest neighbor)``;
* otherwise ``dist_est = min(n, 1 + min_q dist_est(q, d))`` over neighbors
  ``q`` and ``next_hop`` is the smallest-id neighbor reaching that minimum.

A processor whose table is inconsistent has one routing action, which
rewrites its whole table. Estimates are capped at ``n``, so corrupted small
values count up and are flushed after at most ``D + 1`` rounds.
"""
from __future__ import annotations

import random

from .topology import Topology


def correct_tables(topo: Topology) -> tuple:
    """The fixed point: true distances and smallest-id shortest-path next hops."""
    rows = []
    for p in range(topo.n):
        nb = topo.neighbors[p]
        row = []
        for d in range(topo.n):
            if d == p:
                row.append((0, nb[0] if nb else None))
            else:
                best = min(topo.dist[q][d] for q in nb)
                row.append((topo.dist[p][d], next(q for q in nb if topo.dist[q][d] == best)))
        rows.append(tuple(row))
    return tuple(rows)


def recompute_row(topo: Topology, tables, p: int) -> tuple:
    n = topo.n
    nb = topo.neighbors[p]
    row = []
    for d in range(n):
        if d == p:
            row.append((0, nb[0] if nb else None))
            continue
        best_q = nb[0]
        best = tables[best_q][d][0]
        for q in nb[1:]:
            v = tables[q][d][0]
            if v < best:
                best, best_q = v, q
        row.append((min(n, best + 1), best_q))
    return tuple(row)


def is_stale(topo: Topology, tables, p: int) -> bool:
    """True when ``p`` has an enabled routing action."""
    return tables[p] != recompute_row(topo, tables, p)


def routing_enabled(topo: Topology, tables, p: int) -> list:
    from .kernel import ROUTING_RULE, RuleInstance

    return [RuleInstance(p, "routing", ROUTING_RULE)] if is_stale(topo, tables, p) else []


def silent(topo: Topology, tables) -> bool:
    return not any(is_stale(topo, tables, p) for p in range(topo.n))


def next_hop(tables, p: int, d: int):
    """The neighbor ``p`` currently forwards ``d``-bound messages to.

    Before stabilization this may be wrong; for ``d == p`` it is the stored
    arbitrary neighbor.
    """
    return tables[p][d][1]


def validate_tables(topo: Topology, tables) -> None:
    if len(tables) != topo.n:
        raise ValueError("one routing row per processor expected")
    for p, row in enumerate(tables):
        if len(row) != topo.n:
            raise ValueError(f"routing row of {p} must cover every destination")
        for d, (dist, nh) in enumerate(row):
            if not isinstance(dist, int) or dist < 0:
                raise ValueError(f"dist_est({p},{d}) must be a non-negative integer")
            if topo.neighbors[p] and nh not in topo.neighbors[p]:
                raise ValueError(f"next_hop({p},{d})={nh} is not a neighbor of {p}")


def corrupt(topo: Topology, tables, seed: int, severity: float) -> tuple:
    """Replace a ``severity`` fraction of the ``(p, d)`` entries with random
    in-domain values (``next_hop`` in ``N_p``, ``dist_est`` in ``0..n``).

    Deterministic per seed. Isolated processors (``n == 1``) are untouched.
    """
    if not 0.0 <= severity <= 1.0:
        raise ValueError("severity must lie in [0, 1]")
    rng = random.Random(seed)
    entries = [(p, d) for p in range(topo.n) for d in range(topo.n) if topo.neighbors[p]]
    k = round(severity * len(entries))
    rows = [list(r) for r in tables]
    for p, d in sorted(rng.sample(entries, k)):
        rows[p][d] = (rng.randint(0, topo.n), rng.choice(topo.neighbors[p]))
    return tuple(tuple(r) for r in rows)
