"""Destination-based snap-stabilizing forwarding (rules R1-R6).

Every processor owns, for each destination ``d``, a reception buffer
``bufR_p(d)`` and an emission buffer ``bufE_p(d)``. A message is the triple
``(payload, last hop, color)``; the destination is the buffer index.

Layout inside a :class:`~snapfwd.kernel.Configuration`:

* ``bufs[p]`` has ``2n`` slots: ``bufR_p(d)`` at ``d`` and ``bufE_p(d)`` at
  ``n + d``; ``None`` is the empty buffer.
* ``queues[p][d]`` is the fairness queue of ``choice_p(d)``: a permutation of
  ``N_p ∪ {p}``. The selected candidate moves to the back when it is served.

Guards compare payload, last hop and color only. The ``ghost`` field is a
verification tag and never influences a guard.
"""
from __future__ import annotations

from typing import NamedTuple

from .kernel import Configuration, RuleInstance, Unclassifiable, both_invalid
from .topology import Topology


class Slot1(NamedTuple):
    payload: str
    last: int
    color: int
    ghost: str


class Caterpillar1(NamedTuple):
    type: int  # 1, 2 or 3
    buffers: tuple  # ("R" | "E", processor) pairs, emitter first


MUTANTS = {
    "R4:forall": "R4 without the clause forbidding copies at other neighbors",
    "R2:color": "R2 stamps color 0 instead of a free color",
}


def rotate(queue: tuple, who: int) -> tuple:
    return tuple(x for x in queue if x != who) + (who,)


class Ssmfp1:
    name = "ssmfp1"

    def __init__(self, topology: Topology, mutants=()):
        unknown = set(mutants) - set(MUTANTS)
        if unknown:
            raise ValueError(f"unknown ssmfp1 mutant(s): {sorted(unknown)}")
        self.topology = topology
        self.mutants = frozenset(mutants)

    # -- layout -------------------------------------------------------------

    def empty_bufs(self) -> tuple:
        n = self.topology.n
        return tuple((None,) * (2 * n) for _ in range(n))

    def default_queues(self) -> tuple:
        t = self.topology
        return tuple(tuple(tuple(sorted(t.neighbors[p] + (p,))) for _ in range(t.n)) for p in range(t.n))

    def buffer_count(self) -> int:
        return 2 * self.topology.n ** 2

    def bufR(self, cfg: Configuration, p: int, d: int):
        return cfg.bufs[p][d]

    def bufE(self, cfg: Configuration, p: int, d: int):
        return cfg.bufs[p][self.topology.n + d]

    # -- procedures ---------------------------------------------------------

    def color_of(self, cfg: Configuration, p: int, d: int) -> int:
        """Smallest color in ``0..Δ`` carried by no ``bufR_q(d)``, ``q`` in ``N_p``."""
        used = set()
        for q in self.topology.neighbors[p]:
            s = cfg.bufs[q][d]
            if s is not None:
                used.add(s.color)
        c = 0
        while c in used:
            c += 1
        return c

    def choice(self, cfg: Configuration, p: int, d: int):
        """First queued candidate allowed to fill ``bufR_p(d)``, or ``None``.

        A neighbor ``s`` qualifies when ``bufE_s(d)`` is occupied and
        ``nextHop_s(d) = p`` and ``s != d`` (a message sitting at its
        destination is consumed there, never forwarded); ``p`` itself
        qualifies when its request is raised for destination ``d``.
        """
        n = self.topology.n
        bufs = cfg.bufs
        tables = cfg.tables
        for s in cfg.queues[p][d]:
            if s == p:
                if cfg.request[p] and cfg.pending[p] and cfg.pending[p][0].dest == d:
                    return p
            elif s != d and bufs[s][n + d] is not None and tables[s][d][1] == p:
                return s
        return None

    # -- rules --------------------------------------------------------------

    def enabled(self, cfg: Configuration, p: int) -> list[RuleInstance]:
        n = self.topology.n
        nb = self.topology.neighbors[p]
        bufs = cfg.bufs
        mine = bufs[p]
        out = []
        for d in range(n):
            r = mine[d]
            e = mine[n + d]
            if r is None:
                s = self.choice(cfg, p, d)
                if s is not None:
                    out.append((1 if s == p else 3, d))
            else:
                q = r.last
                if e is None:
                    eq = None if q == p else bufs[q][n + d]
                    if eq is None or eq.payload != r.payload or eq.color != r.color:
                        out.append((2, d))
                if q != p:
                    eq = bufs[q][n + d]
                    if (eq is not None and eq.payload == r.payload and eq.color == r.color
                            and cfg.tables[q][d][1] != p):
                        out.append((5, d))
            if e is not None:
                if d == p:
                    out.append((6, d))
                elif self._r4_guard(cfg, p, d, e, nb):
                    out.append((4, d))
        out.sort()
        return [RuleInstance(p, "forwarding", f"R{k}", (d,)) for k, d in out]

    def _r4_guard(self, cfg, p, d, e, nb) -> bool:
        bufs = cfg.bufs
        nh = cfg.tables[p][d][1]
        rn = bufs[nh][d]
        if rn is None or rn.payload != e.payload or rn.last != p or rn.color != e.color:
            return False
        if "R4:forall" in self.mutants:
            return True
        for x in nb:
            if x != nh:
                rx = bufs[x][d]
                if rx is not None and rx.payload == e.payload and rx.last == p and rx.color == e.color:
                    return False
        return True

    def apply(self, cfg: Configuration, inst: RuleInstance):
        """Statement of ``inst`` evaluated on ``cfg``; returns ``(updates, effects)``."""
        n = self.topology.n
        p = inst.proc
        (d,) = inst.params
        mine = list(cfg.bufs[p])
        upd = {}
        rule = inst.rule
        if rule == "R1":
            send = cfg.pending[p][0]
            ghost = f"v{p}.{cfg.sent[p]}"
            mine[d] = Slot1(send.payload, p, 0, ghost)
            upd["request"] = False
            upd["pending"] = cfg.pending[p][1:]
            upd["sent"] = cfg.sent[p] + 1
            upd["queues"] = _set(cfg.queues[p], d, rotate(cfg.queues[p][d], p))
            eff = (("gen", ghost, p, d),)
        elif rule == "R2":
            r = mine[d]
            color = 0 if "R2:color" in self.mutants else self.color_of(cfg, p, d)
            mine[n + d] = Slot1(r.payload, p, color, r.ghost)
            mine[d] = None
            eff = (("move", r.ghost, p, color),)
        elif rule == "R3":
            s = self.choice(cfg, p, d)
            e = cfg.bufs[s][n + d]
            mine[d] = Slot1(e.payload, s, e.color, e.ghost)
            upd["queues"] = _set(cfg.queues[p], d, rotate(cfg.queues[p][d], s))
            eff = (("copy", e.ghost, p, s),)
        elif rule == "R4":
            eff = (("erase", mine[n + d].ghost, p, d),)
            mine[n + d] = None
        elif rule == "R5":
            eff = (("erase", mine[d].ghost, p, d),)
            mine[d] = None
        elif rule == "R6":
            e = mine[n + d]
            eff = (("consume", e.ghost, p, e.payload),)
            mine[n + d] = None
        else:
            raise ValueError(f"unknown rule {rule}")
        upd["bufs"] = tuple(mine)
        return upd, eff

    # -- inspection -----------------------------------------------------------

    def slots(self, cfg: Configuration):
        """Yield ``(p, kind, d, slot)`` for every occupied buffer (kind 'R' or 'E')."""
        n = self.topology.n
        for p, row in enumerate(cfg.bufs):
            for k, s in enumerate(row):
                if s is not None:
                    yield (p, "R", k, s) if k < n else (p, "E", k - n, s)

    def validate_slot(self, p: int, d: int, slot: Slot1) -> None:
        t = self.topology
        if slot.last != p and slot.last not in t.neighbors[p]:
            raise ValueError(f"last hop {slot.last} of a message at {p} must be in N_p ∪ {{p}}")
        if not 0 <= slot.color <= t.max_degree:
            raise ValueError(f"color {slot.color} outside 0..{t.max_degree}")
        if not 0 <= d < t.n:
            raise ValueError(f"destination {d} outside 0..{t.n - 1}")


def classify_cat1(proto: Ssmfp1, cfg: Configuration, ghost: str, found=None) -> list[Caterpillar1]:
    """Every caterpillar made of buffers carrying ``ghost``.

    A reception buffer is of type 1 unless its last hop's emission buffer
    holds the same payload and color, in which case it is the tail of that
    emission buffer's type-3 caterpillar. An emission buffer is of type 2
    when its next hop does not hold the matching copy, and it forms one
    type-3 caterpillar with every neighbor that holds one.

    ``found`` may pass the ghost's ``(p, kind, d, slot)`` entries when the
    caller has already indexed the configuration. Two invalid lineages may
    line up by coincidence in the initial configuration and then form one
    caterpillar. Raises :class:`Unclassifiable` when a caterpillar joins a
    valid lineage to another one, or the ghost is absent.
    """
    n = proto.topology.n
    bufs = cfg.bufs
    if found is None:
        found = [(p, kind, d, s) for p, kind, d, s in proto.slots(cfg) if s.ghost == ghost]
    if not found:
        raise Unclassifiable(f"ghost {ghost} does not exist")
    if len({d for _, _, d, _ in found}) > 1:
        raise Unclassifiable(f"ghost {ghost} occupies several destination components")
    out = []
    for p, kind, d, s in found:
        if kind == "R":
            q = s.last
            e = None if q == p else bufs[q][n + d]
            if e is None or e.payload != s.payload or e.color != s.color:
                out.append(Caterpillar1(1, (("R", p),)))
            elif e.ghost != ghost and not both_invalid(e.ghost, ghost):
                raise Unclassifiable(f"bufR_{p}({d}) of {ghost} hangs off bufE_{q}({d}) of {e.ghost}")
            elif e.ghost != ghost:
                out.append(Caterpillar1(3, (("E", q), ("R", p))))
            continue
        nh = cfg.tables[p][d][1]
        rn = bufs[nh][d] if nh is not None else None
        if rn is None or rn.payload != s.payload or rn.last != p or rn.color != s.color:
            out.append(Caterpillar1(2, (("E", p),)))
        for x in proto.topology.neighbors[p]:
            rx = bufs[x][d]
            if rx is not None and rx.payload == s.payload and rx.last == p and rx.color == s.color:
                if rx.ghost != ghost and not both_invalid(rx.ghost, ghost):
                    raise Unclassifiable(f"bufE_{p}({d}) of {ghost} feeds bufR_{x}({d}) of {rx.ghost}")
                out.append(Caterpillar1(3, (("E", p), ("R", x))))
    return out


def _set(tup: tuple, i: int, value) -> tuple:
    return tup[:i] + (value,) + tup[i + 1:]
