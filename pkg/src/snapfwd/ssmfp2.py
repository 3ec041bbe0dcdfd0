"""Distance-based snap-stabilizing forwarding (rules R1-R18).

Every processor owns ``D + 1`` buffers ranked ``1..D+1``. A message is
``(payload, next, last, dest, type)`` with ``type`` in ``S`` (sending),
``A`` (acknowledged) or ``F`` (failed). A valid message keeps a copy in its
source's rank-1 buffer until an ``A`` acknowledgment comes back; an ``F``
acknowledgment triggers re-emission with a fresh next hop.

Layout inside a :class:`~snapfwd.kernel.Configuration`:

* ``bufs[p][i - 1]`` is ``buf_p(i)``;
* ``queues[p][i]`` (``2 <= i <= D + 1``) is the fairness queue of
  ``choice_p(i)``, a permutation of ``N_p``; entries 0 and 1 are unused.

The acknowledgment propagation rule (R7) adopts ``F`` or ``A`` from the
successor; the printed type set ``{R, A}`` names a type that does not exist.
"""
from __future__ import annotations

from typing import NamedTuple

from .kernel import Configuration, RuleInstance, Unclassifiable, both_invalid
from .topology import Topology

S, A, F = "S", "A", "F"
ACK = (A, F)


class Slot2(NamedTuple):
    payload: str
    next: int
    last: int
    dest: int
    type: str
    ghost: str


class Caterpillar2(NamedTuple):
    buffers: tuple  # (processor, rank) from tail to head
    kind: str  # "normal" (tail at rank 1) | "abnormal"
    type: str  # S, A or F

    @property
    def tail(self):
        return self.buffers[0]

    @property
    def head(self):
        return self.buffers[-1]

    @property
    def length(self) -> int:
        return len(self.buffers)


MUTANTS = {
    "R8:lookahead": "R8 without the check on the next hop's buffer of rank i+1",
}


def rotate(queue: tuple, who: int) -> tuple:
    return tuple(x for x in queue if x != who) + (who,)


class Ssmfp2:
    name = "ssmfp2"

    def __init__(self, topology: Topology, mutants=()):
        unknown = set(mutants) - set(MUTANTS)
        if unknown:
            raise ValueError(f"unknown ssmfp2 mutant(s): {sorted(unknown)}")
        self.topology = topology
        self.mutants = frozenset(mutants)
        self.top = topology.diameter + 1  # highest rank, D + 1

    # -- layout -------------------------------------------------------------

    def empty_bufs(self) -> tuple:
        return tuple((None,) * self.top for _ in range(self.topology.n))

    def default_queues(self) -> tuple:
        t = self.topology
        return tuple(((), ()) + tuple(t.neighbors[p] for _ in range(2, self.top + 1)) for p in range(t.n))

    def buffer_count(self) -> int:
        return self.topology.n * self.top

    def buf(self, cfg: Configuration, p: int, i: int):
        return cfg.bufs[p][i - 1]

    # -- procedures ---------------------------------------------------------

    def choice(self, cfg: Configuration, p: int, i: int):
        """First queued neighbor ``s != dest`` whose ``buf_s(i-1)`` is an ``S``
        message with next field ``p``, or ``None``."""
        bufs = cfg.bufs
        for s in cfg.queues[p][i]:
            b = bufs[s][i - 2]
            if b is not None and b.next == p and b.type == S and s != b.dest:
                return s
        return None

    # -- rules --------------------------------------------------------------

    def enabled(self, cfg: Configuration, p: int) -> list[RuleInstance]:
        bufs = cfg.bufs
        tables = cfg.tables
        top = self.top
        mine = bufs[p]
        out = []
        for i in range(1, top + 1):
            b = mine[i - 1]
            if b is None:
                if i == 1:
                    if cfg.request[p] and cfg.pending[p]:
                        send = cfg.pending[p][0]
                        nh = tables[p][send.dest][1]
                        if nh is not None and not _holds(bufs[nh][1] if top > 1 else None, send.payload, p, send.dest):
                            out.append((1, ()))
                else:
                    s = self.choice(cfg, p, i)
                    if s is not None:
                        if i == top:
                            out.append((12, ()))
                        else:
                            m = bufs[s][i - 2]
                            nh = tables[p][m.dest][1]
                            if "R8:lookahead" in self.mutants or not _holds(bufs[nh][i], m.payload, p, m.dest):
                                out.append((8, (i,)))
                continue
            m, r, q, d, c = b.payload, b.next, b.last, b.dest, b.type
            if i == 1:
                if d != p:
                    if c != S:
                        succ = bufs[r][1] if top > 1 else None
                        if not _holds(succ, m, p, d, c):
                            out.append((2 if c == F else 3, ()))
                else:
                    out.append(({S: 4, A: 5, F: 6}[c], ()))
            if c == S:
                if i <= top - 1 and p != d:
                    succ = bufs[r][i]
                    if succ is not None and succ.type in ACK and _holds(succ, m, p, d):
                        out.append((7, (i,)))
                if i >= 2:
                    if d == p:
                        out.append((10, (i,)))
                    elif i == top:
                        out.append((13, ()))
                continue
            if i == 1:
                continue
            # c in {A, F}, rank >= 2
            pred = bufs[q][i - 2]
            pred_links = pred is not None and pred.payload == m and pred.next == p and pred.dest == d
            if d == p and pred_links and pred.type == c:
                out.append((11, (i,)))
            odd_pred = pred_links and (pred.type in ACK and pred.type != c or q == d)
            if i < top:
                succ_same = _holds(bufs[r][i], m, p, d, c)
                if d != p and pred_links and pred.type == c and not succ_same:
                    out.append((9, (i,)))
                if not succ_same:
                    if not pred_links:
                        out.append((15, (i,)))
                    elif odd_pred:
                        out.append((16, (i,)))
            else:
                if d != p and pred_links and pred.type == c:
                    out.append((14, ()))
                if not pred_links:
                    out.append((17, ()))
                elif odd_pred:
                    out.append((18, ()))
        out.sort()
        return [RuleInstance(p, "forwarding", f"R{k}", params) for k, params in out]

    def apply(self, cfg: Configuration, inst: RuleInstance):
        """Statement of ``inst`` evaluated on ``cfg``; returns ``(updates, effects)``."""
        p = inst.proc
        k = int(inst.rule[1:])
        top = self.top
        tables = cfg.tables
        i = inst.params[0] if inst.params else (1 if k <= 6 else top)
        mine = list(cfg.bufs[p])
        b = mine[i - 1]
        upd = {}
        if k == 1:
            send = cfg.pending[p][0]
            ghost = f"v{p}.{cfg.sent[p]}"
            nb = self.topology.neighbors[p]
            mine[0] = Slot2(send.payload, tables[p][send.dest][1], nb[0], send.dest, S, ghost)
            upd["request"] = False
            upd["pending"] = cfg.pending[p][1:]
            upd["sent"] = cfg.sent[p] + 1
            eff = (("gen", ghost, p, send.dest),)
        elif k == 2:
            mine[0] = b._replace(next=tables[p][b.dest][1], type=S)
            eff = (("rewrite", b.ghost, p, S),)
        elif k in (4, 10):
            mine[i - 1] = b._replace(type=A)
            eff = (("deliver", b.ghost, p, b.payload),)
        elif k == 6:
            mine[0] = b._replace(type=S)
            eff = (("rewrite", b.ghost, p, S),)
        elif k == 7:
            t = cfg.bufs[b.next][i].type
            mine[i - 1] = b._replace(type=t)
            eff = (("rewrite", b.ghost, p, t),)
        elif k == 13:
            mine[i - 1] = b._replace(type=F)
            eff = (("rewrite", b.ghost, p, F),)
        elif k in (8, 12):
            s = self.choice(cfg, p, i)
            src = cfg.bufs[s][i - 2]
            mine[i - 1] = Slot2(src.payload, tables[p][src.dest][1], s, src.dest, S, src.ghost)
            queues = list(cfg.queues[p])
            queues[i] = rotate(queues[i], s)
            upd["queues"] = tuple(queues)
            eff = (("copy", src.ghost, p, s),)
        elif k in (3, 5, 9, 11, 14, 15, 16, 17, 18):
            mine[i - 1] = None
            eff = (("erase", b.ghost, p, i),)
        else:
            raise ValueError(f"unknown rule {inst.rule}")
        upd["bufs"] = tuple(mine)
        return upd, eff

    # -- inspection -----------------------------------------------------------

    def slots(self, cfg: Configuration):
        """Yield ``(p, rank, slot)`` for every occupied buffer."""
        for p, row in enumerate(cfg.bufs):
            for k, s in enumerate(row):
                if s is not None:
                    yield p, k + 1, s

    def validate_slot(self, p: int, rank: int, slot: Slot2) -> None:
        t = self.topology
        if not 1 <= rank <= self.top:
            raise ValueError(f"rank {rank} outside 1..{self.top}")
        for name in ("next", "last"):
            if getattr(slot, name) not in t.neighbors[p]:
                raise ValueError(f"{name} field {getattr(slot, name)} of a message at {p} is not a neighbor")
        if not 0 <= slot.dest < t.n:
            raise ValueError(f"destination {slot.dest} outside 0..{t.n - 1}")
        if slot.type not in (S, A, F):
            raise ValueError(f"type {slot.type!r} not in S/A/F")


def _holds(slot, payload, last, dest, type_=None) -> bool:
    """``slot == (payload, *, last, dest, type_)`` with ``type_=None`` as wildcard."""
    return (slot is not None and slot.payload == payload and slot.last == last and slot.dest == dest
            and (type_ is None or slot.type == type_))


def classify_cat2(proto: Ssmfp2, cfg: Configuration, ghost: str, found=None) -> list[Caterpillar2]:
    """Maximal caterpillars made of buffers carrying ``ghost``, tail first.

    Buffers ``buf_p(i)`` and ``buf_r(i+1)`` are chained when ``p`` is not the
    destination, the first names ``r`` as next hop and the second names ``p``
    as last hop. A chain whose types are not ``S*`` followed by a uniform
    ``A``/``F`` suffix splits into the longest conforming pieces.

    ``found`` may pass the ghost's ``(p, rank, slot)`` entries. A link
    between two invalid lineages (a coincidence of the initial
    configuration) ends the chain. Raises :class:`Unclassifiable` when a
    link joins a valid lineage to another one, or the ghost is absent.
    """
    bufs = cfg.bufs
    if found is None:
        found = [(p, i, s) for p, i, s in proto.slots(cfg) if s.ghost == ghost]
    mine = {(p, i): s for p, i, s in found}
    if not mine:
        raise Unclassifiable(f"ghost {ghost} does not exist")

    def succ(p, i):
        s = mine[(p, i)]
        if p == s.dest or i >= proto.top:
            return None
        nxt = bufs[s.next][i]
        if nxt is None or nxt.payload != s.payload or nxt.dest != s.dest or nxt.last != p:
            return None
        if nxt.ghost != ghost and both_invalid(nxt.ghost, ghost):
            return None
        if nxt.ghost != ghost:
            raise Unclassifiable(f"buf_{p}({i}) of {ghost} links to buf_{s.next}({i + 1}) of {nxt.ghost}")
        return (s.next, i + 1)

    links = {key: succ(*key) for key in mine}
    has_pred = {v for v in links.values() if v is not None}
    out = []
    for key in sorted(mine, key=lambda k: (k[1], k[0])):
        if key in has_pred:
            continue
        chain = [key]
        while links[chain[-1]] is not None:
            chain.append(links[chain[-1]])
        out.extend(_split(chain, [mine[k].type for k in chain]))
    return out


def _split(chain, types):
    pieces = []
    start = 0
    suffix = None
    for j, c in enumerate(types):
        if c == S and suffix is None or c == suffix:
            continue
        if suffix is None:
            suffix = c
            continue
        pieces.append((start, j, suffix))
        start, suffix = j, (None if c == S else c)
    pieces.append((start, len(types), suffix))
    return [
        Caterpillar2(tuple(chain[a:b]), "normal" if chain[a][1] == 1 else "abnormal", t or S)
        for a, b, t in pieces
    ]
