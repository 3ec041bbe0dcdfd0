"""Scenario inputs: higher-layer send queues and arbitrary initial configurations.

Valid messages enter the system only through generation rules, driven by the
per-processor pending queues built here. Everything else present at time zero
(routing tables, buffer contents, fairness queues, request bits) may be
corrupted; injected messages are tagged with ``i<k>`` ghosts and are invalid
by definition.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import routing
from .kernel import Configuration, Send
from .ssmfp1 import Slot1, Ssmfp1
from .ssmfp2 import Slot2, Ssmfp2
from .topology import Topology

ARRIVALS = ("all-at-start", "every-k-steps")


class WorkloadError(ValueError):
    pass


@dataclass
class Workload:
    """Ordered sends per source plus an arrival policy.

    ``sends`` holds ``(source, payload, dest)`` triples in the order each
    source hands them to its higher layer. With ``every-k-steps`` the j-th
    send of a source is offered at step ``j * k``.
    """

    sends: list = field(default_factory=list)
    arrival: str = "all-at-start"
    k: int = 1
    allow_collisions: bool = False

    @classmethod
    def random(cls, topo: Topology, count: int, seed: int, **kw) -> "Workload":
        """``count`` sends between random distinct processors, payloads ``m0, m1, ...``."""
        if count and topo.n < 2:
            raise WorkloadError("a single processor cannot send to anyone else")
        rng = random.Random(seed)
        sends = []
        for j in range(count):
            src = rng.randrange(topo.n)
            dst = rng.choice([d for d in range(topo.n) if d != src])
            sends.append((src, f"m{j}", dst))
        return cls(sends, **kw)

    @classmethod
    def saturation(cls, topo: Topology, per_source: int, seed: int) -> "Workload":
        """Every processor has ``per_source`` sends queued from the start."""
        rng = random.Random(seed)
        sends = []
        for j in range(per_source):
            for src in range(topo.n):
                dst = rng.choice([d for d in range(topo.n) if d != src])
                sends.append((src, f"s{src}.{j}", dst))
        return cls(sends)

    def validate(self, topo: Topology) -> None:
        if self.arrival not in ARRIVALS:
            raise WorkloadError(f"arrival policy must be one of {ARRIVALS}")
        if self.k < 1:
            raise WorkloadError("k must be positive")
        seen = set()
        for src, payload, dst in self.sends:
            if not (0 <= src < topo.n and 0 <= dst < topo.n):
                raise WorkloadError(f"send {payload!r}: endpoints outside 0..{topo.n - 1}")
            if src == dst:
                raise WorkloadError(f"send {payload!r}: self-addressed messages are not supported")
            if payload in seen and not self.allow_collisions:
                raise WorkloadError(f"payload {payload!r} used twice (enable collisions to allow it)")
            seen.add(payload)

    def pending(self, topo: Topology) -> tuple:
        queues = [[] for _ in range(topo.n)]
        for src, payload, dst in self.sends:
            j = len(queues[src])
            release = j * self.k if self.arrival == "every-k-steps" else 0
            queues[src].append(Send(payload, dst, release))
        return tuple(tuple(q) for q in queues)

    def payloads(self) -> list:
        return [s[1] for s in self.sends]


@dataclass
class InitialCorruption:
    """Declarative description of the arbitrary part of the initial state.

    ``routing_entries`` are explicit ``(p, d, dist, next)`` overrides applied
    after the random ``routing_severity`` corruption. ``inject`` lists
    explicit buffer contents (protocol-specific dicts); ``inject_count``
    additional buffers are filled at random with in-domain flags.
    """

    seed: int = 0
    routing_severity: float = 0.0
    routing_entries: list = field(default_factory=list)
    inject_count: int = 0
    inject: list = field(default_factory=list)
    scramble: bool = False
    payload_collisions: bool = False


def materialize(topo: Topology, protocol, workload: Workload | None = None,
                corruption: InitialCorruption | None = None) -> Configuration:
    """Build the initial configuration; deterministic per corruption seed."""
    workload = workload or Workload()
    corruption = corruption or InitialCorruption()
    workload.validate(topo)
    rng = random.Random(corruption.seed)

    tables = routing.correct_tables(topo)
    if corruption.routing_severity:
        tables = routing.corrupt(topo, tables, rng.randrange(2**32), corruption.routing_severity)
    if corruption.routing_entries:
        rows = [list(r) for r in tables]
        for p, d, dist, nh in corruption.routing_entries:
            rows[p][d] = (dist, nh)
        tables = tuple(tuple(r) for r in rows)
    routing.validate_tables(topo, tables)

    bufs = [list(row) for row in protocol.empty_bufs()]
    ghost_no = 0
    for spec in corruption.inject:
        ghost = f"i{ghost_no}"
        ghost_no += 1
        _place(protocol, bufs, spec, ghost)
    free = [(p, k) for p in range(topo.n) for k in range(len(bufs[p])) if bufs[p][k] is None]
    if corruption.inject_count > len(free):
        raise WorkloadError(f"cannot inject {corruption.inject_count} messages into {len(free)} free buffers")
    pool = workload.payloads() if corruption.payload_collisions else []
    for p, k in sorted(rng.sample(free, corruption.inject_count)):
        ghost = f"i{ghost_no}"
        payload = rng.choice(pool + [f"x{ghost_no}"]) if pool else f"x{ghost_no}"
        ghost_no += 1
        bufs[p][k] = _random_slot(protocol, rng, p, k, payload, ghost)

    queues = protocol.default_queues()
    request = tuple(False for _ in range(topo.n))
    if corruption.scramble:
        queues = tuple(tuple(tuple(rng.sample(q, len(q))) for q in row) for row in queues)
        request = tuple(rng.random() < 0.5 for _ in range(topo.n))

    return Configuration(
        tables=tables,
        bufs=tuple(tuple(r) for r in bufs),
        queues=queues,
        request=request,
        pending=workload.pending(topo),
        sent=(0,) * topo.n,
        step=0,
    )


def _place(protocol, bufs, spec: dict, ghost: str) -> None:
    spec = dict(spec)
    p = spec.pop("node")
    if isinstance(protocol, Ssmfp1):
        n = protocol.topology.n
        d = spec.pop("dest")
        which = spec.pop("buffer")
        slot = Slot1(str(spec.pop("payload")), spec.pop("last"), spec.pop("color"), ghost)
        protocol.validate_slot(p, d, slot)
        k = d if which == "R" else n + d
        if which not in ("R", "E"):
            raise WorkloadError("buffer must be 'R' or 'E'")
    else:
        rank = spec.pop("rank")
        slot = Slot2(str(spec.pop("payload")), spec.pop("next"), spec.pop("last"), spec.pop("dest"),
                     spec.pop("type"), ghost)
        protocol.validate_slot(p, rank, slot)
        k = rank - 1
    if spec:
        raise WorkloadError(f"unknown injection field(s): {sorted(spec)}")
    if bufs[p][k] is not None:
        raise WorkloadError(f"buffer {k} of processor {p} injected twice")
    bufs[p][k] = slot


def _random_slot(protocol, rng, p, k, payload, ghost):
    t = protocol.topology
    nb = t.neighbors[p]
    if isinstance(protocol, Ssmfp1):
        return Slot1(payload, rng.choice(nb + (p,)), rng.randint(0, t.max_degree), ghost)
    return Slot2(payload, rng.choice(nb), rng.choice(nb), rng.randrange(t.n), rng.choice("SAF"), ghost)


def request_handshake(cfg: Configuration, p: int) -> Configuration:
    """Higher-layer side of the request bit at ``p``.

    Raises the bit when a released send is waiting and the bit is down;
    clears a raised bit that refers to no waiting message.
    """
    pend = cfg.pending[p]
    waiting = bool(pend) and pend[0].release <= cfg.step
    if cfg.request[p] == waiting:
        return cfg
    req = list(cfg.request)
    req[p] = waiting
    return replace(cfg, request=tuple(req))


def make_protocol(name: str, topo: Topology, mutants: Sequence[str] = ()):
    if name == "ssmfp1":
        return Ssmfp1(topo, mutants)
    if name == "ssmfp2":
        return Ssmfp2(topo, mutants)
    raise ValueError(f"unknown protocol {name!r}")
