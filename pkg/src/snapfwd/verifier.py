"""Verdicts over executions: delivery ledger, invariant monitors, metrics and
bounded exhaustive exploration.

The ledger follows every ghost (one lineage of message copies) through the
effects recorded by the kernel. Valid ghosts must be delivered exactly once at
their destination and must never lose their last copy before that. Invalid
ghosts may be delivered at most once.
"""
from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from . import routing
from .kernel import Configuration, RuleInstance, Simulator, StaleGuard, StepRecord, Unclassifiable, settle
from .ssmfp1 import Ssmfp1, classify_cat1
from .ssmfp2 import Ssmfp2, classify_cat2

KINDS = ("loss", "duplication", "misdelivery", "invalid-bound", "fairness", "progress-budget", "invariant")


def delivery_bound(protocol, topo, silence_round: int | None, margin: int = 4) -> int:
    """Round budget for one delivery: ``margin * max(R, Δ^D)`` for ssmfp1 and
    ``margin * max(R, n D Δ^D)`` for ssmfp2, with ``R`` the measured routing
    silence round."""
    worst = topo.max_degree ** topo.diameter
    if isinstance(protocol, Ssmfp2):
        worst *= topo.n * topo.diameter
    return margin * max(silence_round or 0, worst)


def invalid_delivery_bound(protocol, topo) -> int:
    """Invalid deliveries one destination can receive: one per buffer of its
    component (``2n`` for ssmfp1, ``n(D+1)`` for ssmfp2)."""
    if isinstance(protocol, Ssmfp1):
        return 2 * topo.n
    return topo.n * (topo.diameter + 1)


class LedgerError(AssertionError):
    """Copy counts disagree with the configuration: a verifier bug, not a protocol fault."""


class ReplayMismatch(RuntimeError):
    """A recorded trace does not replay to the recorded state digests."""


class StateBudgetExceeded(RuntimeError):
    """Exhaustive exploration visited more states than its budget allows."""


class NoDeliveries(ValueError):
    pass


class Violation(NamedTuple):
    kind: str
    detail: str
    step: int


@dataclass
class Verdict:
    outcome: str  # "pass" | "violation"
    kind: str | None = None
    detail: str = ""
    witness: dict | None = None  # seed, scenario, step; explore adds the selection path

    @property
    def ok(self) -> bool:
        return self.outcome == "pass"

    @classmethod
    def from_violation(cls, v: Violation, context: dict | None = None) -> "Verdict":
        return cls("violation", v.kind, v.detail, {**(context or {}), "step": v.step})

    def __str__(self) -> str:
        if self.ok:
            return "pass"
        return f"violation[{self.kind}] at step {self.witness.get('step')}: {self.detail}"


@dataclass
class GhostEntry:
    ghost: str
    valid: bool
    dest: int
    source: int | None = None
    generated_step: int | None = None  # None for invalid-at-init
    generated_round: int | None = None
    copies: int = 0
    deliveries: list = field(default_factory=list)  # (step, proc, round)
    erasures: list = field(default_factory=list)  # (step, proc)

    @property
    def rounds_to_delivery(self) -> int | None:
        """Rounds spanned from generation to delivery, both rounds included."""
        if not self.valid or not self.deliveries:
            return None
        return self.deliveries[0][2] - self.generated_round + 1


def ghost_slots(protocol, cfg: Configuration) -> dict:
    """Index ``{ghost: [slot entries]}`` in the protocol's ``slots`` format."""
    out: dict = {}
    for entry in protocol.slots(cfg):
        out.setdefault(entry[-1].ghost, []).append(entry)
    return out


def slot_dest(protocol, entry) -> int:
    return entry[2] if isinstance(protocol, Ssmfp1) else entry[2].dest


class DeliveryLedger:
    """Per-ghost origin, copy count, deliveries and erasures."""

    def __init__(self, protocol, c0: Configuration):
        self.protocol = protocol
        self.ghosts: dict[str, GhostEntry] = {}
        for ghost, entries in ghost_slots(protocol, c0).items():
            self.ghosts[ghost] = GhostEntry(ghost, ghost.startswith("v"), slot_dest(protocol, entries[0]),
                                            copies=len(entries))

    def apply(self, effects, step: int, round_index: int) -> list[Violation]:
        """Account for one step's effects; returns the step-law violations."""
        out = []
        touched = []
        for kind, ghost, proc, detail in effects:
            g = self.ghosts.get(ghost)
            if kind == "gen":
                g = self.ghosts[ghost] = GhostEntry(ghost, True, detail, proc, step, round_index)
                g.copies = 1
            elif g is None:
                raise LedgerError(f"effect {kind} on unknown ghost {ghost}")
            elif kind == "copy":
                g.copies += 1
            elif kind == "erase":
                g.copies -= 1
                g.erasures.append((step, proc))
            elif kind in ("consume", "deliver"):
                if kind == "consume":
                    g.copies -= 1
                g.deliveries.append((step, proc, round_index))
                if proc != g.dest:
                    out.append(Violation("misdelivery", f"{ghost} for {g.dest} delivered at {proc}", step))
                if len(g.deliveries) > 1:
                    kind_ = "duplication" if g.valid else "invalid-bound"
                    out.append(Violation(kind_, f"{ghost} delivered {len(g.deliveries)} times", step))
            touched.append(g)
        for g in touched:
            if g.copies < 0:
                raise LedgerError(f"negative copy count for {g.ghost}")
            if g.valid and g.copies == 0 and not g.deliveries:
                out.append(Violation("loss", f"last copy of {g.ghost} erased before delivery", step))
        return out

    def check_conservation(self, index: dict) -> None:
        for ghost, g in self.ghosts.items():
            have = len(index.get(ghost, ()))
            if have != g.copies:
                raise LedgerError(f"{ghost}: ledger counts {g.copies} copies, configuration holds {have}")

    def valid(self):
        return [g for g in self.ghosts.values() if g.valid]

    def invalid_deliveries(self) -> Counter:
        c = Counter()
        for g in self.ghosts.values():
            if not g.valid:
                for _, proc, _ in g.deliveries:
                    c[proc] += 1
        return c


@dataclass
class AuditReport:
    verdict: Verdict
    metrics: dict
    ledger: DeliveryLedger

    def rows(self) -> list[dict]:
        """Per-ghost metric rows (CSV layout)."""
        out = []
        for g in sorted(self.ledger.ghosts.values(), key=lambda g: (not g.valid, g.ghost)):
            out.append({
                "ghost_id": g.ghost,
                "valid": g.valid,
                "generated_step": g.generated_step,
                "delivered_step": g.deliveries[0][0] if g.deliveries else None,
                "rounds_to_delivery": g.rounds_to_delivery,
                "destination": g.dest,
            })
        return out


class Auditor:
    """Inline (or replay) observer issuing a verdict for one execution.

    ``fairness_bound``: maximum number of consecutive steps a processor may
    stay enabled without acting. ``delivery_budget``: maximum rounds from
    generation to delivery, or ``"auto"`` for :func:`delivery_bound` with the
    measured routing silence round. ``invalid_bound``: maximum invalid
    deliveries per destination. ``monitors`` turns on the caterpillar and color checks and
    the copy-conservation check.
    """

    def __init__(self, sim: Simulator, c0: Configuration, *, fairness_bound: int | None = None,
                 delivery_budget: int | None = None, invalid_bound: int | None = None,
                 monitors: bool = True, context: dict | None = None):
        self.sim = sim
        self.protocol = sim.protocol
        self.topology = sim.topology
        self.fairness_bound = fairness_bound
        self.delivery_budget = delivery_budget
        self.invalid_bound = invalid_delivery_bound(sim.protocol, sim.topology) if invalid_bound == "auto" else invalid_bound
        self.monitors = monitors
        self.context = context or {}
        c0, _ = settle(c0)
        self.ledger = DeliveryLedger(self.protocol, c0)
        self.violations: list[Violation] = []
        self.streak: dict[int, int] = {}
        self.silence_round = 0 if routing.silent(self.topology, c0.tables) else None
        self.round_deliveries: Counter = Counter()
        self.round_pending: dict[int, frozenset] = {}  # round -> destinations with pending valid messages
        self.steps = 0
        self.monitor_checks = 0
        if monitors:
            self._monitor_state(c0, 0)

    def _pending_dests(self, cfg: Configuration) -> frozenset:
        """Destinations with a message in transit at the start of a round.

        For ssmfp1 that is any occupied buffer of the destination's
        component; for ssmfp2 any message heading a type-S caterpillar
        (acknowledgment traffic does not count as pending).
        """
        if isinstance(self.protocol, Ssmfp1):
            return frozenset(d for _, _, d, _ in self.protocol.slots(cfg))
        dests = set()
        for ghost, entries in ghost_slots(self.protocol, cfg).items():
            try:
                cats = classify_cat2(self.protocol, cfg, ghost, entries)
            except Unclassifiable:
                continue
            if any(c.type == "S" for c in cats):
                dests.add(entries[0][2].dest)
        return frozenset(dests)

    def on_step(self, rec: StepRecord, pre: Configuration, post: Configuration, round_index: int) -> None:
        self.steps += 1
        if round_index not in self.round_pending:
            self.round_pending[round_index] = self._pending_dests(pre)
        if self.silence_round is None and any(i.layer == "routing" for i in rec.chosen):
            if routing.silent(self.topology, post.tables):
                self.silence_round = round_index
        found = self.ledger.apply(rec.effects, rec.step, round_index)
        for kind, ghost, proc, _ in rec.effects:
            if kind in ("consume", "deliver"):
                self.round_deliveries[(round_index, proc)] += 1
        if self.fairness_bound is not None:
            chosen = {i.proc for i in rec.chosen}
            after = set(rec.enabled_after)
            for p in rec.enabled_before:
                if p in chosen or p not in after:
                    self.streak[p] = 0
                else:
                    self.streak[p] = self.streak.get(p, 0) + 1
                    if self.streak[p] >= self.fairness_bound:
                        found.append(Violation("fairness", f"processor {p} enabled and unchosen for "
                                               f"{self.streak[p]} steps", rec.step))
            for p in list(self.streak):
                if p not in after:
                    self.streak[p] = 0
        if self.invalid_bound is not None:
            for _, ghost, proc, _ in (e for e in rec.effects if e[0] in ("consume", "deliver")):
                if not self.ledger.ghosts[ghost].valid:
                    count = self.ledger.invalid_deliveries()[proc]
                    if count > self.invalid_bound:
                        found.append(Violation("invalid-bound", f"{count} invalid deliveries at {proc} "
                                               f"exceed {self.invalid_bound}", rec.step))
        if self.monitors:
            found.extend(self._monitor_step(rec, pre, post))
        self.violations.extend(found)

    # -- monitors ---------------------------------------------------------------

    def _monitor_step(self, rec, pre, post) -> list[Violation]:
        out = []
        if isinstance(self.protocol, Ssmfp1):
            n = self.topology.n
            for inst in rec.chosen:
                if inst.rule == "R2":
                    p, (d,) = inst.proc, inst.params
                    color = post.bufs[p][n + d].color
                    used = {pre.bufs[q][d].color for q in self.topology.neighbors[p] if pre.bufs[q][d] is not None}
                    if color in used:
                        out.append(Violation("invariant", f"R2 at {p} for {d} stamped color {color} "
                                             f"held by a neighbor's reception buffer", rec.step))
        out.extend(self._monitor_state(post, rec.step))
        return out

    def _monitor_state(self, cfg: Configuration, step: int) -> list[Violation]:
        self.monitor_checks += 1
        index = ghost_slots(self.protocol, cfg)
        self.ledger.check_conservation(index)
        out = []
        cat2 = isinstance(self.protocol, Ssmfp2)
        for ghost, entries in index.items():
            try:
                cats = (classify_cat2 if cat2 else classify_cat1)(self.protocol, cfg, ghost, entries)
            except Unclassifiable as exc:
                out.append(Violation("invariant", f"unclassifiable: {exc}", step))
                continue
            g = self.ledger.ghosts[ghost]
            if cat2 and g.valid:
                if len(cats) != 1:
                    out.append(Violation("invariant", f"{ghost} has {len(cats)} caterpillar heads", step))
                if not g.deliveries and not any(p == g.source and i == 1 for p, i, _ in entries):
                    out.append(Violation("invariant", f"{ghost} lost its rank-1 copy at {g.source} "
                                         "before delivery", step))
        if cat2:
            for g in self.ledger.valid():
                if not g.deliveries and g.ghost not in index:
                    out.append(Violation("invariant", f"{g.ghost} vanished before delivery", step))
        return out

    # -- closing ----------------------------------------------------------------

    def finish(self, status: str, steps: int, rounds: int) -> AuditReport:
        violations = list(self.violations)
        last = self.steps
        if self.delivery_budget == "auto":
            self.delivery_budget = delivery_bound(self.protocol, self.topology, self.silence_round)
        for g in self.ledger.valid():
            if g.deliveries:
                r = g.rounds_to_delivery
                if self.delivery_budget is not None and r > self.delivery_budget:
                    violations.append(Violation("progress-budget", f"{g.ghost} took {r} rounds "
                                                f"(budget {self.delivery_budget})", g.deliveries[0][0]))
            elif status == "terminal":
                violations.append(Violation("loss", f"{g.ghost} never delivered in a terminal run", last))
            elif self.delivery_budget is not None and rounds - g.generated_round + 1 > self.delivery_budget:
                violations.append(Violation("progress-budget", f"{g.ghost} undelivered after "
                                            f"{rounds - g.generated_round + 1} rounds", last))
        violations.sort(key=lambda v: v.step)
        verdict = Verdict.from_violation(violations[0], self.context) if violations else Verdict("pass")
        inv = self.ledger.invalid_deliveries()
        valid_deliv = sum(len(g.deliveries) for g in self.ledger.valid())
        total_deliv = valid_deliv + sum(inv.values())
        per_ghost = [g.rounds_to_delivery for g in self.ledger.valid() if g.deliveries]
        metrics = {
            "status": status,
            "steps": steps,
            "rounds": rounds,
            "routing_silence_round": self.silence_round,
            "valid_generated": len(self.ledger.valid()),
            "valid_delivered": valid_deliv,
            "invalid_deliveries": total_deliv - valid_deliv,
            "invalid_per_destination": dict(sorted(inv.items())),
            "max_invalid_per_destination": max(inv.values(), default=0),
            "max_rounds_to_delivery": max(per_ghost, default=None),
            "delivery_budget": self.delivery_budget,
            "amortized_rounds_per_delivery": rounds / total_deliv if total_deliv else None,
            "max_delivery_gap": self.delivery_gap(rounds),
            "max_delivery_gap_per_destination": self.delivery_gap(rounds, per_destination=True),
            "monitor_checks": self.monitor_checks if self.monitors else 0,
            "violations": len(violations),
        }
        return AuditReport(verdict, metrics, self.ledger)

    def delivery_gap(self, rounds: int, per_destination: bool = False) -> int:
        """Longest stretch of rounds from a round start with a message in
        transit up to the next delivery, both rounds included; a stretch
        still open at the end of the run counts up to the last round.

        ``per_destination`` measures each destination against its own
        deliveries; otherwise any delivery closes the stretch."""
        keys = sorted({d for ds in self.round_pending.values() for d in ds}) if per_destination else [None]
        worst = 0
        for key in keys:
            nxt = None
            for r in range(rounds, 0, -1):
                if key is None:
                    hit = any(self.round_deliveries[(r, p)] for p in range(self.topology.n))
                else:
                    hit = self.round_deliveries[(r, key)] > 0
                if hit:
                    nxt = r
                pend = self.round_pending.get(r, frozenset())
                if pend if key is None else key in pend:
                    worst = max(worst, (nxt if nxt is not None else rounds) - r + 1)
        return worst


def audit(sim: Simulator, c0: Configuration, records: Sequence[StepRecord], status: str, **kw) -> AuditReport:
    """Replay ``records`` from ``c0``, checking every digest, and audit them."""
    from .kernel import RoundTracker

    auditor = Auditor(sim, c0, **kw)
    cfg, _ = settle(c0)
    tracker = RoundTracker(records[0].enabled_before if records else ())
    for rec in records:
        try:
            nxt, _, _ = sim.step(cfg, rec.chosen)
        except StaleGuard as exc:
            raise ReplayMismatch(f"step {rec.step}: {exc}") from exc
        if nxt.digest() != rec.digest:
            raise ReplayMismatch(f"step {rec.step}: digest {nxt.digest()} != recorded {rec.digest}")
        ridx = tracker.update((i.proc for i in rec.chosen), rec.enabled_after)
        auditor.on_step(rec, cfg, nxt, ridx)
        cfg = nxt
    return auditor.finish(status, len(records), tracker.total)


def amortized(report_or_trace) -> float:
    """Rounds per delivered message (valid or invalid)."""
    m = report_or_trace.metrics
    deliveries = m["valid_delivered"] + m["invalid_deliveries"]
    if not deliveries:
        raise NoDeliveries("no message was delivered")
    return m["rounds"] / deliveries


# -- exhaustive exploration ---------------------------------------------------


class ExploreResult(NamedTuple):
    verdict: Verdict
    states: int
    transitions: int
    initials: int
    depth: int  # deepest level expanded
    path: tuple  # selections of the witness, minimized
    initial_index: int | None


def corruption_family(topo, protocol, workload, components: Sequence[dict]) -> list[Configuration]:
    """Finite family of initial configurations.

    Each component is ``{"routing": ..., "injections": ...}``; the family is
    the union over components of the product of their two sets:

    * routing ``correct``: the stabilized tables;
    * routing ``destination``: every table whose entries for the destinations
      of the workload range over ``dist`` in ``0..n`` and ``next`` in ``N_p``,
      all other entries correct;
    * routing ``single``: correct tables with one entry replaced by any
      in-domain value;
    * injections ``none`` or ``single``: one buffer holding any in-domain
      message whose payload is either a workload payload or a fresh one.
    """
    from .workload import materialize

    base = materialize(topo, protocol, workload)
    correct = base.tables
    n = topo.n
    dests = sorted({s[2] for s in workload.sends})
    out: list = []
    seen = set()

    def entry_values(p):
        return [(dist, nh) for dist in range(n + 1) for nh in topo.neighbors[p]]

    for comp in components:
        unknown = set(comp) - {"routing", "injections"}
        if unknown:
            raise ValueError(f"unknown family field(s): {sorted(unknown)}")
        mode = comp.get("routing", "correct")
        if mode == "correct":
            tables_set = [correct]
        elif mode == "destination":
            cells = [(p, d) for d in dests for p in range(n)]
            tables_set = []
            for values in itertools.product(*(entry_values(p) for p, _ in cells)):
                rows = [list(r) for r in correct]
                for (p, d), v in zip(cells, values):
                    rows[p][d] = v
                tables_set.append(tuple(tuple(r) for r in rows))
        elif mode == "single":
            tables_set = [correct]
            for p in range(n):
                for d in range(n):
                    for v in entry_values(p):
                        if v != correct[p][d]:
                            rows = [list(r) for r in correct]
                            rows[p][d] = v
                            tables_set.append(tuple(tuple(r) for r in rows))
        else:
            raise ValueError(f"unknown routing family {mode!r}")
        inj = comp.get("injections", "none")
        if inj == "none":
            bufs_set = [base.bufs]
        elif inj == "single":
            bufs_set = list(_single_injections(topo, protocol, base.bufs, workload.payloads()))
        else:
            raise ValueError(f"unknown injection family {inj!r}")
        for tables in tables_set:
            for bufs in bufs_set:
                key = (tables, bufs)
                if key not in seen:
                    seen.add(key)
                    out.append(Configuration(tables, bufs, base.queues, base.request, base.pending, base.sent))
    return out


def _single_injections(topo, protocol, empty, payloads):
    from .ssmfp1 import Slot1
    from .ssmfp2 import Slot2

    pool = list(dict.fromkeys(payloads)) + ["x"]
    for p in range(topo.n):
        nb = topo.neighbors[p]
        for k in range(len(empty[p])):
            if isinstance(protocol, Ssmfp1):
                slots = [Slot1(m, last, c, "i0") for m in pool for last in sorted(nb + (p,))
                         for c in range(topo.max_degree + 1)]
            else:
                slots = [Slot2(m, r, q, d, t, "i0") for m in pool for r in nb for q in nb
                         for d in range(topo.n) for t in "SAF"]
            for s in slots:
                row = list(empty[p])
                row[k] = s
                yield tuple(tuple(row) if j == p else empty[j] for j in range(topo.n))


def _selections(enabled: dict):
    procs = sorted(enabled)
    for size in range(1, len(procs) + 1):
        for subset in itertools.combinations(procs, size):
            for combo in itertools.product(*(enabled[p] for p in subset)):
                yield combo


class _Checker:
    """Step-law checks for exploration; ``delivered`` is part of the state."""

    def __init__(self, sim: Simulator, c0: Configuration):
        self.protocol = sim.protocol
        self.dest = {}
        for p, queue in enumerate(c0.pending):
            for k, send in enumerate(queue):
                self.dest[f"v{p}.{c0.sent[p] + k}"] = send.dest

    def valid_present(self, cfg) -> set:
        return {e[-1].ghost for e in self.protocol.slots(cfg) if e[-1].ghost.startswith("v")}

    def check(self, pre, post, effects, delivered: frozenset):
        """Returns ``(violation or None, new delivered set)``."""
        newly = set()
        for kind, ghost, proc, _ in effects:
            if kind in ("consume", "deliver") and ghost.startswith("v"):
                if ghost in delivered or ghost in newly:
                    return ("duplication", f"{ghost} delivered twice"), delivered
                if proc != self.dest[ghost]:
                    return ("misdelivery", f"{ghost} delivered at {proc}"), delivered
                newly.add(ghost)
        delivered = delivered | newly if newly else delivered
        before = self.valid_present(pre) | {e[1] for e in effects if e[0] == "gen"}
        after = self.valid_present(post)
        for ghost in before - after:
            if ghost not in delivered:
                return ("loss", f"last copy of {ghost} erased before delivery"), delivered
        return None, delivered

    def terminal(self, cfg, delivered):
        if any(cfg.pending):
            return ("progress-budget", "terminal configuration with sends never generated")
        missing = []
        for g in self.dest:
            src, k = map(int, g[1:].split("."))
            if k < cfg.sent[src] and g not in delivered:
                missing.append(g)
        if missing:
            return ("loss", f"{missing[0]} never delivered in a terminal configuration")
        return None


def explore(sim: Simulator, initials: Sequence[Configuration], depth: int, *,
            state_budget: int = 2_000_000, minimize: bool = True, context: dict | None = None) -> ExploreResult:
    """Breadth-first enumeration of every daemon choice from every initial
    configuration, up to ``depth`` steps.

    A state is the configuration plus the set of valid ghosts already
    delivered. Raises :class:`StateBudgetExceeded` past ``state_budget``
    visited states.
    """
    parents: dict = {}
    frontier = deque()
    checkers = []
    for idx, c0 in enumerate(initials):
        c0, _ = settle(c0.__class__(*c0.state_tuple(), step=0))
        checkers.append(_Checker(sim, c0))
        key = (c0, frozenset())
        if key not in parents:
            parents[key] = (None, None, idx)
            frontier.append((key, 0))
    transitions = 0
    deepest = 0
    while frontier:
        (cfg, delivered), level = frontier.popleft()
        deepest = max(deepest, level)
        idx = _root(parents, (cfg, delivered))
        checker = checkers[idx]
        enabled = sim.enabled(cfg)
        if not enabled:
            bad = checker.terminal(cfg, delivered)
            if bad:
                return _found(sim, initials, parents, (cfg, delivered), None, bad, checker, minimize, context,
                              len(parents), transitions, len(initials), deepest)
            continue
        if level >= depth:
            continue
        for sel in _selections(enabled):
            nxt, effects, _ = sim.step(cfg, sel)
            transitions += 1
            bad, dlv = checker.check(cfg, nxt, effects, delivered)
            if bad:
                return _found(sim, initials, parents, (cfg, delivered), sel, bad, checker, minimize, context,
                              len(parents), transitions, len(initials), deepest)
            key = (nxt, dlv)
            if key not in parents:
                parents[key] = ((cfg, delivered), sel, idx)
                if len(parents) > state_budget:
                    raise StateBudgetExceeded(f"more than {state_budget} states visited")
                frontier.append((key, level + 1))
    return ExploreResult(Verdict("pass", detail=f"no violation up to depth {depth}"), len(parents), transitions,
                         len(initials), deepest, (), None)


def _root(parents, key):
    return parents[key][2]


def _found(sim, initials, parents, key, last_sel, bad, checker, minimize, context, states, transitions,
           n_initials, deepest):
    path = []
    cur = key
    while parents[cur][0] is not None:
        prev, sel, _ = parents[cur]
        path.append(tuple(sel))
        cur = prev
    path.reverse()
    if last_sel is not None:
        path.append(tuple(last_sel))
    idx = parents[key][2]
    c0 = initials[idx]
    if minimize:
        path = minimize_witness(sim, c0, path)
    kind, detail = replay_violation(sim, c0, path) or bad
    witness = {**(context or {}), "step": len(path), "initial": idx,
               "path": [[i.to_json() for i in sel] for sel in path]}
    verdict = Verdict("violation", kind, detail, witness)
    return ExploreResult(verdict, states, transitions, n_initials, deepest, tuple(path), idx)


def replay_violation(sim: Simulator, c0: Configuration, path: Sequence) -> tuple | None:
    """Replay ``path`` from ``c0``; the first step-law violation, or ``None``.

    Raises :class:`StaleGuard` when a selection is not enabled on the way.
    """
    cfg, _ = settle(c0.__class__(*c0.state_tuple(), step=0))
    checker = _Checker(sim, cfg)
    delivered = frozenset()
    for sel in path:
        nxt, effects, _ = sim.step(cfg, sel)
        bad, delivered = checker.check(cfg, nxt, effects, delivered)
        if bad:
            return bad
        cfg = nxt
    if not sim.enabled(cfg):
        return checker.terminal(cfg, delivered)
    return None


def minimize_witness(sim: Simulator, c0: Configuration, path: Sequence) -> list:
    """Greedy best-effort shortening: drop whole steps, then single actions,
    keeping every candidate that still replays to a violation."""
    path = [tuple(s) for s in path]

    def fails(candidate):
        try:
            return replay_violation(sim, c0, candidate) is not None
        except StaleGuard:
            return False

    if not fails(path):
        return path
    changed = True
    while changed:
        changed = False
        for j in range(len(path) - 1, -1, -1):
            cand = path[:j] + path[j + 1:]
            if fails(cand):
                path, changed = cand, True
                continue
            if len(path[j]) > 1:
                for k in range(len(path[j])):
                    sel = path[j][:k] + path[j][k + 1:]
                    cand = path[:j] + [sel] + path[j + 1:]
                    if fails(cand):
                        path, changed = cand, True
                        break
    # trim anything after the first violating step
    for j in range(1, len(path) + 1):
        if fails(path[:j]):
            return path[:j]
    return path


def selection_from_json(items) -> tuple:
    return tuple(RuleInstance.from_json(i) for i in items)
