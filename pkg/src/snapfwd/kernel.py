"""Shared-memory state-model execution.

A step has three phases: every processor evaluates its guards, a daemon picks
some enabled processors, and each picked processor runs one of its enabled
actions. All statements of a step read the pre-step configuration
(simultaneous semantics), so the order in which chosen actions are applied
never matters.

The routing layer has priority: a processor with an enabled routing action
exposes no forwarding action until its routing table is locally consistent.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, NamedTuple, Sequence

from . import routing
from .topology import Topology


class StaleGuard(RuntimeError):
    """A selected rule instance is not enabled in the configuration it is applied to."""


class Unclassifiable(RuntimeError):
    """A reachable configuration falls outside the caterpillar taxonomy."""


def both_invalid(a: str, b: str) -> bool:
    """True when neither ghost id names a generated message."""
    return not a.startswith("v") and not b.startswith("v")


class Send(NamedTuple):
    """A message waiting in the higher layer of its source."""

    payload: str
    dest: int
    release: int = 0  # first step at which the higher layer offers it


@dataclass(frozen=True)
class Configuration:
    """Global state: the product of all local states.

    Per-processor fields are tuples indexed by processor id. ``bufs`` and
    ``queues`` have a protocol-specific layout (see ``ssmfp1`` / ``ssmfp2``).
    ``step`` does not take part in equality or hashing, so configurations
    reached at different times compare equal when their states agree.
    """

    tables: tuple
    bufs: tuple
    queues: tuple
    request: tuple
    pending: tuple
    sent: tuple
    step: int = field(default=0, compare=False)

    def state_tuple(self):
        return (self.tables, self.bufs, self.queues, self.request, self.pending, self.sent)

    def digest(self) -> str:
        """64-bit hex digest of the state, stable across runs and platforms."""
        return hashlib.blake2b(repr(self.state_tuple()).encode(), digest_size=8).hexdigest()


_LAYER_ORDER = {"routing": 0, "forwarding": 1}


class RuleInstance(NamedTuple):
    proc: int
    layer: str  # "routing" | "forwarding"
    rule: str  # "RT", or "R1".."R18"
    params: tuple = ()

    def sort_key(self):
        return (_LAYER_ORDER[self.layer], int(self.rule[1:]) if self.rule[1:].isdigit() else 0, self.params)

    def to_json(self):
        return [self.proc, self.layer, self.rule, list(self.params)]

    @classmethod
    def from_json(cls, item) -> "RuleInstance":
        proc, layer, rule, params = item
        return cls(int(proc), layer, rule, tuple(params))


ROUTING_RULE = "RT"


class StepRecord(NamedTuple):
    step: int
    chosen: tuple  # RuleInstance, sorted by processor
    effects: tuple  # (kind, ghost, proc, detail) tuples
    digest: str
    enabled_before: tuple  # processors enabled in the pre-state
    enabled_after: tuple  # processors enabled in the post-state

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "chosen": [i.to_json() for i in self.chosen],
            "effects": [list(e) for e in self.effects],
            "hash": self.digest,
            "enabled_before": list(self.enabled_before),
            "enabled_after": list(self.enabled_after),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StepRecord":
        return cls(
            obj["step"],
            tuple(RuleInstance.from_json(i) for i in obj["chosen"]),
            tuple(tuple(e) for e in obj["effects"]),
            obj["hash"],
            tuple(obj["enabled_before"]),
            tuple(obj["enabled_after"]),
        )


class Simulator:
    """Guard evaluation and atomic step application for one protocol.

    ``routing_mode="scripted"`` hides routing actions from daemons so that a
    scripted run can keep corrupted tables in place; an explicit routing
    instance in a selection is still applied when its guard holds.
    """

    def __init__(self, topology: Topology, protocol, routing_mode: str = "active"):
        if routing_mode not in ("active", "scripted"):
            raise ValueError(f"unknown routing mode {routing_mode!r}")
        self.topology = topology
        self.protocol = protocol
        self.routing_mode = routing_mode

    def enabled_at(self, cfg: Configuration, p: int) -> list[RuleInstance]:
        if routing.is_stale(self.topology, cfg.tables, p):
            if self.routing_mode == "active":
                return [RuleInstance(p, "routing", ROUTING_RULE)]
        return self.protocol.enabled(cfg, p)

    def enabled(self, cfg: Configuration) -> dict[int, list[RuleInstance]]:
        """Enabled instances per processor; processors with none are omitted."""
        out = {}
        for p in range(self.topology.n):
            inst = self.enabled_at(cfg, p)
            if inst:
                out[p] = inst
        return out

    def enabled_set(self, cfg: Configuration) -> set[RuleInstance]:
        return {i for insts in self.enabled(cfg).values() for i in insts}

    def _guard_holds(self, cfg, inst) -> bool:
        if inst.layer == "routing":
            return inst.rule == ROUTING_RULE and routing.is_stale(self.topology, cfg.tables, inst.proc)
        if routing.is_stale(self.topology, cfg.tables, inst.proc) and self.routing_mode == "active":
            return False
        return inst in self.protocol.enabled(cfg, inst.proc)

    def step(self, cfg: Configuration, selection: Iterable[RuleInstance]):
        """Apply ``selection`` atomically; returns ``(next_config, effects, changed)``.

        ``changed`` is the set of processors whose local state changed,
        including request bits raised by the higher layer after the step.
        """
        selection = sorted(selection, key=lambda i: i.proc)
        procs = [i.proc for i in selection]
        if len(set(procs)) != len(procs):
            raise ValueError("at most one rule instance per processor and step")
        updates = []
        effects = []
        for inst in selection:
            if not self._guard_holds(cfg, inst):
                raise StaleGuard(f"{inst} is not enabled at step {cfg.step}")
            if inst.layer == "routing":
                upd = {"tables": routing.recompute_row(self.topology, cfg.tables, inst.proc)}
                eff = ()
            else:
                upd, eff = self.protocol.apply(cfg, inst)
            updates.append((inst.proc, upd))
            effects.extend(eff)
        fields = {}
        for p, upd in updates:
            for name, value in upd.items():
                if name not in fields:
                    fields[name] = list(getattr(cfg, name))
                fields[name][p] = value
        nxt = replace(cfg, step=cfg.step + 1, **{k: tuple(v) for k, v in fields.items()})
        nxt, raised = settle(nxt)
        return nxt, tuple(effects), set(procs) | raised


def settle(cfg: Configuration) -> tuple[Configuration, set[int]]:
    """Higher-layer handshake on request bits.

    A processor whose next pending send is released raises its request bit;
    a raised bit with no released pending send (only possible in a corrupted
    initial configuration) is cleared, because the message it would refer to
    does not exist.
    """
    changed = set()
    req = list(cfg.request)
    for p, pend in enumerate(cfg.pending):
        waiting = bool(pend) and pend[0].release <= cfg.step
        if req[p] != waiting:
            req[p] = waiting
            changed.add(p)
    if not changed:
        return cfg, changed
    return replace(cfg, request=tuple(req)), changed


# -- daemons ---------------------------------------------------------------


def _lowest(insts):
    return min(insts, key=RuleInstance.sort_key)


class _Lowest:
    def pick(self, insts):
        return _lowest(insts)


ACTION_CHOICES = ("least-recent", "lowest")


def _action_picker(actions: str):
    if actions == "least-recent":
        return _LeastRecent()
    if actions == "lowest":
        return _Lowest()
    raise ValueError(f"action choice must be one of {ACTION_CHOICES}")


class _LeastRecent:
    """Per-processor action choice: the enabled instance executed longest ago.

    Fairness among processors is not enough: a processor that always runs its
    lowest-numbered rule can postpone another of its rules forever (e.g. keep
    generating instead of consuming). Least-recently-executed selection runs
    every continuously enabled instance within as many activations of its
    processor as it has instances.
    """

    def __init__(self):
        self.clock = 0
        self.last: dict = {}

    def pick(self, insts):
        self.clock += 1
        best = min(insts, key=lambda i: (self.last.get(i, -1), i.sort_key()))
        self.last[best] = self.clock
        return best


class WeaklyFairDaemon:
    """Randomized distributed daemon with a constructive fairness witness.

    Each enabled processor is picked with probability one half; a processor
    left unchosen while enabled for ``bound - 1`` consecutive steps is forced
    in, so none stays enabled and unchosen for ``bound`` steps. ``actions``
    picks among a chosen processor's enabled instances.
    """

    kind = "weakly-fair"

    def __init__(self, seed: int = 0, bound: int = 4, actions: str = "least-recent"):
        if bound < 1:
            raise ValueError("fairness bound must be positive")
        self.rng = random.Random(seed)
        self.bound = bound
        self.streak: dict[int, int] = {}
        self.actions = _action_picker(actions)

    def select(self, enabled: dict[int, list[RuleInstance]], cfg=None) -> list[RuleInstance]:
        procs = sorted(enabled)
        chosen = [p for p in procs if self.rng.random() < 0.5 or self.streak.get(p, 0) >= self.bound - 1]
        if not chosen:
            chosen = [self.rng.choice(procs)]
        chosen_set = set(chosen)
        self.streak = {p: 0 if p in chosen_set else self.streak.get(p, 0) + 1 for p in procs}
        return [self.actions.pick(enabled[p]) for p in chosen]


class SynchronousDaemon:
    """Every enabled processor acts at every step."""

    kind = "synchronous"

    def __init__(self, actions: str = "least-recent"):
        self.actions = _action_picker(actions)

    def select(self, enabled, cfg=None):
        return [self.actions.pick(enabled[p]) for p in sorted(enabled)]


class AdversarialDaemon:
    """Unfair central daemon: keeps activating the same processor while it can.

    It only switches when the current favourite is disabled, so any other
    processor may be starved for as long as the favourite stays enabled.
    """

    kind = "adversarial-unfair"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)
        self.favourite = None

    def select(self, enabled, cfg=None):
        if self.favourite not in enabled:
            self.favourite = self.rng.choice(sorted(enabled))
        return [_lowest(enabled[self.favourite])]


class ScriptedDaemon:
    """Replays a fixed list of selections; an exhausted script stops the run."""

    kind = "scripted"

    def __init__(self, script: Sequence[Sequence[RuleInstance]]):
        self.script = [list(s) for s in script]
        self.pos = 0

    def select(self, enabled, cfg=None):
        if self.pos >= len(self.script):
            return []
        sel = self.script[self.pos]
        self.pos += 1
        return sel


# -- runs ------------------------------------------------------------------


class Trace(NamedTuple):
    records: list  # StepRecord, empty when the run was not asked to keep them
    initial: Configuration
    final: Configuration
    status: str  # "terminal" | "stopped" | "budget-exceeded"
    steps: int
    rounds: int

    @property
    def budget_exceeded(self) -> bool:
        return self.status == "budget-exceeded"


class RoundTracker:
    """Online round counting.

    A round ends once every processor enabled at its start has executed an
    action or been neutralized (enabled before a step, disabled after it,
    without acting).
    """

    def __init__(self, initially_enabled: Iterable[int]):
        self.pending = set(initially_enabled)
        self.completed = 0
        self.in_progress = False

    @property
    def current(self) -> int:
        """1-based index of the round the next step belongs to."""
        return self.completed + 1

    def update(self, chosen: Iterable[int], enabled_after: Iterable[int]) -> int:
        """Account for one step; returns the round index that step belonged to."""
        idx = self.completed + 1
        after = set(enabled_after)
        self.pending.difference_update(chosen)
        self.pending.intersection_update(after)
        self.in_progress = True
        if not self.pending:
            self.completed += 1
            self.in_progress = False
            self.pending = after
        return idx

    @property
    def total(self) -> int:
        return self.completed + (1 if self.in_progress else 0)


def run(
    sim: Simulator,
    c0: Configuration,
    daemon,
    *,
    max_steps: int = 100_000,
    max_rounds: int | None = None,
    stop: Callable[[Configuration], bool] | None = None,
    observers: Sequence = (),
    keep: bool = True,
) -> Trace:
    """Execute until a terminal configuration, ``stop`` or a budget.

    Observers receive ``on_step(record, pre, post, round_index)`` after every
    step. Enabled sets are maintained incrementally: only processors within
    one hop of a changed processor can see a guard change.
    """
    topo = sim.topology
    cfg, _ = settle(c0)
    enabled = sim.enabled(cfg)
    tracker = RoundTracker(enabled)
    records = []
    status = "terminal"
    while True:
        if not enabled:
            status = "terminal"
            break
        if stop is not None and stop(cfg):
            status = "stopped"
            break
        if cfg.step - c0.step >= max_steps or (max_rounds is not None and tracker.completed >= max_rounds):
            status = "budget-exceeded"
            break
        selection = daemon.select(enabled, cfg)
        if not selection:
            status = "stopped"
            break
        before = tuple(sorted(enabled))
        nxt, effects, changed = sim.step(cfg, selection)
        touched = set(changed)
        for p in changed:
            touched.update(topo.neighbors[p])
        enabled = dict(enabled)
        for p in touched:
            insts = sim.enabled_at(nxt, p)
            if insts:
                enabled[p] = insts
            else:
                enabled.pop(p, None)
        after = tuple(sorted(enabled))
        chosen = tuple(sorted(selection, key=lambda i: i.proc))
        rec = StepRecord(nxt.step, chosen, effects, nxt.digest(), before, after)
        ridx = tracker.update((i.proc for i in chosen), after)
        for obs in observers:
            obs.on_step(rec, cfg, nxt, ridx)
        if keep:
            records.append(rec)
        cfg = nxt
    return Trace(records, c0, cfg, status, cfg.step - c0.step, tracker.total)


def rounds(records: Sequence[StepRecord]) -> int:
    """Number of rounds spanned by a trace (a trailing partial round counts)."""
    return len(set(round_indices(records)))


def round_indices(records: Sequence[StepRecord]) -> list[int]:
    """Round index (1-based) of every step of a trace."""
    if not records:
        return []
    tracker = RoundTracker(records[0].enabled_before)
    return [tracker.update((i.proc for i in r.chosen), r.enabled_after) for r in records]
