"""Scenario files: YAML documents validated against ``scenario.schema.json``.

A scenario plus a seed fully determines a run. The seed drives the daemon,
the initial corruption and any randomly generated topology or workload;
explicit values in the file win over seeded ones.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from . import topology as topo_mod
from .kernel import (AdversarialDaemon, RuleInstance, ScriptedDaemon, Simulator,
                     SynchronousDaemon, WeaklyFairDaemon)
from .topology import Topology, TopologyError
from .workload import InitialCorruption, Workload, WorkloadError, make_protocol, materialize

DEFAULT_BUDGETS = {
    "max_steps": 100_000,
    "max_rounds": None,
    "delivery_rounds": "auto",
    "invalid_bound": "auto",
    "depth": 30,
    "state_budget": 2_000_000,
}


class ScenarioError(ValueError):
    """Malformed scenario; ``str()`` carries ``file:line: message`` diagnostics."""


def schema() -> dict:
    return json.loads(resources.files("snapfwd").joinpath("scenario.schema.json").read_text())


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package (``fig4``, ``empty``, ...)."""
    path = resources.files("snapfwd").joinpath("scenarios", f"{name}.yaml")
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return Path(str(path))


def _line_of(node, path) -> int | None:
    """1-based line of the YAML node at ``path`` (as deep as it resolves)."""
    if node is None:
        return None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == str(key):
                    node = v
                    break
            else:
                break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return node.start_mark.line + 1


def _key_line(node, key) -> int | None:
    for k, _ in (node.value if isinstance(node, yaml.MappingNode) else ()):
        if k.value == key:
            return k.start_mark.line + 1
    return None


def _descend(node, path):
    for key in path:
        if isinstance(node, yaml.MappingNode):
            node = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            return None
        if node is None:
            return None
    return node


@dataclass
class Scenario:
    data: dict
    source: str = "<scenario>"
    node: object = None  # composed YAML tree, for line numbers

    # -- loading ------------------------------------------------------------

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"{path}: cannot read scenario: {exc.strerror}") from exc
        return cls.parse(text, str(path))

    @classmethod
    def parse(cls, text: str, source: str = "<scenario>") -> "Scenario":
        try:
            node = yaml.compose(text)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark else source
            raise ScenarioError(f"{where}: not valid YAML: {getattr(exc, 'problem', exc)}") from exc
        if not isinstance(data, dict):
            raise ScenarioError(f"{source}:1: a scenario must be a mapping")
        scen = cls(data, source, node)
        scen.validate()
        return scen

    @classmethod
    def from_dict(cls, data: dict, source: str = "<dict>") -> "Scenario":
        scen = cls(copy.deepcopy(data), source)
        scen.validate()
        return scen

    def validate(self) -> None:
        validator = jsonschema.Draft202012Validator(schema())
        errors = sorted(validator.iter_errors(self.data), key=lambda e: (list(map(str, e.path)), e.message))
        if errors:
            raise ScenarioError("\n".join(self._diagnose(e) for e in errors))
        try:
            topo = self.topology(self.seed)
            self.protocol(topo)
            self.workload(topo, self.seed).validate(topo)
            self.initial(self.seed)
        except (TopologyError, WorkloadError, ValueError, KeyError, TypeError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"{self.source}:{self._section_line(exc)}: {exc}") from exc

    def _diagnose(self, err) -> str:
        path = list(err.absolute_path)
        line = _line_of(self.node, path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
            parent = _descend(self.node, path)
            for key in extra:
                line = _key_line(parent, key) or line
            where = "/".join(map(str, path)) or "top level"
            msg = f"unknown key(s) {', '.join(map(repr, extra))} in {where}"
        else:
            where = "/".join(map(str, path)) or "top level"
            msg = f"{where}: {err.message}"
        return f"{self.source}:{line or 1}: {msg}"

    def _section_line(self, exc) -> int:
        text = str(exc)
        for section in ("topology", "workload", "corruption", "daemon", "protocol", "mutants"):
            if section in text:
                return _key_line(self.node, section) or 1
        if isinstance(exc, TopologyError):
            return _key_line(self.node, "topology") or 1
        if isinstance(exc, WorkloadError):
            return _key_line(self.node, "workload") or 1
        return 1

    # -- fields ---------------------------------------------------------------

    @property
    def name(self) -> str:
        return self.data.get("name") or Path(self.source).stem.strip("<>") or "scenario"

    @property
    def seed(self) -> int:
        return self.data.get("seed", 0)

    @property
    def protocol_name(self) -> str:
        return self.data["protocol"]

    @property
    def budgets(self) -> dict:
        return {**DEFAULT_BUDGETS, **self.data.get("budgets", {})}

    @property
    def monitors(self) -> bool:
        return self.data.get("monitors", True)

    @property
    def family(self) -> list:
        return self.data.get("explore", {}).get(
            "family", [{"routing": "destination", "injections": "none"}, {"routing": "correct", "injections": "single"}])

    def with_overrides(self, *, protocol: str | None = None, mutants=(), max_steps: int | None = None,
                       max_rounds: int | None = None, depth: int | None = None) -> "Scenario":
        data = copy.deepcopy(self.data)
        if protocol:
            data["protocol"] = protocol
            if not mutants:
                data.pop("mutants", None)
        if mutants:
            data["mutants"] = sorted(set(data.get("mutants", [])) | set(mutants))
        budgets = data.setdefault("budgets", {})
        for key, value in (("max_steps", max_steps), ("max_rounds", max_rounds), ("depth", depth)):
            if value is not None:
                budgets[key] = value
        scen = Scenario(data, self.source, self.node)
        scen.validate()
        return scen

    # -- construction ---------------------------------------------------------

    def topology(self, seed: int) -> Topology:
        spec = self.data["topology"]
        if "one_of" in spec:
            options = spec["one_of"]
            spec = options[seed % len(options)]
        return _build_topology(spec, seed)

    def protocol(self, topo: Topology):
        return make_protocol(self.protocol_name, topo, self.data.get("mutants", ()))

    def workload(self, topo: Topology, seed: int) -> Workload:
        w = self.data.get("workload", {})
        kw = {k: w[k] for k in ("arrival", "k", "allow_collisions") if k in w}
        sends = [(s, str(m), d) for s, m, d in w.get("sends", [])]
        if "random" in w:
            sends += Workload.random(topo, w["random"]["count"], seed).sends
        if "saturation" in w:
            sends += Workload.saturation(topo, w["saturation"]["per_source"], seed).sends
        return Workload(sends, **kw)

    def corruption(self, topo: Topology, seed: int) -> InitialCorruption:
        c = dict(self.data.get("corruption", {}))
        count = c.pop("inject_count", 0)
        cap = topo.n * (topo.diameter + 1)
        if count == "max":
            count = cap
        elif count == "random":
            count = random.Random(seed * 7919 + 1).randint(0, cap)
        return InitialCorruption(seed=seed, inject_count=count, **c)

    def routing_mode(self) -> str:
        return self.data.get("routing", "active")

    def initial(self, seed: int):
        """``(topology, protocol, simulator, initial configuration)`` for ``seed``."""
        topo = self.topology(seed)
        proto = self.protocol(topo)
        c0 = materialize(topo, proto, self.workload(topo, seed), self.corruption(topo, seed))
        return topo, proto, Simulator(topo, proto, self.routing_mode()), c0

    def daemon(self, topo: Topology, seed: int):
        d = self.data.get("daemon", {})
        kind = d.get("kind", "weakly-fair")
        dseed = d.get("seed", seed)
        if kind == "weakly-fair":
            return WeaklyFairDaemon(dseed, self.fairness_bound(topo), d.get("actions", "least-recent"))
        if kind == "synchronous":
            return SynchronousDaemon(d.get("actions", "least-recent"))
        if kind == "adversarial":
            return AdversarialDaemon(dseed)
        return ScriptedDaemon([[_instance(item) for item in sel] for sel in d.get("script", [])])

    def fairness_bound(self, topo: Topology) -> int | None:
        d = self.data.get("daemon", {})
        if d.get("kind", "weakly-fair") != "weakly-fair":
            return None
        return d.get("fairness_bound", 2 * topo.n)

    def audit_options(self, topo: Topology) -> dict:
        b = self.budgets
        return {
            "fairness_bound": self.fairness_bound(topo),
            "delivery_budget": b["delivery_rounds"],
            "invalid_bound": b["invalid_bound"],
            "monitors": self.monitors,
        }


def _instance(item) -> RuleInstance:
    proc, rule = item[0], item[1]
    params = tuple(item[2]) if len(item) > 2 else ()
    return RuleInstance(proc, "routing" if rule == "RT" else "forwarding", rule, params)


def _build_topology(spec: dict, seed: int) -> Topology:
    if "edges" in spec:
        return Topology.build(spec["edges"], n=spec.get("n"))
    if "random" in spec:
        r = spec["random"]
        if r["n_min"] > r["n_max"]:
            raise TopologyError("topology random: n_min exceeds n_max")
        rng = random.Random(seed * 104729 + 17)
        n = rng.randint(r["n_min"], r["n_max"])
        return topo_mod.random_connected(n, rng.randrange(2**32), r.get("extra_edge_p", 0.3))
    kind = spec["kind"]
    if kind == "figure":
        return topo_mod.figure_network()
    if "n" not in spec:
        raise TopologyError(f"topology kind {kind!r} needs n")
    return getattr(topo_mod, kind)(spec["n"])
