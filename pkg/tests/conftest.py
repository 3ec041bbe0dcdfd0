import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from snapfwd import topology  # noqa: E402
from snapfwd.kernel import RuleInstance, Simulator, run, settle  # noqa: E402
from snapfwd.workload import InitialCorruption, Workload, make_protocol, materialize  # noqa: E402


class Recorder:
    """Observer keeping every record and post-step configuration."""

    def __init__(self):
        self.steps = []

    def on_step(self, rec, pre, post, round_index):
        self.steps.append((rec, pre, post, round_index))

    @property
    def configs(self):
        return [post for _, _, post, _ in self.steps]


def fw(p, rule, *params):
    return RuleInstance(p, "forwarding", rule, tuple(params))


def rt(p):
    return RuleInstance(p, "routing", "RT")


def setup(protocol, topo, sends=(), routing_mode="active", **corruption):
    """Protocol, simulator and initial configuration with request bits raised."""
    proto = make_protocol(protocol, topo)
    c0 = materialize(topo, proto, Workload(list(sends)), InitialCorruption(**corruption))
    return proto, Simulator(topo, proto, routing_mode), settle(c0)[0]


def execute(sim, c0, daemon, **kw):
    rec = Recorder()
    trace = run(sim, c0, daemon, observers=[rec], **kw)
    return trace, rec


@pytest.fixture
def fig():
    return topology.figure_network()


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
