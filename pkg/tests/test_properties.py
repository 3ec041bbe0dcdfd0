"""End-to-end properties over randomly drawn networks, corruptions and daemons."""
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from snapfwd import routing, topology
from snapfwd.kernel import Simulator, SynchronousDaemon, WeaklyFairDaemon, run
from snapfwd.verifier import Auditor, audit, invalid_delivery_bound
from snapfwd.workload import InitialCorruption, Workload, make_protocol, materialize

PROPS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def instances(draw):
    protocol = draw(st.sampled_from(["ssmfp1", "ssmfp2"]))
    n = draw(st.integers(2, 6))
    topo = topology.random_connected(n, draw(st.integers(0, 2**16)), draw(st.floats(0, 0.6)))
    proto = make_protocol(protocol, topo)
    seed = draw(st.integers(0, 2**16))
    cap = topo.n * (topo.diameter + 1)
    ic = InitialCorruption(seed=seed, routing_severity=draw(st.floats(0, 1)),
                           inject_count=draw(st.integers(0, min(cap, proto.buffer_count()))),
                           scramble=draw(st.booleans()), payload_collisions=draw(st.booleans()))
    workload = Workload.random(topo, draw(st.integers(0, 6)), seed, arrival=draw(st.sampled_from(
        ["all-at-start", "every-k-steps"])), k=draw(st.integers(1, 5)))
    c0 = materialize(topo, proto, workload, ic)
    return topo, proto, c0, seed


def audited(topo, proto, c0, daemon, bound=None):
    sim = Simulator(topo, proto)
    auditor = Auditor(sim, c0, fairness_bound=bound, invalid_bound="auto")
    trace = run(sim, c0, daemon, observers=[auditor], max_steps=50_000)
    return sim, auditor.finish(trace.status, trace.steps, trace.rounds), trace


@PROPS
@given(instances(), st.integers(1, 8))
def test_exactly_once_under_weakly_fair_daemons(inst, bound):
    topo, proto, c0, seed = inst
    _, report, trace = audited(topo, proto, c0, WeaklyFairDaemon(seed, bound), bound)
    assert trace.status == "terminal"
    assert report.verdict.ok, report.verdict
    m = report.metrics
    assert m["valid_delivered"] == m["valid_generated"] == sum(len(q) for q in c0.pending)
    assert m["max_invalid_per_destination"] <= invalid_delivery_bound(proto, topo)


@PROPS
@given(instances())
def test_exactly_once_under_the_synchronous_daemon(inst):
    topo, proto, c0, _ = inst
    _, report, trace = audited(topo, proto, c0, SynchronousDaemon())
    assert trace.status == "terminal" and report.verdict.ok, report.verdict


@settings(max_examples=60, deadline=None)
@given(instances())
def test_routing_silence_and_final_tables(inst):
    topo, proto, c0, seed = inst
    _, report, trace = audited(topo, proto, c0, WeaklyFairDaemon(seed, 2 * topo.n))
    assert trace.final.tables == routing.correct_tables(topo)
    assert report.metrics["routing_silence_round"] <= topo.diameter + 1


@settings(max_examples=40, deadline=None)
@given(instances())
def test_replay_reproduces_the_inline_audit(inst):
    topo, proto, c0, seed = inst
    sim = Simulator(topo, proto)
    auditor = Auditor(sim, c0)
    trace = run(sim, c0, WeaklyFairDaemon(seed), observers=[auditor], max_steps=50_000)
    inline = auditor.finish(trace.status, trace.steps, trace.rounds)
    again = audit(sim, c0, trace.records, trace.status)
    assert again.metrics == inline.metrics
    assert [r.digest for r in run(sim, c0, WeaklyFairDaemon(seed), max_steps=50_000).records] == \
        [r.digest for r in trace.records]
