from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snapfwd import routing, topology
from snapfwd.kernel import Send, Simulator
from snapfwd.ssmfp1 import Slot1
from snapfwd.workload import (InitialCorruption, Workload, WorkloadError, make_protocol, materialize,
                              request_handshake)

A, B, C, D, E = range(5)

# Digests of one fully corrupted 3-node configuration, frozen from a reference run.
FROZEN_DIGESTS = {"ssmfp1": "56ffc82d17fba364", "ssmfp2": "2d865f1a0b8b400a"}


def test_zero_corruption_zero_messages_is_terminal(fig):
    for name in ("ssmfp1", "ssmfp2"):
        proto = make_protocol(name, fig)
        c0 = materialize(fig, proto)
        assert c0.tables == routing.correct_tables(fig)
        assert all(s is None for row in c0.bufs for s in row)
        assert Simulator(fig, proto).enabled(c0) == {}


def test_fig4_initial_state(fig):
    proto = make_protocol("ssmfp1", fig)
    c0 = materialize(fig, proto, Workload([(C, "m", B), (C, "m'", B)]), InitialCorruption(
        routing_entries=[(C, B, 1, A)],
        inject=[{"node": B, "dest": B, "buffer": "R", "payload": "m'", "last": C, "color": 0}]))
    assert c0.bufs[B][B] == Slot1("m'", C, 0, "i0")
    assert routing.next_hop(c0.tables, A, B) == C and routing.next_hop(c0.tables, C, B) == A
    assert [s for s in c0.pending[C]] == [Send("m", B), Send("m'", B)]


@pytest.mark.parametrize("name", ["ssmfp1", "ssmfp2"])
def test_full_corruption_is_reproducible(name):
    t = topology.path(3)
    build = lambda: materialize(t, make_protocol(name, t), Workload([(0, "m", 2)]),  # noqa: E731
                                InitialCorruption(seed=42, routing_severity=1.0, inject_count=3, scramble=True))
    assert build() == build()
    assert build().digest() == FROZEN_DIGESTS[name]


@pytest.mark.parametrize("sends, msg", [
    ([(0, "m", 0)], "self-addressed"),
    ([(0, "m", 7)], "outside"),
    ([(0, "m", 1), (1, "m", 0)], "used twice"),
])
def test_workload_validation(fig, sends, msg):
    with pytest.raises(WorkloadError, match=msg):
        Workload(sends).validate(fig)


def test_collisions_allowed_on_request(fig):
    Workload([(0, "m", 1), (1, "m", 0)], allow_collisions=True).validate(fig)


def test_every_k_steps_release(fig):
    w = Workload([(0, "a", 1), (0, "b", 1), (2, "c", 1)], arrival="every-k-steps", k=5)
    q = w.pending(fig)
    assert [s.release for s in q[0]] == [0, 5]
    assert [s.release for s in q[2]] == [0]


def test_random_and_saturation_workloads_are_seeded(fig):
    assert Workload.random(fig, 6, 3) == Workload.random(fig, 6, 3)
    sat = Workload.saturation(fig, 2, 1)
    assert len(sat.sends) == 10
    sat.validate(fig)


def test_injected_values_lie_in_their_domains(fig):
    for name in ("ssmfp1", "ssmfp2"):
        proto = make_protocol(name, fig)
        c0 = materialize(fig, proto, corruption=InitialCorruption(seed=5, inject_count=proto.buffer_count()))
        for entry in proto.slots(c0):
            p, slot = entry[0], entry[-1]
            proto.validate_slot(p, entry[2] if name == "ssmfp1" else entry[1], slot)
            assert slot.ghost.startswith("i")


def test_too_many_injections(fig):
    proto = make_protocol("ssmfp2", fig)
    with pytest.raises(WorkloadError, match="cannot inject"):
        materialize(fig, proto, corruption=InitialCorruption(inject_count=proto.buffer_count() + 1))


def test_out_of_domain_injection_rejected(fig):
    proto = make_protocol("ssmfp1", fig)
    with pytest.raises(ValueError):
        materialize(fig, proto, corruption=InitialCorruption(
            inject=[{"node": A, "dest": B, "buffer": "R", "payload": "x", "last": E, "color": 0}]))
    with pytest.raises(WorkloadError, match="unknown"):
        materialize(fig, proto, corruption=InitialCorruption(
            inject=[{"node": A, "dest": B, "buffer": "R", "payload": "x", "last": C, "color": 0, "hue": 1}]))


def test_handshake(fig):
    proto = make_protocol("ssmfp1", fig)
    c0 = materialize(fig, proto, Workload([(C, "m", B)]))
    assert request_handshake(c0, A) == c0
    raised = request_handshake(c0, C)
    assert raised.request[C] is True
    assert request_handshake(raised, C) == raised
    stale = replace(c0, request=(True,) + c0.request[1:])
    assert request_handshake(stale, A).request[A] is False


def test_unknown_protocol(fig):
    with pytest.raises(ValueError):
        make_protocol("ssmfp3", fig)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["ssmfp1", "ssmfp2"]), st.integers(0, 10_000), st.floats(0, 1), st.booleans())
def test_materialize_is_a_function_of_its_seed(name, seed, severity, scramble):
    t = topology.random_connected(2 + seed % 5, seed)
    proto = make_protocol(name, t)
    ic = InitialCorruption(seed=seed, routing_severity=severity, inject_count=seed % (proto.buffer_count() + 1),
                           scramble=scramble)
    a = materialize(t, proto, Workload.random(t, 3, seed), ic)
    b = materialize(t, proto, Workload.random(t, 3, seed), ic)
    assert a.digest() == b.digest()
    routing.validate_tables(t, a.tables)
    assert sum(1 for _ in proto.slots(a)) == ic.inject_count
