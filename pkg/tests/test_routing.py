import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bfs_distances, bfs_next_hops
from snapfwd import routing, topology
from snapfwd.kernel import WeaklyFairDaemon, run
from snapfwd.workload import make_protocol
from snapfwd.kernel import Configuration, Simulator

A, B, C, D, E = range(5)


def bare(topo, tables):
    n = topo.n
    return Configuration(tables, tuple((None,) * (2 * n) for _ in range(n)),
                         make_protocol("ssmfp1", topo).default_queues(), (False,) * n, ((),) * n, (0,) * n)


def routing_run(topo, tables, seed=0, bound=None):
    sim = Simulator(topo, make_protocol("ssmfp1", topo))
    return run(sim, bare(topo, tables), WeaklyFairDaemon(seed, bound or 2 * topo.n), max_steps=10_000)


def test_correct_tables_are_silent(fig):
    t = routing.correct_tables(fig)
    assert routing.silent(fig, t)
    assert all(routing.routing_enabled(fig, t, p) == [] for p in range(fig.n))


def test_correct_tables_match_bfs(fig):
    t = routing.correct_tables(fig)
    dist = bfs_distances(5, fig.edges)
    hops = bfs_next_hops(5, fig.edges)
    assert [[e[0] for e in row] for row in t] == dist
    assert [[e[1] for e in row] for row in t] == hops


def test_next_hop_a_to_b_is_c(fig):
    assert routing.next_hop(routing.correct_tables(fig), A, B) == C


def test_self_entry_points_at_smallest_neighbor(fig):
    t = routing.correct_tables(fig)
    assert [routing.next_hop(t, p, p) for p in range(5)] == [C, C, A, C, D]


def test_two_node_overestimate_is_repaired():
    topo = topology.path(2)
    t = routing.correct_tables(topo)
    t = ((t[0][0], (5, 1)), t[1])
    assert routing.routing_enabled(topo, t, 0) != []
    assert routing.routing_enabled(topo, t, 1) == []
    row = routing.recompute_row(topo, t, 0)
    assert row[1] == (1, 1)


def test_all_zero_estimates_converge_within_n_rounds(fig):
    tables = tuple(tuple((0, fig.neighbors[p][0]) for _ in range(5)) for p in range(5))
    trace = routing_run(fig, tables)
    assert trace.status == "terminal"
    assert trace.rounds <= fig.n
    assert trace.final.tables == routing.correct_tables(fig)


def test_non_neighbor_next_hop_rejected(fig):
    t = [list(r) for r in routing.correct_tables(fig)]
    t[A][B] = (1, E)
    with pytest.raises(ValueError, match="not a neighbor"):
        routing.validate_tables(fig, tuple(map(tuple, t)))


def test_negative_estimate_rejected(fig):
    t = [list(r) for r in routing.correct_tables(fig)]
    t[A][B] = (-1, C)
    with pytest.raises(ValueError):
        routing.validate_tables(fig, tuple(map(tuple, t)))


def test_severity_zero_is_identity(fig):
    t = routing.correct_tables(fig)
    assert routing.corrupt(fig, t, 7, 0.0) == t


def test_corruption_is_reproducible():
    topo = topology.path(3)
    t = routing.correct_tables(topo)
    assert routing.corrupt(topo, t, 11, 1.0) == routing.corrupt(topo, t, 11, 1.0)
    routing.validate_tables(topo, routing.corrupt(topo, t, 11, 1.0))


def test_severity_out_of_range(fig):
    with pytest.raises(ValueError):
        routing.corrupt(fig, routing.correct_tables(fig), 0, 1.5)


def test_loops_are_permitted(fig):
    t = [list(r) for r in routing.correct_tables(fig)]
    t[C][B] = (1, A)
    t = tuple(map(tuple, t))
    routing.validate_tables(fig, t)
    assert routing.next_hop(t, A, B) == C and routing.next_hop(t, C, B) == A


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 7), st.integers(0, 10_000), st.floats(0.1, 1.0))
def test_corrupted_tables_reach_bfs_fixed_point(n, seed, severity):
    topo = topology.random_connected(n, seed, 0.4)
    tables = routing.corrupt(topo, routing.correct_tables(topo), seed, severity)
    trace = routing_run(topo, tables, seed)
    assert trace.status == "terminal"
    assert trace.rounds <= topo.diameter + 1 <= n
    assert [[e[1] for e in row] for row in trace.final.tables] == bfs_next_hops(n, topo.edges)
