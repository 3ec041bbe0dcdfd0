import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bfs_distances
from snapfwd import topology
from snapfwd.topology import Topology, TopologyError

A, B, C, D, E = range(5)


def test_figure_network_constants(fig):
    assert fig.n == 5
    assert fig.max_degree == 3
    assert fig.diameter == 3
    assert fig.neighbors[C] == (A, B, D)


def test_figure_network_distance_a_to_e(fig):
    assert fig.dist[A][E] == 3


def test_distances_match_bfs(fig):
    assert [list(r) for r in fig.dist] == bfs_distances(5, fig.edges)


def test_self_distance_is_zero(fig):
    assert all(fig.dist[p][p] == 0 for p in range(fig.n))


def test_single_node():
    t = Topology.build([], n=1)
    assert (t.n, t.max_degree, t.diameter) == (1, 0, 0)
    assert t.neighbors == ((),)


@pytest.mark.parametrize("edges, n, msg", [
    ([(0, 1), (2, 3)], 4, "connected"),
    ([(0, 0)], 1, "self-loop"),
    ([(0, 1), (1, 0)], 2, "duplicate"),
    ([(0, 5)], 3, "outside"),
    ([(0, 1, 2)], 3, "two endpoints"),
])
def test_build_rejects(edges, n, msg):
    with pytest.raises(TopologyError, match=msg):
        Topology.build(edges, n=n)


def test_n_inferred_from_edges():
    assert Topology.build([(0, 3), (3, 1), (1, 2)]).n == 4


@pytest.mark.parametrize("make, n, delta, diam", [
    (topology.path, 4, 2, 3),
    (topology.ring, 6, 2, 3),
    (topology.complete, 4, 3, 1),
    (topology.star, 5, 4, 2),
])
def test_families(make, n, delta, diam):
    t = make(n)
    assert (t.n, t.max_degree, t.diameter) == (n, delta, diam)


def test_equality_and_hash():
    assert topology.path(3) == Topology.build([(1, 2), (0, 1)])
    assert len({topology.path(3), Topology.build([(0, 1), (1, 2)])}) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(0, 10_000), st.floats(0, 1))
def test_random_connected_is_connected_and_matches_bfs(n, seed, p):
    t = topology.random_connected(n, seed, p)
    assert t.n == n
    assert len(t.edges) >= n - 1
    assert [list(r) for r in t.dist] == bfs_distances(n, t.edges)
    assert topology.random_connected(n, seed, p) == t
