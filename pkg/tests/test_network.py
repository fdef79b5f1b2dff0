import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equiroute.errors import ValidationError
from equiroute.network import (Edge, Network, Path, incidence, overlap_condition, path_matrix, shortest_path,
                               validate_network, validate_path)


def line_net():
    return Network.from_edges([Edge("ab", "a", "b", 1.0, 5.0), Edge("bc", "b", "c", 2.0, 5.0),
                               Edge("ac", "a", "c", 4.0, 5.0)], 0.15, 4.0)


def test_valid_network_has_no_violations(net1):
    assert validate_network(net1.network) == []


@pytest.mark.parametrize("edge, fragment", [
    (Edge("x", "a", "a", 1.0, 1.0), "self-loop"),
    (Edge("x", "a", "b", 0.0, 1.0), "free-flow time"),
    (Edge("x", "a", "b", 1.0, -2.0), "capacity"),
    (Edge("x", "a", "b", math.nan, 1.0), "free-flow time"),
])
def test_edge_violations_reported(edge, fragment):
    net = Network.from_edges([edge])
    assert any(fragment in p for p in validate_network(net))


def test_duplicate_and_dangling_edges():
    edges = [Edge("x", "a", "b", 1, 1), Edge("x", "b", "c", 1, 1)]
    net = Network(frozenset({"a", "b"}), tuple(edges))
    problems = validate_network(net)
    assert any("duplicate" in p for p in problems)
    assert any("'c' is not a known node" in p for p in problems)


def test_bpr_parameter_ranges():
    e = [Edge("x", "a", "b", 1, 1)]
    assert any("zeta" in p for p in validate_network(Network.from_edges(e, 0.15, 0.5)))
    assert any("eta" in p for p in validate_network(Network.from_edges(e, -0.1, 1.0)))


def test_validate_path():
    net = line_net()
    assert validate_path(net, Path(("ab", "bc")), ("a", "c"))
    assert validate_path(net, Path(("ac",)), ("a", "c"))
    assert not validate_path(net, Path(("bc", "ab")), ("a", "c"))
    assert not validate_path(net, Path(("ab",)), ("a", "c"))
    assert not validate_path(net, Path(()), ("a", "c"))
    with pytest.raises(ValidationError, match="zz"):
        validate_path(net, Path(("ab", "zz")), ("a", "c"))


def test_repeated_edge_is_not_simple():
    net = Network.from_edges([Edge("ab", "a", "b", 1, 1), Edge("ba", "b", "a", 1, 1)])
    assert not validate_path(net, Path(("ab", "ba", "ab")), ("a", "b"))


def test_path_nodes_and_label(net1):
    g = net1.users[0]
    assert g.paths[0].label(net1.network) == "1-2-5-6-7"
    assert g.paths[1].nodes(net1.network) == ["1", "2", "7"]


def test_incidence_entries(net1):
    paths = net1.users[0].paths
    inc = incidence(net1.network, paths)
    assert inc.n_columns == 3
    assert inc.entry("2-7", 1) == 1
    assert inc.entry("2-7", 0) == 0
    a = path_matrix(net1.network, paths)
    assert a.sum(axis=0).tolist() == [4, 2, 4]


def test_overlap_condition_holds_on_network1(net1):
    cols, start = [], 0
    for g in net1.users:
        cols.append(range(start, start + g.n_paths))
        start += g.n_paths
    inc = incidence(net1.network, [p for g in net1.users for p in g.paths])
    assert overlap_condition(inc, cols).all_ok


def test_overlap_condition_fails_on_network2(net2):
    g = net2.users[0]
    rep = overlap_condition(incidence(net2.network, g.paths), [range(g.n_paths)])
    assert not rep.all_ok
    assert ("9-10" in {e for _, e, _ in rep.violations})


def test_with_edge_is_out_of_place():
    net = line_net()
    new = net.with_edge(Edge("ab", "a", "b", 9.0, 5.0))
    assert net.edge("ab").free_flow_time == 1.0
    assert new.edge("ab").free_flow_time == 9.0


def test_edge_between_parallel_is_ambiguous():
    net = Network.from_edges([Edge("p", "a", "b", 1, 1), Edge("q", "a", "b", 2, 1)])
    with pytest.raises(ValidationError, match="parallel"):
        net.edge_between("a", "b")
    with pytest.raises(ValidationError):
        net.edge_between("b", "a")


def _all_simple_paths(net, s, d):
    out = []

    def walk(node, used, seen):
        if node == d:
            out.append(list(used))
            return
        for i, e in enumerate(net.edges):
            if e.tail == node and e.head not in seen:
                walk(e.head, used + [i], seen | {e.head})

    walk(s, [], {s})
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shortest_path_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    nodes = [str(i) for i in range(6)]
    pairs = [(a, b) for a, b in itertools.permutations(nodes, 2) if rng.random() < 0.4]
    edges = [Edge(f"{a}>{b}", a, b, float(rng.integers(1, 20)), 1.0) for a, b in pairs]
    net = Network.from_edges(edges, nodes=nodes)
    w = net.free_flow_times
    brute = _all_simple_paths(net, "0", "5")
    sp = shortest_path(net, "0", "5")
    if not brute:
        assert sp is None
    else:
        best = min(sum(w[i] for i in p) for p in brute)
        assert sum(w[net.index_of(e)] for e in sp.edge_ids) == pytest.approx(best)
        assert validate_path(net, sp, ("0", "5"))
