import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategies import trees
from uavbackhaul.topology import (BackhaulGraph, CycleError, TopologyError, delete_link, path_to_gateway,
                                  read_edge_list, replace_parent_link, star_topology, subtree,
                                  verify_constraints, write_edge_list)


def test_star():
    g = star_topology(10)
    assert len(g.edges) == 10
    assert all(e == frozenset((j, 10)) for j, e in zip(range(10), sorted(g.edges, key=min)))
    assert all(len(path_to_gateway(g, j)) == 2 for j in range(10))
    assert len(star_topology(1).edges) == 1
    with pytest.raises(ValueError):
        star_topology(0)


def test_paths():
    g = BackhaulGraph((1, 2))  # 0 -> 1 -> gateway(2)
    assert path_to_gateway(g, 0) == (0, 1, 2)
    assert path_to_gateway(star_topology(3), 1) == (1, 3)
    isolated = BackhaulGraph((None, 2))
    assert path_to_gateway(isolated, 0) is None
    with pytest.raises(TopologyError):
        path_to_gateway(g, 5)


def test_subtree():
    g = BackhaulGraph((1, 2))  # chain 0 -> 1 -> gateway
    assert subtree(g, 1) == {0, 1}
    assert subtree(g, 0) == {0}
    assert all(subtree(star_topology(4), j) == {j} for j in range(4))
    with pytest.raises(TopologyError):
        subtree(g, -1)


def test_invalid_parent_maps():
    with pytest.raises(CycleError):
        BackhaulGraph((1, 0))
    with pytest.raises(TopologyError):
        BackhaulGraph((0,))
    with pytest.raises(TopologyError):
        BackhaulGraph((7, 2))


def test_replace_parent_link():
    g = star_topology(3)
    g2 = replace_parent_link(g, 0, 1)
    assert path_to_gateway(g2, 0) == (0, 1, 3)
    assert len(g2.edges) == len(g.edges)
    assert g == star_topology(3)  # original untouched
    with pytest.raises(CycleError):
        replace_parent_link(g2, 1, 0)
    with pytest.raises(TopologyError):
        replace_parent_link(g2, 0, 1)


def test_delete_link():
    g = BackhaulGraph((1, 3, 3))  # 0 -> 1 -> gw, 2 -> gw
    leaf = delete_link(g, 1, 0)
    assert path_to_gateway(leaf, 0) is None and len(leaf.edges) == 2
    internal = delete_link(g, 1, 3)
    assert path_to_gateway(internal, 0) is None and path_to_gateway(internal, 1) is None
    assert path_to_gateway(internal, 2) == (2, 3)
    with pytest.raises(TopologyError):
        delete_link(g, 0, 2)


def test_verify_constraints_examples():
    assert verify_constraints(star_topology(5)).all_pass
    r = verify_constraints(BackhaulGraph((None, 2)))
    assert not r.connected and r.edge_count_ok and r.acyclic
    r = verify_constraints([(0, 1), (1, 2), (2, 0)], num_uavs=2)
    assert not r.acyclic and not r.edge_count_ok
    r = verify_constraints([(0, 2), (0, 2)], num_uavs=2)
    assert not r.binary
    with pytest.raises(ValueError):
        verify_constraints([(0, 1)])


def test_from_edges_orients_to_gateway():
    g = BackhaulGraph.from_edges(3, [(3, 1), (1, 0), (2, 0)])
    assert g.parent == (1, 3, 0)
    with pytest.raises(CycleError):
        BackhaulGraph.from_edges(2, [(0, 1), (1, 2), (0, 2)])


def test_edge_list_round_trip(tmp_path):
    g = BackhaulGraph((1, 4, 1, None))
    path = tmp_path / "g.edges"
    write_edge_list(g, path)
    assert path.read_text().splitlines()[:2] == ["# J 4", "# root 4"]
    assert read_edge_list(path) == g


def test_read_edge_list_errors(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("0 1\n")
    with pytest.raises(TopologyError, match="header"):
        read_edge_list(path)
    path.write_text("# J 2\n0 1 2\n")
    with pytest.raises(TopologyError, match=":2:"):
        read_edge_list(path)


@given(trees())
def test_tree_invariants(parent):
    g = BackhaulGraph(parent)
    J = g.num_uavs
    assert verify_constraints(g).all_pass
    assert sum(p is not None for p in g.parent) == len(g.edges)
    # subtrees of the gateway's children partition the UAVs
    parts = [subtree(g, c) for c in g.children[J]]
    assert sum(len(p) for p in parts) == J and set().union(*parts) == set(range(J))
    for v in range(J):
        kids = [subtree(g, c) for c in g.children[v]]
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                assert not kids[a] & kids[b]
    for j in range(J):
        path = path_to_gateway(g, j)
        assert path[0] == j and path[-1] == J and len(set(path)) == len(path)
        assert all(g.has_edge(a, b) for a, b in zip(path, path[1:]))


@given(trees(min_uavs=2, max_uavs=12), st.data())
def test_replacements_keep_spanning_tree(parent, data):
    g = BackhaulGraph(parent)
    J = g.num_uavs
    for _ in range(10):
        j = data.draw(st.integers(0, J - 1))
        sub = subtree(g, j)
        options = [w for w in range(J + 1) if w not in sub and w != g.parent[j]]
        if not options:
            continue
        g = replace_parent_link(g, j, data.draw(st.sampled_from(options)))
        assert verify_constraints(g).all_pass


@given(trees(min_uavs=2, max_uavs=12), st.data())
def test_topo_order_puts_parents_first(parent, data):
    g = BackhaulGraph(parent)
    g = delete_link(g, *data.draw(st.sampled_from(sorted(tuple(e) for e in g.edges))))
    order = g.topo_order
    assert sorted(order) == list(range(g.num_uavs))
    pos = {v: k for k, v in enumerate(order)}
    assert all(p is None or p == g.root or pos[p] < pos[j] for j, p in enumerate(g.parent))
