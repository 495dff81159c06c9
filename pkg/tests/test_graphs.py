"""Graph construction, named generators, edge-list round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deffuant_lab import (ConnectivityError, EdgeListParseError, Graph,
                          StructureError)
from deffuant_lab.graphs import (UnionFind, complete, cycle,
                                 erdos_renyi_connected, generate,
                                 load_edge_list, path, serialize, star,
                                 torus2d, validate)


def test_graph_normalizes_edge_orientation():
    g = Graph(3, np.array([[1, 0], [2, 1]]))
    assert g.edges.tolist() == [[0, 1], [1, 2]]
    assert g.edge_id(1, 0) == 0
    assert g.has_edge(0, 1) and g.has_edge(1, 0)
    assert not g.has_edge(0, 2)


def test_graph_rejects_self_loop():
    with pytest.raises(StructureError):
        Graph(2, np.array([[0, 0], [0, 1]]))


def test_graph_rejects_duplicate_edge():
    with pytest.raises(StructureError):
        Graph(2, np.array([[0, 1], [1, 0]]))


def test_graph_rejects_out_of_range_vertex():
    with pytest.raises(StructureError):
        Graph(2, np.array([[0, 2]]))


def test_graph_rejects_disconnected():
    with pytest.raises(ConnectivityError):
        Graph(4, np.array([[0, 1], [2, 3]]))


def test_graph_arrays_frozen():
    g = path(4)
    for arr in (g.edges, g.adj_indptr, g.adj_eids):
        assert not arr.flags.writeable


def test_complete_counts():
    g = complete(5)
    assert g.n_vertices == 5
    assert g.n_edges == 10
    for x in range(5):
        assert sorted(g.neighbors(x)) == [y for y in range(5) if y != x]


def test_path_and_cycle():
    p = path(4)
    assert p.n_edges == 3
    assert p.neighbors(0) == [1]
    assert sorted(p.neighbors(1)) == [0, 2]
    c = cycle(4)
    assert c.n_edges == 4
    assert sorted(c.neighbors(0)) == [1, 3]


def test_star():
    g = star(5)
    assert g.n_edges == 4
    assert sorted(g.neighbors(0)) == [1, 2, 3, 4]
    assert g.neighbors(3) == [0]


def test_torus_is_4_regular():
    g = torus2d(4, 4)
    assert g.n_vertices == 16
    assert g.n_edges == 32
    degrees = np.zeros(16, dtype=int)
    for u, v in g.edges.tolist():
        degrees[u] += 1
        degrees[v] += 1
    assert np.all(degrees == 4)


def test_torus_minimum_size():
    with pytest.raises(ValueError):
        torus2d(2, 4)


def test_generator_minimums():
    with pytest.raises(ValueError):
        complete(1)
    with pytest.raises(ValueError):
        path(1)
    with pytest.raises(ValueError):
        cycle(2)
    with pytest.raises(ValueError):
        star(1)


def test_erdos_renyi_deterministic_and_connected():
    g1 = erdos_renyi_connected(12, 0.3, np.random.default_rng(42))
    g2 = erdos_renyi_connected(12, 0.3, np.random.default_rng(42))
    assert g1.same_edges(g2)
    assert "er_rejected" in g1.metadata
    validate(g1)


def test_erdos_renyi_p_one_is_complete():
    g = erdos_renyi_connected(6, 1.0, np.random.default_rng(0))
    assert g.same_edges(complete(6))


def test_generate_dispatch():
    assert generate("complete", (4,)).same_edges(complete(4))
    assert generate("torus2d", (3, 3)).same_edges(torus2d(3, 3))
    g1 = generate("erdos_renyi_connected", (10, 0.4), seed=7)
    g2 = generate("erdos_renyi_connected", (10, 0.4), seed=7)
    assert g1.same_edges(g2)
    with pytest.raises(ValueError):
        generate("hypercube", (3,))


def test_edge_list_round_trip():
    g = torus2d(3, 4)
    g2 = load_edge_list(serialize(g))
    assert g2.same_edges(g)


def test_edge_list_comments_and_blanks():
    g = load_edge_list("# a triangle\n0 1\n\n1 2\n0 2\n")
    assert g.n_vertices == 3
    assert g.n_edges == 3


def test_edge_list_parse_errors():
    with pytest.raises(EdgeListParseError):
        load_edge_list("0 1 2\n")
    with pytest.raises(EdgeListParseError):
        load_edge_list("0 x\n")
    with pytest.raises(EdgeListParseError):
        load_edge_list("-1 0\n")
    with pytest.raises(EdgeListParseError):
        load_edge_list("# nothing\n")


def test_adjacency_index_consistent():
    for g in (complete(6), path(5), cycle(7), star(6), torus2d(3, 3)):
        validate(g)
        # every edge id appears exactly twice in the adjacency index
        counts = np.bincount(g.adj_eids, minlength=g.n_edges)
        assert np.all(counts == 2)


@settings(max_examples=30)
@given(st.integers(2, 12), st.floats(0.3, 1.0), st.integers(0, 10**6))
def test_erdos_renyi_always_valid(n, p, seed):
    g = erdos_renyi_connected(n, p, np.random.default_rng(seed))
    validate(g)
    assert g.n_vertices == n


def test_union_find_components():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    comps = uf.components()
    assert sorted(map(sorted, comps)) == [[0, 1], [2], [3, 4]]
