import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from ergoseq.errors import NotIrreducible, Periodic
from ergoseq.graph import (
    RegionGraph,
    TargetDistribution,
    apply_weight_floor,
    fig2_graph,
    graph_report,
    load_graph,
    validate_graph,
    weights_from_entropy,
)


def test_fig2_directed_is_valid():
    g = fig2_graph(directed=True)
    rep = validate_graph(g)
    assert g.n == 9
    assert rep.irreducible and rep.aperiodic
    assert sorted(g.one_way_edges()) == [(1, 4), (6, 7)]


def test_fig2_undirected_has_no_one_way_edges():
    g = fig2_graph(directed=False)
    assert g.is_undirected()
    assert g.one_way_edges() == []
    assert g.edges == fig2_graph(directed=True).undirected_skeleton().edges


def test_disconnected_is_not_irreducible():
    with pytest.raises(NotIrreducible):
        validate_graph(RegionGraph.from_edges(2))


def test_one_way_pair_is_not_irreducible():
    with pytest.raises(NotIrreducible):
        validate_graph(RegionGraph.from_edges(2, directed=[(0, 1)]))


def test_two_cycle_without_self_loops_is_periodic():
    g = RegionGraph.from_edges(2, undirected=[(0, 1)], allow_self_loops=False)
    with pytest.raises(Periodic):
        validate_graph(g)
    assert graph_report(g).period == 2


def test_triangle_plus_two_cycle_is_aperiodic():
    g = RegionGraph.from_edges(3, directed=[(0, 1), (1, 2), (2, 0), (1, 0)], allow_self_loops=False)
    assert validate_graph(g).aperiodic


def test_directed_three_cycle_period():
    g = RegionGraph.from_edges(3, directed=[(0, 1), (1, 2), (2, 0)], allow_self_loops=False)
    assert graph_report(g).period == 3


def test_self_loops_make_aperiodic():
    g = RegionGraph.from_edges(2, undirected=[(0, 1)], allow_self_loops=True)
    assert validate_graph(g).aperiodic


def test_edge_endpoints_checked():
    with pytest.raises(ValueError):
        RegionGraph.from_edges(2, directed=[(0, 2)])


def test_support_includes_diagonal_when_allowed():
    g = RegionGraph.from_edges(3, directed=[(0, 1)], allow_self_loops=True)
    S = g.support()
    assert S[1, 0] and not S[0, 1]
    assert S.diagonal().all()
    assert not RegionGraph.from_edges(3, directed=[(0, 1)], allow_self_loops=False).support().diagonal().any()


def test_json_roundtrip(tmp_path):
    g = fig2_graph(directed=True)
    p = tmp_path / "g.json"
    p.write_text(json.dumps(g.to_dict()))
    assert load_graph(p) == g


def test_undirected_pairs_expand():
    d = {"nodes": 3, "self_loops": False, "edges": [[0, 1]], "undirected_edges": [[1, 2]]}
    g = RegionGraph.from_dict(d)
    assert g.edges == frozenset({(0, 1), (1, 2), (2, 1)})


perm_strategy = st.permutations(list(range(9)))


@given(perm_strategy, st.booleans())
def test_validation_invariant_under_relabeling(perm, directed):
    g = fig2_graph(directed=directed)
    a, b = graph_report(g), graph_report(g.relabel(perm))
    assert (a.irreducible, a.aperiodic, a.period) == (b.irreducible, b.aperiodic, b.period)


@given(st.integers(2, 6), st.data())
def test_relabel_preserves_verdict_random_graphs(n, data):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    loops = data.draw(st.booleans())
    perm = data.draw(st.permutations(list(range(n))))
    g = RegionGraph.from_edges(n, directed=edges, allow_self_loops=loops)
    a, b = graph_report(g), graph_report(g.relabel(perm))
    assert (a.irreducible, a.aperiodic) == (b.irreducible, b.aperiodic)


def test_weights_equal_entropies():
    assert_allclose(weights_from_entropy([math.log(2)] * 3).weights, [1 / 3] * 3)


def test_weights_already_normalized():
    assert_allclose(weights_from_entropy([0.6, 0.2, 0.2]).weights, [0.6, 0.2, 0.2])


def test_weights_all_zero_uniform():
    assert_allclose(weights_from_entropy([0.0, 0.0, 1e-13]).weights, [1 / 3] * 3)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_weights_always_valid(h):
    w = weights_from_entropy(h).weights
    assert np.all(w > 0)
    assert abs(w.sum() - 1) <= 1e-9


def test_weight_floor():
    w = apply_weight_floor([0.5, 0.5, 0.0]).weights
    assert w[2] > 0
    assert abs(w.sum() - 1.0) < 1e-12


def test_target_distribution_validation():
    with pytest.raises(ValueError):
        TargetDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        TargetDistribution(np.array([1.0, 0.0]))
    w = TargetDistribution.uniform(4)
    with pytest.raises(ValueError):
        w.weights[0] = 1.0
