import numpy as np
import pytest

from coopmap.network_sim import (
    CommGraph,
    check_periodic_connectivity,
    disagreement_contraction,
    format_trace,
    graph_from_positions,
    parse_trace,
    weights_from_graph,
    write_trace,
)


def test_graph_from_positions_range_rule():
    g = graph_from_positions([[0.0], [1.0], [2.5]], comm_range=1.0)
    assert g.edges == {(0, 1), (1, 0)}
    assert g.is_symmetric()
    assert not g.is_strongly_connected()
    # colocated robots do not link (distance must be positive)
    assert graph_from_positions([[0.0], [0.0]], 1.0).edges == frozenset()


def test_self_edges_rejected():
    with pytest.raises(ValueError):
        CommGraph(2, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        CommGraph(2, frozenset({(0, 2)}))


def test_strong_connectivity_directed():
    assert CommGraph(3, frozenset({(0, 1), (1, 2), (2, 0)})).is_strongly_connected()
    assert not CommGraph(3, frozenset({(0, 1), (1, 2)})).is_strongly_connected()
    assert CommGraph(1).is_strongly_connected()


def test_weights_doubly_stochastic():
    g = graph_from_positions([[0, 0], [1, 0], [2, 0], [1, 1]], 1.5)
    A = weights_from_graph(g, 0.2)
    np.testing.assert_allclose(A.weights.sum(0), 1.0)
    np.testing.assert_allclose(A.weights.sum(1), 1.0)
    assert A.validate(0.2) == []
    # robot 1 has three neighbours: 1 - 3*0.2
    assert A.weights[1, 1] == pytest.approx(0.4)


def test_weights_degree_violation_names_robot():
    star = CommGraph(4, frozenset({(0, j) for j in (1, 2, 3)} | {(j, 0) for j in (1, 2, 3)}))
    with pytest.raises(ValueError, match="robot 0 has degree 3"):
        weights_from_graph(star, 0.3)


def test_validate_flags_bad_matrix():
    from coopmap.network_sim import AdjacencyMatrix
    A = AdjacencyMatrix(np.array([[0.95, 0.05], [0.5, 0.5]]))
    problems = A.validate(0.1)
    assert any("column" in p for p in problems)
    assert any("off-diagonal" in p for p in problems)


def test_periodic_connectivity_windows():
    a = CommGraph(3, frozenset({(0, 1), (1, 0)}))
    b = CommGraph(3, frozenset({(1, 2), (2, 1)}))
    assert not check_periodic_connectivity([a, b], 1)
    assert check_periodic_connectivity([a, b, a], 2)
    with pytest.raises(ValueError):
        check_periodic_connectivity([a], 2)


def test_disagreement_contraction_ring():
    p = 5
    g = CommGraph(p, frozenset({(i, (i + 1) % p) for i in range(p)} | {((i + 1) % p, i) for i in range(p)}))
    A = weights_from_graph(g, 0.1).weights
    # symmetric circulant: eigenvalues 1 - 0.2 (1 - cos(2 pi k / 5)); second largest at k = 1
    expect = 1 - 0.2 * (1 - np.cos(2 * np.pi / 5))
    assert disagreement_contraction(A) == pytest.approx(expect)


def test_trace_round_trip(tmp_path):
    graphs = [CommGraph(3, frozenset({(0, 1), (1, 0)}), 0), CommGraph(3, frozenset(), 1)]
    text = format_trace(graphs)
    assert text.splitlines()[0] == "0 3 0-1 1-0"
    assert parse_trace(text) == graphs
    write_trace(graphs, tmp_path / "g.trace")
    assert parse_trace((tmp_path / "g.trace").read_text()) == graphs
