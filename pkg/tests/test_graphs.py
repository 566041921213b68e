import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from groupsamp.graphs import GraphFormatError, Laplacian, SparseGraph, build_laplacian, load_graph
from groupsamp.synth import path_graph, sensor_graph

from helpers import random_connected_graph

P4_EIGENVALUES = np.array([0.0, 0.5857864376269049, 2.0, 3.414213562373095])


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_edge_list_p4(tmp_path):
    p = write(tmp_path, "p4.txt", "1 2 1.0\n2 3 1.0\n3 4 1.0\n")
    g = load_graph(p)
    assert g.n == 4
    assert g.edge_count == 3
    assert g.adjacency[0, 1] == 1.0 and g.adjacency[1, 0] == 1.0


def test_load_empty_with_declared_n(tmp_path):
    p = write(tmp_path, "isolated.txt", "# n=5\n")
    g = load_graph(p)
    assert g.n == 5
    assert g.edge_count == 0
    assert (g.degree == 0).all()


def test_load_malformed_line_reports_lineno(tmp_path):
    p = write(tmp_path, "bad.txt", "1 2 1.0\nfoo bar baz\n")
    with pytest.raises(GraphFormatError, match=":2"):
        load_graph(p)


def test_load_negative_weight(tmp_path):
    p = write(tmp_path, "neg.txt", "1 2 -1.0\n")
    with pytest.raises(ValueError, match="negative"):
        load_graph(p)


def test_load_conflicting_directions_averaged(tmp_path):
    p = write(tmp_path, "conflict.txt", "1 2 1.0\n2 1 3.0\n")
    g = load_graph(p)
    assert g.adjacency[0, 1] == pytest.approx(2.0)
    assert g.adjacency[1, 0] == pytest.approx(2.0)


def test_load_matrix_market(tmp_path):
    w = sp.coo_array(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 2.0], [0.0, 2.0, 0.0]]))
    path = tmp_path / "g.mtx"
    scipy.io.mmwrite(path, w)
    g = load_graph(path)
    assert g.n == 3
    assert g.adjacency[1, 2] == 2.0


def test_load_missing_file():
    with pytest.raises(FileNotFoundError):
        load_graph("/nonexistent/graph.txt")


def test_load_minnesota_if_available():
    from pathlib import Path

    candidates = [Path("data/minnesota.mtx"), Path("data/minnesota.txt")]
    path = next((p for p in candidates if p.exists()), None)
    if path is None:
        pytest.skip("Minnesota graph file not bundled")
    g = load_graph(path)
    assert g.n == 2642


def test_symmetry_validation():
    w = sp.csr_array(np.array([[0.0, 1.0], [0.5, 0.0]]))
    with pytest.raises(ValueError, match="symmetric"):
        SparseGraph(w)


def test_laplacian_annihilates_constant():
    lap = build_laplacian(path_graph(4))
    assert np.abs(lap.apply(np.ones(4))).max() == 0.0


def test_p4_eigenvalues_match_dense_oracle():
    lap = build_laplacian(path_graph(4))
    oracle = np.linalg.eigvalsh(lap.dense())
    np.testing.assert_allclose(oracle, P4_EIGENVALUES, atol=1e-12)


def test_laplacian_psd_random_graphs():
    rng = np.random.default_rng(7)
    for _ in range(10):
        g = random_connected_graph(rng, int(rng.integers(5, 40)))
        for variant in ("combinatorial", "normalized"):
            lap = build_laplacian(g, variant)
            v = rng.standard_normal(g.n)
            assert v @ lap.apply(v) >= -1e-10 * (v @ v)


def test_normalized_spectrum_bound():
    rng = np.random.default_rng(3)
    for _ in range(5):
        g = random_connected_graph(rng, 30)
        lap = build_laplacian(g, "normalized")
        assert np.linalg.eigvalsh(lap.dense()).max() <= 2 + 1e-9


def test_normalized_rejects_isolated_node():
    g = SparseGraph.from_edges(3, [(0, 1, 1.0)])
    with pytest.raises(ValueError, match="node 2"):
        build_laplacian(g, "normalized")
    # the combinatorial variant tolerates isolated nodes
    build_laplacian(g, "combinatorial")


def test_laplacian_action_matches_dense():
    rng = np.random.default_rng(11)
    g, _ = sensor_graph(40, seed=1)
    for variant in ("combinatorial", "normalized"):
        lap = build_laplacian(g, variant)
        x = rng.standard_normal(g.n)
        np.testing.assert_allclose(lap.apply(x), lap.dense() @ x, atol=1e-12)


def test_unknown_variant():
    with pytest.raises(ValueError):
        Laplacian(path_graph(3), "rw")
