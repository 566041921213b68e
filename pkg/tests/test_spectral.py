
import numpy as np
import pytest

from groupsamp.graphs import SparseGraph, build_laplacian
from groupsamp.spectral import (
    PolynomialFilter,
    apply_filter,
    dense_spectrum,
    estimate_eigcount,
    estimate_lambda_k,
    estimate_lambda_max,
    lowpass_filter,
)
from groupsamp.synth import community_graph, path_graph, sensor_graph

from helpers import random_connected_graph

P4_EIGENVALUES = np.array([0.0, 0.5857864376269049, 2.0, 3.414213562373095])


@pytest.fixture(scope="module")
def p4_lap():
    return build_laplacian(path_graph(4))


def direct_chebyshev_sum(filt, t):
    """Independent evaluation through the cosine form of the basis."""
    y = np.clip(2.0 * np.asarray(t, float) / filt.lambda_max - 1.0, -1.0, 1.0)
    theta = np.arccos(y)
    return sum(c * np.cos(j * theta) for j, c in enumerate(filt.coeffs))


def test_dense_spectrum_p4(p4_lap):
    basis = dense_spectrum(p4_lap, 2)
    np.testing.assert_allclose(basis.lambdas, P4_EIGENVALUES[:2], atol=1e-12)
    np.testing.assert_allclose(basis.vectors[:, 0], 0.5 * np.ones(4), atol=1e-12)
    assert basis.lambda_next == pytest.approx(2.0)
    assert basis.lambda_top == pytest.approx(P4_EIGENVALUES[-1])


def test_dense_spectrum_full_basis_orthogonal(p4_lap):
    basis = dense_spectrum(p4_lap, 4)
    gram = basis.vectors.T @ basis.vectors
    assert np.abs(gram - np.eye(4)).max() <= 1e-10


def test_dense_spectrum_diagonalises(p4_lap):
    basis = dense_spectrum(p4_lap, 3)
    lhs = p4_lap.apply(basis.vectors)
    rhs = basis.vectors * basis.lambdas
    assert np.abs(lhs - rhs).max() <= 1e-8 * max(1.0, basis.lambdas.max())


def test_dense_spectrum_guards(p4_lap):
    with pytest.raises(ValueError, match="guarded"):
        dense_spectrum(p4_lap, 2, guard=3)
    with pytest.raises(ValueError, match="outside"):
        dense_spectrum(p4_lap, 5)


def test_dense_spectrum_ambiguous_band():
    # two components: the zero eigenvalue is double, so k=1 is ambiguous
    g = SparseGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    lap = build_laplacian(g)
    with pytest.raises(ValueError, match="ambiguous"):
        dense_spectrum(lap, 1)
    basis = dense_spectrum(lap, 2)
    assert basis.lambdas[1] <= 1e-12


def test_sign_convention_deterministic(p4_lap):
    a = dense_spectrum(p4_lap, 4).vectors
    b = dense_spectrum(p4_lap, 4).vectors
    np.testing.assert_array_equal(a, b)
    for col in range(4):
        first = np.flatnonzero(np.abs(a[:, col]) > 1e-8)[0]
        assert a[first, col] > 0


def test_estimate_lambda_max_p4(p4_lap):
    est = estimate_lambda_max(p4_lap, seed=0)
    assert P4_EIGENVALUES[-1] <= est <= 3.45


def test_estimate_lambda_max_normalized():
    g, _ = sensor_graph(60, seed=2)
    lap = build_laplacian(g, "normalized")
    assert estimate_lambda_max(lap, seed=1) <= 2.02


def test_estimate_lambda_max_zero_graph():
    g = SparseGraph.from_edges(5, [])
    lap = build_laplacian(g)
    assert estimate_lambda_max(lap) == 0.0


def test_lowpass_band_values():
    lam = float(P4_EIGENVALUES[-1]) * 1.01
    f = lowpass_filter(1.0, lam, 50)
    assert 0.9 <= f.evaluate(0.0) <= 1.1
    assert -0.1 <= f.evaluate(lam) <= 0.1


def test_lowpass_cutoff_domain():
    with pytest.raises(ValueError):
        lowpass_filter(0.0, 2.0, 50)
    with pytest.raises(ValueError):
        lowpass_filter(2.5, 2.0, 50)


def test_lowpass_overshoot_bounds():
    for order in (10, 25, 50, 75):
        for jackson in (True, False):
            f = lowpass_filter(1.0, 3.5, order, jackson=jackson)
            values = f.evaluate(np.linspace(0.0, 3.5, 1000))
            assert values.min() >= -0.15
            assert values.max() <= 1.15


def test_evaluate_matches_direct_summation():
    f = lowpass_filter(0.7, 3.0, 40)
    t = np.linspace(0.0, 3.0, 257)
    assert np.abs(f.evaluate(t) - direct_chebyshev_sum(f, t)).max() <= 1e-12


def test_filter_projector_error(p4_lap):
    basis = dense_spectrum(p4_lap, 4)
    f = lowpass_filter(1.0, estimate_lambda_max(p4_lap), 50)
    approx = basis.vectors @ np.diag(f.evaluate(basis.lambdas)) @ basis.vectors.T
    ideal = basis.vectors @ np.diag([1.0, 1.0, 0.0, 0.0]) @ basis.vectors.T
    assert np.linalg.norm(approx - ideal, 2) <= 0.2


def test_filter_serialisation_round_trip():
    f = lowpass_filter(0.9, 2.7, 12, jackson=True)
    g = PolynomialFilter.from_text(f.to_text())
    np.testing.assert_array_equal(f.coeffs, g.coeffs)
    assert g.lambda_max == f.lambda_max and g.damped == f.damped


def test_apply_constant_filter_is_identity(p4_lap):
    f = PolynomialFilter(coeffs=np.array([1.0]), lambda_max=4.0)
    x = np.arange(4.0)
    np.testing.assert_array_equal(apply_filter(p4_lap, f, x), x)


def test_apply_filter_eigvector_response(p4_lap):
    basis = dense_spectrum(p4_lap, 1)
    f = lowpass_filter(1.0, estimate_lambda_max(p4_lap), 50)
    out = apply_filter(p4_lap, f, basis.vectors[:, 0])
    assert np.linalg.norm(out - basis.vectors[:, 0]) <= 0.05


def test_apply_filter_linearity(p4_lap):
    rng = np.random.default_rng(0)
    f = lowpass_filter(1.5, 3.5, 20)
    x, y = rng.standard_normal((2, 4))
    lhs = apply_filter(p4_lap, f, x + y)
    rhs = apply_filter(p4_lap, f, x) + apply_filter(p4_lap, f, y)
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_apply_filter_symmetry():
    rng = np.random.default_rng(4)
    g = random_connected_graph(rng, 30)
    lap = build_laplacian(g)
    f = lowpass_filter(1.0, estimate_lambda_max(lap), 30)
    x, y = rng.standard_normal((2, 30))
    assert apply_filter(lap, f, x) @ y == pytest.approx(x @ apply_filter(lap, f, y), abs=1e-10)


def test_apply_filter_spectral_mapping():
    rng = np.random.default_rng(6)
    g = random_connected_graph(rng, 25)
    lap = build_laplacian(g)
    basis = dense_spectrum(lap, 25)
    f = lowpass_filter(1.0, estimate_lambda_max(lap), 35)
    x = rng.standard_normal(25)
    via_operator = apply_filter(lap, f, x)
    via_spectrum = basis.vectors @ (f.evaluate(basis.lambdas) * (basis.vectors.T @ x))
    assert np.linalg.norm(via_operator - via_spectrum) <= 1e-9


def test_apply_filter_shape_error(p4_lap):
    f = lowpass_filter(1.0, 3.5, 10)
    with pytest.raises(ValueError):
        apply_filter(p4_lap, f, np.zeros(5))


def test_eigcount_full_pass():
    g, _ = sensor_graph(100, seed=5)
    lap = build_laplacian(g)
    lam_max = estimate_lambda_max(lap, seed=5)
    count = estimate_eigcount(lap, lam_max * 1.2, R=20, seed=5)
    assert abs(count - 100) <= 10


def test_eigcount_p4_midband(p4_lap):
    count = estimate_eigcount(p4_lap, 1.0, order=50, R=200, seed=3)
    assert 1.5 <= count <= 2.5


def test_eigcount_negative_threshold(p4_lap):
    assert estimate_eigcount(p4_lap, -0.5, R=10, seed=0) <= 0.5


def test_eigcount_unbiased_midgap():
    graph, _ = community_graph([25, 25, 25, 25], p_in=0.5, w_bridge=0.05, seed=1)
    lap = build_laplacian(graph)
    # mid-gap threshold between the 4th and 5th eigenvalues
    values = np.linalg.eigvalsh(lap.dense())
    threshold = 0.5 * (values[3] + values[4])
    counts = [estimate_eigcount(lap, threshold, order=50, R=12, seed=s) for s in range(50)]
    assert abs(np.mean(counts) - 4) <= 0.15 * 4


def test_estimate_lambda_k_p4(p4_lap):
    est = estimate_lambda_k(p4_lap, 2, order=50, R=200, seed=5)
    assert 0.5857864376 < est < 2.0


def test_estimate_lambda_k_extremes(p4_lap):
    top = estimate_lambda_k(p4_lap, 4, order=50, R=200, seed=2)
    assert top >= P4_EIGENVALUES[-1] * 0.95
    # complete graph: lambda_2 = n, the zero eigenvalue sits alone far below
    n = 20
    g = SparseGraph.from_edges(n, [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)])
    lap = build_laplacian(g)
    for seed in range(5):
        assert estimate_lambda_k(lap, 1, order=50, R=50, seed=seed) < n


def test_estimate_lambda_k_deterministic(p4_lap):
    a = estimate_lambda_k(p4_lap, 2, seed=9)
    b = estimate_lambda_k(p4_lap, 2, seed=9)
    assert a == b


def test_estimate_lambda_k_lands_in_gap():
    graph, _ = community_graph([20, 20, 20, 20, 20], p_in=0.5, w_bridge=0.05, seed=3)
    lap = build_laplacian(graph)
    values = np.linalg.eigvalsh(lap.dense())
    k = 5
    assert (values[k] - values[k - 1]) / values[k] >= 0.2
    hits = sum(
        values[k - 1] < estimate_lambda_k(lap, k, order=50, seed=s) < values[k]
        for s in range(20)
    )
    assert hits >= 18
