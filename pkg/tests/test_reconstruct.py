import numpy as np
import pytest

from groupsamp.graphs import SparseGraph, build_laplacian
from groupsamp.groups import GroupPartition, assemble_sample_operators, group_average, group_lift
from groupsamp.reconstruct import (
    BoundInputs,
    InfeasibleConstraintsError,
    SmoothnessFilter,
    build_reduced_laplacian,
    constrained_decode,
    constrained_full_decode,
    decode_error_bounds,
    dedupe_constraints,
    fast_decode,
    full_decode,
    save_decode_result,
    split_projections,
)
from groupsamp.sampling import SamplingDistribution, draw_groups, uniform_distribution
from groupsamp.spectral import dense_spectrum
from groupsamp.synth import community_graph, path_graph, random_partition

from helpers import random_connected_graph, random_strict_partition


def two_component_fixture():
    """Two disjoint well-connected blobs; the 2-dim band is their indicators."""
    edges = []
    for lo in (0, 6):
        for i in range(6):
            for j in range(i + 1, 6):
                edges.append((lo + i, lo + j, 1.0))
    g = SparseGraph.from_edges(12, edges)
    lap = build_laplacian(g)
    part = GroupPartition.from_labels(np.array([0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]))
    return lap, part


def test_smoothness_filter_identity():
    lap = build_laplacian(path_graph(4))
    g = SmoothnessFilter.identity()
    x = np.arange(4.0)
    np.testing.assert_allclose(g.apply(lap, x), lap.apply(x))
    g.validate(4.0)


def test_smoothness_filter_validation():
    with pytest.raises(ValueError, match="negative"):
        SmoothnessFilter(np.array([-0.5, 1.0])).validate(2.0)
    with pytest.raises(ValueError, match="nondecreasing"):
        SmoothnessFilter(np.array([1.0, -0.25])).validate(2.0)


def test_smoothness_filter_horner_matches_dense():
    rng = np.random.default_rng(0)
    lap = build_laplacian(random_connected_graph(rng, 15))
    g = SmoothnessFilter(np.array([0.3, 0.0, 1.0, 0.2]))
    dense = lap.dense()
    expected = 0.3 * np.eye(15) + dense @ dense + 0.2 * dense @ dense @ dense
    x = rng.standard_normal(15)
    np.testing.assert_allclose(g.apply(lap, x), expected @ x, atol=1e-9)


def dense_normal_solution(lap, g, ops, y, gamma):
    n = lap.n
    m_rows = ops.apply_m(np.eye(n))  # (m, n)
    p_sq = np.diag(ops.apply_p(ops.apply_p(np.eye(ops.m))).diagonal())
    g_dense = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        g_dense[:, i] = g.apply(lap, e)
    a = m_rows.T @ p_sq @ m_rows + gamma * g_dense
    b = m_rows.T @ p_sq @ y
    return np.linalg.solve(a, b)


def test_full_decode_recovers_bandlimited():
    lap, part = two_component_fixture()
    basis = dense_spectrum(lap, 2)
    rng = np.random.default_rng(1)
    x = basis.vectors @ rng.standard_normal(2)
    dist = uniform_distribution(part.N)
    draw = draw_groups(dist, 6, 3, part)  # 6 uniform draws of 4 groups: both blobs sampled
    ops = assemble_sample_operators(part, dist.probs, draw)
    y = ops.apply_m(x)
    g = SmoothnessFilter.identity()
    res = full_decode(lap, g, ops, y, gamma=1e-8, tol=1e-12, max_iter=3000)
    assert np.linalg.norm(res.estimate - x) / np.linalg.norm(x) <= 1e-3
    oracle = dense_normal_solution(lap, g, ops, y, 1e-8)
    assert np.linalg.norm(res.estimate - oracle) <= 1e-6 * max(1.0, np.linalg.norm(oracle))


def test_full_decode_zero_measurements():
    lap, part = two_component_fixture()
    dist = uniform_distribution(part.N)
    draw = draw_groups(dist, 3, 0, part)
    ops = assemble_sample_operators(part, dist.probs, draw)
    res = full_decode(lap, SmoothnessFilter.identity(), ops, np.zeros(ops.m), gamma=1e-3)
    assert (res.estimate == 0).all()
    assert res.iterations == 0


def test_full_decode_is_minimizer():
    rng = np.random.default_rng(5)
    lap = build_laplacian(random_connected_graph(rng, 20))
    part = random_strict_partition(rng, 20, 5)
    dist = uniform_distribution(5)
    g = SmoothnessFilter.identity()
    for trial in range(5):
        draw = draw_groups(dist, 4, trial, part)
        ops = assemble_sample_operators(part, dist.probs, draw)
        y = rng.standard_normal(ops.m)
        gamma = 0.1
        res = full_decode(lap, g, ops, y, gamma, tol=1e-12, max_iter=5000)

        def objective(z):
            r = ops.apply_p(ops.apply_m(z) - y)
            return float(r @ r + gamma * (z @ g.apply(lap, z)))

        f_star = objective(res.estimate)
        for _ in range(20):
            direction = rng.standard_normal(20)
            direction *= 1e-4 / np.linalg.norm(direction)
            assert objective(res.estimate + direction) >= f_star - 1e-12


def test_reduced_laplacian_p4():
    lap = build_laplacian(path_graph(4))
    part = GroupPartition(4, [[0, 1], [2, 3]])
    red = build_reduced_laplacian(lap, part)
    np.testing.assert_allclose(red.matrix, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)


def test_reduced_laplacian_psd_and_constants():
    rng = np.random.default_rng(7)
    g = random_connected_graph(rng, 24)
    lap = build_laplacian(g)
    part = random_strict_partition(rng, 24, 6)
    red = build_reduced_laplacian(lap, part)
    for _ in range(20):
        z = rng.standard_normal(6)
        assert z @ red.apply(z) >= -1e-10
    # the lifted constant is in the null space of the reduced operator
    lifted_constant = group_average(np.ones(24), part)
    assert np.abs(red.apply(lifted_constant)).max() <= 1e-10


def test_reduced_laplacian_matches_triple_product():
    rng = np.random.default_rng(8)
    g = random_connected_graph(rng, 18)
    lap = build_laplacian(g)
    part = random_strict_partition(rng, 18, 5)
    red = build_reduced_laplacian(lap, part)
    a = np.zeros((5, 18))
    for i in range(18):
        e = np.zeros(18)
        e[i] = 1.0
        a[:, i] = group_average(e, part)
    oracle = a @ lap.dense() @ a.T
    np.testing.assert_allclose(red.matrix, oracle, atol=1e-10)


def test_reduced_laplacian_rejects_overlap():
    lap = build_laplacian(path_graph(3))
    part = GroupPartition(3, [[0, 1], [1, 2]])
    with pytest.raises(ValueError, match="non-overlapping"):
        build_reduced_laplacian(lap, part)


def test_fast_decode_piecewise_constant_consistency():
    lap, part = two_component_fixture()
    # groups refine the components, so component indicators are piecewise constant
    x = np.concatenate([np.full(6, 2.0), np.full(6, -1.0)])
    dist = uniform_distribution(part.N)
    omega = np.array([0, 1, 2, 3])  # every group sampled once
    draw = draw_groups(dist, 4, 0, part)
    draw = type(draw)(omega=omega, probs=dist.probs, m=int(part.sizes[omega].sum()))
    ops = assemble_sample_operators(part, dist.probs, draw)
    y_tilde = ops.apply_a_tilde(ops.apply_m(x))
    red = build_reduced_laplacian(lap, part)
    res = fast_decode(red, ops, y_tilde, gamma=1e-8, tol=1e-12, max_iter=2000)
    assert res.reduced.shape == (part.N,)
    assert np.linalg.norm(res.estimate - x) <= 1e-6 * np.linalg.norm(x)


def test_fast_decode_zero():
    lap, part = two_component_fixture()
    dist = uniform_distribution(part.N)
    draw = draw_groups(dist, 5, 2, part)
    ops = assemble_sample_operators(part, dist.probs, draw)
    red = build_reduced_laplacian(lap, part)
    res = fast_decode(red, ops, np.zeros(ops.s), gamma=1e-4)
    assert (res.reduced == 0).all()


def test_fast_matches_full_on_piecewise_bandlimited():
    lap, part = two_component_fixture()
    x = np.concatenate([np.full(6, 1.5), np.full(6, 0.25)])
    dist = uniform_distribution(part.N)
    draw = draw_groups(dist, 8, 4, part)
    ops = assemble_sample_operators(part, dist.probs, draw)
    y = ops.apply_m(x)
    y_tilde = ops.apply_a_tilde(y)
    g = SmoothnessFilter.identity()
    tol = 1e-12
    red = build_reduced_laplacian(lap, part)
    res_fast = fast_decode(red, ops, y_tilde, gamma=1e-9, tol=tol, max_iter=5000)
    res_full = full_decode(lap, g, ops, y, gamma=1e-9, tol=tol, max_iter=5000)
    assert np.linalg.norm(res_fast.estimate - res_full.estimate) <= 1e-5


def test_constrained_all_selected():
    rng = np.random.default_rng(9)
    q = np.diag(rng.uniform(0.5, 2.0, size=6))
    values = rng.standard_normal(6)
    res = constrained_decode(lambda z: q @ z, 6, np.arange(6), values)
    np.testing.assert_array_equal(res.estimate, values)


def kkt_oracle(q_dense, idx, vals):
    dim = q_dense.shape[0]
    c = np.zeros((idx.size, dim))
    c[np.arange(idx.size), idx] = 1.0
    kkt = np.block([[2 * q_dense, c.T], [c, np.zeros((idx.size, idx.size))]])
    rhs = np.concatenate([np.zeros(dim), vals])
    sol = np.linalg.solve(kkt, rhs)
    return sol[:dim]


def test_constrained_matches_kkt_oracle():
    rng = np.random.default_rng(10)
    for trial in range(5):
        lap = build_laplacian(random_connected_graph(rng, 15))
        q_dense = lap.dense()
        idx = np.unique(rng.integers(15, size=5))
        vals = rng.standard_normal(idx.size)
        res = constrained_decode(
            lambda z: lap.apply(z), 15, idx, vals, tol=1e-12, max_iter=20000, seed=trial
        )
        oracle = kkt_oracle(q_dense, idx, vals)
        assert np.linalg.norm(res.estimate - oracle) <= 1e-5 * max(1.0, np.linalg.norm(oracle))


def test_constrained_objective_monotone():
    rng = np.random.default_rng(11)
    lap = build_laplacian(random_connected_graph(rng, 20))
    idx = np.array([0, 5, 9])
    vals = np.array([1.0, -2.0, 0.5])
    trace = []
    constrained_decode(lambda z: lap.apply(z), 20, idx, vals, trace=trace, max_iter=500)
    diffs = np.diff(np.array(trace))
    assert (diffs <= 1e-12).all()


def test_dedupe_constraints():
    idx, vals = dedupe_constraints([3, 1, 3], [2.0, 1.0, 2.0 + 1e-12])
    np.testing.assert_array_equal(idx, [1, 3])
    np.testing.assert_allclose(vals, [1.0, 2.0], atol=1e-9)
    with pytest.raises(InfeasibleConstraintsError):
        dedupe_constraints([3, 1, 3], [2.0, 1.0, 2.5])


def test_split_projections():
    lap = build_laplacian(path_graph(4))
    basis = dense_spectrum(lap, 2)
    full = dense_spectrum(lap, 4)
    rng = np.random.default_rng(12)
    inband = basis.vectors @ rng.standard_normal(2)
    alpha, beta = split_projections(inband, basis)
    assert np.linalg.norm(beta) <= 1e-10
    alpha, beta = split_projections(full.vectors[:, 2], basis)
    assert np.linalg.norm(alpha) <= 1e-10
    x = rng.standard_normal(4)
    alpha, beta = split_projections(x, basis)
    assert np.linalg.norm(alpha) ** 2 + np.linalg.norm(beta) ** 2 == pytest.approx(
        np.linalg.norm(x) ** 2, abs=1e-10
    )
    assert abs(alpha @ beta) <= 1e-10


def test_decode_error_bounds_limits():
    base = dict(s=10, delta=0.5, gamma=1.0, g_lambda_k=0.0, g_lambda_k1=2.0,
                g_lambda_n=4.0, m_max=3.0, epsilon=0.0, x_norm=1.0, weighted_noise_norm=0.0)
    alpha, beta = decode_error_bounds(BoundInputs(**base))
    assert alpha == 0.0 and beta == 0.0
    noisy = dict(base, weighted_noise_norm=0.7)
    _, beta = decode_error_bounds(BoundInputs(**noisy))
    assert beta == pytest.approx(0.7 / np.sqrt(1.0 * 2.0))
    with pytest.raises(ValueError):
        decode_error_bounds(BoundInputs(**dict(base, g_lambda_k1=0.0)))


def test_m_max_is_valid_operator_bound():
    rng = np.random.default_rng(13)
    for _ in range(5):
        n = int(rng.integers(10, 30))
        part = random_strict_partition(rng, n, 5)
        probs = np.full(5, 0.2)
        dist = SamplingDistribution(probs, "custom")
        draw = draw_groups(dist, 7, int(rng.integers(1000)), part)
        ops = assemble_sample_operators(part, probs, draw)
        m_max = ops.m_max()
        for _ in range(100):
            x = rng.standard_normal(n)
            assert np.linalg.norm(ops.apply_pm(x)) <= m_max * np.linalg.norm(x) + 1e-9


def test_save_decode_result(tmp_path):
    lap, part = two_component_fixture()
    dist = uniform_distribution(part.N)
    draw = draw_groups(dist, 3, 1, part)
    ops = assemble_sample_operators(part, dist.probs, draw)
    res = full_decode(lap, SmoothnessFilter.identity(), ops, np.zeros(ops.m), gamma=1e-3)
    out = tmp_path / "estimate.csv"
    save_decode_result(res, out)
    assert out.exists()
    meta = (tmp_path / "estimate.csv.meta.txt").read_text()
    assert "iterations=0" in meta
