import numpy as np
import pytest

from coopmap.gp_core import (
    Dataset,
    GaussianMap,
    KernelSpec,
    Observation,
    RecursiveState,
    batch_predict,
    build_state,
    kernel_matrix,
)
from coopmap.sparsify import (
    ScoringError,
    SparsityConfig,
    br_distance,
    compress,
    distributed_metric,
    leave_one_out_moments,
    leave_one_out_posterior,
    local_score,
    minmax,
)

SPEC = KernelSpec(1.0, (0.4,), 0.1)
GRID = np.linspace(0, 4, 41)


def toy_data(n=11, seed=0):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(0, 4, n))
    return Dataset([Observation([x], np.sin(2 * x) + 0.1 * rng.normal()) for x in xs])


def test_local_score_from_explicit_inverses():
    data = toy_data()
    st = build_state(data, SPEC)
    K = kernel_matrix(data.positions, data.positions, SPEC)
    alpha = np.linalg.solve(K + 0.1 * np.eye(len(data)), data.values)
    Qd = np.diag(np.linalg.inv(K))
    for k in range(len(data)):
        assert local_score(st, k) == pytest.approx(abs(alpha[k] / Qd[k]), rel=1e-6)


def test_local_score_degenerate():
    st = RecursiveState(np.ones(2), -np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ScoringError):
        local_score(st, 0)


def test_br_distance_hand_value():
    grid = [[0.0], [1.0]]
    a = GaussianMap(grid, [0.0, 1.0], [1.0, 1.0])
    b = GaussianMap(grid, [2.0, 1.0], [1.0, np.e ** 2])
    # mean term: 4 / 1 over point 0 -> 2; log term: |log(e^-2)| = 2
    vbar1 = 1.0
    expect = np.sqrt(4 / vbar1) + 2.0
    assert br_distance(a, b) == pytest.approx(expect)
    assert br_distance(a, a) == 0.0
    assert br_distance(a, b) == pytest.approx(br_distance(b, a))


def test_br_distance_rejects_bad_input():
    a = GaussianMap([[0.0]], [0.0], [1.0])
    with pytest.raises(ValueError):
        br_distance(a, GaussianMap([[0.0]], [0.0], [0.0]))
    with pytest.raises(ValueError):
        br_distance(a, GaussianMap([[0.0], [1.0]], [0.0, 0.0], [1.0, 1.0]))


def test_minmax():
    np.testing.assert_allclose(minmax([2.0, 4.0, 3.0]), [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(minmax([7.0, 7.0]), [0.5, 0.5])


def test_leave_one_out_moments_match_rebuild():
    data = toy_data()
    st = build_state(data, SPEC)
    mean, var = leave_one_out_moments(st, data, SPEC, GRID)
    for k in range(len(data)):
        ref = batch_predict(data.without(k), SPEC, GRID)
        np.testing.assert_allclose(mean[:, k], ref.mean, atol=1e-9)
        np.testing.assert_allclose(var[:, k], ref.variance, atol=1e-9)
        loo = leave_one_out_posterior(st, data, k, SPEC, GRID)
        np.testing.assert_allclose(loo.mean, ref.mean, atol=1e-9)


def test_fused_score_formula():
    data = toy_data()
    st = build_state(data, SPEC)
    dist = GaussianMap(GRID, np.sin(2 * GRID), np.full(len(GRID), 0.05))
    cfg = SparsityConfig(budget=10, k_phi=0.2)
    s = distributed_metric(data, st, dist, cfg, SPEC)
    d_ref = np.array([br_distance(dist, batch_predict(data.without(k), SPEC, GRID)) for k in range(len(data))])
    np.testing.assert_allclose(s.br_distance, d_ref, rtol=1e-8)
    expect = 0.2 * minmax(-d_ref) + 0.8 * minmax(s.local_score)
    np.testing.assert_allclose(s.fused, expect, atol=1e-9)
    inv = distributed_metric(data, st, dist, SparsityConfig(10, 0.2, br_sign="inverted"), SPEC)
    np.testing.assert_allclose(inv.fused, 0.2 * minmax(d_ref) + 0.8 * minmax(s.local_score), atol=1e-9)


def test_projection_mode_scores_by_loop():
    data = toy_data()
    st = build_state(data, SPEC)
    dist = GaussianMap(GRID, np.sin(2 * GRID), np.full(len(GRID), 0.05))
    s = distributed_metric(data, st, dist, SparsityConfig(10, removal_mode="projection"), SPEC)
    assert s.br_distance.shape == (len(data),)
    assert np.all(np.isfinite(s.fused) | (s.fused == np.inf))


def test_local_only_metric():
    data = toy_data()
    st = build_state(data, SPEC)
    s = distributed_metric(data, st, None, SparsityConfig(10), SPEC)
    assert s.br_distance is None
    np.testing.assert_allclose(s.fused, minmax(s.local_score))


def test_eval_grid_subset():
    data = toy_data()
    st = build_state(data, SPEC)
    dist = GaussianMap(GRID, np.sin(2 * GRID), np.full(len(GRID), 0.05))
    sub = GRID[::4]
    s = distributed_metric(data, st, dist, SparsityConfig(10, eval_grid=sub), SPEC)
    target = GaussianMap(sub, dist.mean[::4], dist.variance[::4])
    ref = [br_distance(target, batch_predict(data.without(k), SPEC, sub)) for k in range(len(data))]
    np.testing.assert_allclose(s.br_distance, ref, rtol=1e-8)
    with pytest.raises(ValueError, match="subset"):
        distributed_metric(data, st, dist, SparsityConfig(10, eval_grid=[0.05]), SPEC)


def test_compress_removes_lowest_score():
    data = toy_data()
    st = build_state(data, SPEC)
    cfg = SparsityConfig(budget=10)
    scores = distributed_metric(data, st, None, cfg, SPEC)
    new_data, new_state, k = compress(data, st, None, cfg, SPEC)
    assert k == int(np.argmin(scores.fused))
    assert len(new_data) == 10
    ref = build_state(new_data, SPEC)
    np.testing.assert_allclose(new_state.alpha, ref.alpha, atol=1e-9)


def test_compress_size_check():
    data = toy_data(5)
    with pytest.raises(ValueError):
        compress(data, build_state(data, SPEC), None, SparsityConfig(budget=10), SPEC)


def test_ranking_ties_lowest_index():
    from coopmap.sparsify import MetricScores
    s = MetricScores(np.zeros(4), None, np.array([0.3, 0.1, 0.1, 0.5]))
    assert s.ranking().tolist() == [1, 2, 0, 3]


def test_compress_skips_singular_candidate():
    data = toy_data(3)
    st = build_state(data, SPEC)
    # zero the pivot of point 0 only: its removal is singular
    C = st.c_mat.copy()
    C[0, 0] = 0.0
    alpha = st.alpha.copy()
    alpha[0] = 0.0  # lowest local score
    forged = RecursiveState(alpha, C, st.q_mat)
    _, _, k = compress(data, forged, None, SparsityConfig(budget=2), SPEC)
    assert k != 0


def test_config_validation():
    with pytest.raises(ValueError):
        SparsityConfig(budget=0)
    with pytest.raises(ValueError):
        SparsityConfig(budget=5, k_phi=1.0)
    with pytest.raises(ValueError):
        SparsityConfig(budget=5, br_sign="up")
