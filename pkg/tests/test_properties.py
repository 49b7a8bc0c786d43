"""Randomized properties of the GP state, consensus weights and the BR distance."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from coopmap.consensus import ConsensusState, centralized_poe, consensus_step, recover_map, reference_input
from coopmap.gp_core import (
    Dataset,
    GaussianMap,
    KernelSpec,
    Observation,
    OnlineGP,
    batch_predict,
    build_state,
    recursive_predict,
    remove_point,
)
from coopmap.network_sim import graph_from_positions, weights_from_graph
from coopmap.sparsify import br_distance

SPEC = KernelSpec(1.0, (0.8, 1.2), 0.1)

points = st.lists(
    st.tuples(st.floats(0, 5), st.floats(0, 5), st.floats(-3, 3)),
    min_size=3, max_size=15,
    unique_by=lambda t: (round(t[0], 1), round(t[1], 1)),
)


def to_data(rows):
    return Dataset([Observation([x, y], v) for x, y, v in rows])


@settings(max_examples=40, deadline=None)
@given(points, st.data())
def test_remove_equals_rebuild(rows, draw):
    data = to_data(rows)
    state = build_state(data, SPEC)
    k = draw.draw(st.integers(0, len(data) - 1))
    reduced, rest = remove_point(state, data, k)
    grid = np.array([[1.0, 1.0], [2.5, 4.0]])
    got = recursive_predict(reduced, rest, SPEC, grid)
    ref = batch_predict(rest, SPEC, grid)
    np.testing.assert_allclose(got.mean, ref.mean, atol=1e-7)
    np.testing.assert_allclose(got.variance, ref.variance, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(points)
def test_posterior_variance_within_prior(rows):
    gp = OnlineGP(SPEC)
    gp.extend(to_data(rows).observations)
    v = gp.predict(np.random.default_rng(0).uniform(0, 5, size=(30, 2))).variance
    assert np.all(v > -1e-9) and np.all(v <= SPEC.signal_variance + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=2, max_size=6), st.floats(0.5, 5))
def test_weights_doubly_stochastic(pos, rng_):
    g = graph_from_positions(pos, rng_)
    w = 1.0 / len(pos)
    A = weights_from_graph(g, w).weights
    np.testing.assert_allclose(A.sum(0), 1.0, atol=1e-12)
    np.testing.assert_allclose(A.sum(1), 1.0, atol=1e-12)
    assert np.all(A >= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_consensus_preserves_network_sum(p, seed):
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 1, 4)
    maps = [GaussianMap(grid, rng.normal(size=4), rng.uniform(0.1, 1, size=4)) for _ in range(p)]
    refs = [reference_input(m, 0.1) for m in maps]
    states = [ConsensusState.from_reference(r) for r in refs]
    g = graph_from_positions(rng.uniform(0, 2, size=(p, 1)), 1.0)
    A = weights_from_graph(g, 1.0 / p).weights
    for _ in range(5):
        snap = list(states)
        states = [consensus_step(snap[i], [snap[j] for j in g.neighbors(i)], A[i, g.neighbors(i)], refs[i])
                  for i in range(p)]
    total = sum(s.xi_precision_term for s in states)
    np.testing.assert_allclose(total, sum(r[1] for r in refs), rtol=1e-10)
    # the PoE fixed point is an average, so its mean lies inside the local range
    poe = centralized_poe(maps, 0.1)
    lo = np.min([m.mean for m in maps], 0)
    hi = np.max([m.mean for m in maps], 0)
    assert np.all(poe.mean >= lo - 1e-12) and np.all(poe.mean <= hi + 1e-12)
    assert recover_map(states[0]).mean.shape == (4,)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.05, 4), st.floats(-3, 3), st.floats(0.05, 4)),
                min_size=1, max_size=10))
def test_br_distance_symmetric_nonnegative(rows):
    arr = np.array(rows)
    grid = np.arange(len(rows), dtype=float)
    a = GaussianMap(grid, arr[:, 0], arr[:, 1])
    b = GaussianMap(grid, arr[:, 2], arr[:, 3])
    d = br_distance(a, b)
    assert d >= 0
    assert np.isclose(d, br_distance(b, a))
    assert br_distance(a, a) == 0.0
