import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unhap import ConfigError, DataError, EventSequence, builtin_mark_model, discretize_events
from unhap.events import TIE_EPS
from unhap.grid import dense, weighted_vector


def test_from_unsorted_sorts_and_carries_labels():
    seq = EventSequence.from_unsorted([[3.0, 1.0, 2.0]], [[0.3, 0.1, 0.2]], 5.0, [[1, 0, 1]], [[2, -1, 0]])
    np.testing.assert_array_equal(seq.times[0], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(seq.marks[0], [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(seq.labels[0], [0, 1, 1])
    np.testing.assert_array_equal(seq.gens[0], [-1, 0, 2])
    assert seq.n_events() == 3 and seq.D == 1
    assert seq.events(0)[0].label == 0


def test_exact_ties_are_pushed_forward():
    seq = EventSequence.from_unsorted([[1.0, 1.0, 1.0]], [[0.1, 0.2, 0.3]], 2.0)
    np.testing.assert_allclose(seq.times[0], [1.0, 1.0 + TIE_EPS, 1.0 + 2 * TIE_EPS])
    assert np.all(np.diff(seq.times[0]) > 0)


def test_sequence_validation():
    with pytest.raises(DataError):
        EventSequence([[1.0]], [[0.1]], 0.0)
    with pytest.raises(DataError):
        EventSequence([[1.0, 2.0]], [[0.1]], 5.0)


def _hand_sequence():
    times = [0.04, 0.06, 0.14, 0.16, 0.96, 1.0]
    marks = [0.5, 0.25, 0.2, 0.8, 1.0, 0.5]
    return EventSequence.from_unsorted([times], [marks], 1.0)


def test_projection_merges_events_sharing_a_node():
    dseq = discretize_events(_hand_sequence(), 0.1, builtin_mark_model("identity-linear"))
    g = dseq.types[0]
    assert dseq.G == 10
    np.testing.assert_array_equal(g.bins, [0, 1, 2, 10])
    np.testing.assert_array_equal(g.event_to_pseudo, [0, 1, 1, 2, 3, 3])
    assert g.n_merged == 2 and dseq.n_merged == 2
    # omega = kappa, f1 = 2 kappa, f0 = 2 - 2 kappa, summed per node
    np.testing.assert_allclose(g.weights, [0.5, 0.45, 0.8, 1.5])
    np.testing.assert_allclose(g.f1, [1.0, 0.9, 1.6, 3.0])
    np.testing.assert_allclose(g.f0, [1.0, 3.1, 0.4, 1.0])
    np.testing.assert_allclose(g.kappa, [0.5, (0.25 ** 2 + 0.2 ** 2) / 0.45, 0.8, 1.25 / 1.5])
    assert g.z[1] == pytest.approx(0.45) and g.z[5] == 0 and len(g.z) == 11


def test_weighted_and_dense_vectors():
    dseq = discretize_events(_hand_sequence(), 0.1, builtin_mark_model("identity-linear"))
    zt = weighted_vector(dseq, [np.array([1.0, 0.5, 0.0, 1.0])], 0)
    np.testing.assert_allclose(zt[[0, 1, 2, 10]], [0.5, 0.225, 0.0, 1.5])
    assert zt.sum() == pytest.approx(2.225)
    np.testing.assert_array_equal(dense(dseq, [1, 2, 3, 4], 0)[[0, 1, 2, 10]], [1, 2, 3, 4])
    with pytest.raises(DataError):
        weighted_vector(dseq, [np.ones(3)], 0)


def test_events_past_last_node_are_clamped():
    seq = EventSequence.from_unsorted([[0.99, 1.04]], [[1.0, 1.0]], 1.04)
    dseq = discretize_events(seq, 0.1, builtin_mark_model("unmarked"))
    assert dseq.G == 10
    np.testing.assert_array_equal(dseq.types[0].bins, [10])


def test_grid_step_validation():
    seq = _hand_sequence()
    mm = builtin_mark_model("unmarked")
    with pytest.raises(ConfigError):
        discretize_events(seq, 0.0, mm)
    with pytest.raises(ConfigError):
        discretize_events(seq, 1.0, mm)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=40), st.sampled_from([0.01, 0.1, 0.5]))
def test_projection_conserves_mass(times, delta):
    rng = np.random.default_rng(len(times))
    mm = builtin_mark_model("identity-linear")
    marks = rng.uniform(0, 1, len(times))
    seq = EventSequence.from_unsorted([times], [marks], 10.0)
    g = discretize_events(seq, delta, mm).types[0]
    assert g.weights.sum() == pytest.approx(marks.sum())
    assert g.f1.sum() == pytest.approx(2 * marks.sum())
    assert g.n + g.n_merged == len(times)
    assert np.all(np.diff(g.bins) > 0)
    # every event sits within half a step of its node, unless clamped to the last one
    node_t = g.bins[g.event_to_pseudo] * delta
    assert np.all((np.abs(node_t - seq.times[0]) <= delta / 2 + 1e-9) | (g.bins[g.event_to_pseudo] == g.bins[-1]))
