import math

import numpy as np
import pytest
from hypothesis import given, settings

from ecce_select import canonical_sort, cumulative_curve, make_prediction_set
from ecce_select.errors import Empty, InvalidLabel, LengthMismatch, NotSorted, OutOfRangeScore

from conftest import prediction_sets


def test_make_prediction_set_keeps_order():
    ps = make_prediction_set([0.2, 0.7], [0, 1])
    assert ps.n == 2
    assert ps.scores.tolist() == [0.2, 0.7]
    assert not ps.sorted_flag


@pytest.mark.parametrize(
    "scores, labels, err",
    [
        ([0.2], [0, 1], LengthMismatch),
        ([1.2], [1], OutOfRangeScore),
        ([-0.1], [0], OutOfRangeScore),
        ([float("nan")], [0], OutOfRangeScore),
        ([float("inf")], [1], OutOfRangeScore),
        ([0.5], [2], InvalidLabel),
        ([0.5], [0.5], InvalidLabel),
        ([], [], Empty),
    ],
)
def test_make_prediction_set_rejects(scores, labels, err):
    with pytest.raises(err):
        make_prediction_set(scores, labels)


def test_arrays_are_read_only():
    ps = make_prediction_set([0.2, 0.7], [0, 1])
    with pytest.raises(ValueError):
        ps.scores[0] = 0.5


@pytest.mark.parametrize(
    "scores, labels, want_scores, want_labels",
    [
        ([0.9, 0.1], [1, 0], [0.1, 0.9], [0, 1]),
        ([0.5, 0.5], [1, 0], [0.5, 0.5], [0, 1]),
        ([0.3, 0.3, 0.3], [1, 0, 1], [0.3, 0.3, 0.3], [0, 1, 1]),
    ],
)
def test_canonical_sort_examples(scores, labels, want_scores, want_labels):
    ps = canonical_sort(make_prediction_set(scores, labels))
    assert ps.sorted_flag
    assert ps.scores.tolist() == want_scores
    assert ps.labels.tolist() == want_labels


def test_canonical_sort_index_breaks_remaining_ties():
    ps = canonical_sort(make_prediction_set([0.4, 0.4, 0.4], [1, 1, 1]))
    assert ps.index.tolist() == [0, 1, 2]


def test_cumulative_curve_worked_example(worked_example):
    curve = cumulative_curve(canonical_sort(worked_example))
    assert curve.n == 4
    np.testing.assert_allclose(curve.values, [0, -0.025, 0.125, -0.025, 0.0], rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "scores, labels, want",
    [([0, 1], [0, 1], [0, 0, 0]), ([0.5], [1], [0, 0.5])],
)
def test_cumulative_curve_trivial(scores, labels, want):
    curve = cumulative_curve(canonical_sort(make_prediction_set(scores, labels)))
    assert curve.values.tolist() == want


def test_cumulative_curve_requires_sorted():
    with pytest.raises(NotSorted):
        cumulative_curve(make_prediction_set([0.9, 0.1], [1, 0]))


@given(prediction_sets())
def test_sort_is_idempotent_permutation(ps):
    once = canonical_sort(ps)
    twice = canonical_sort(once)
    assert np.array_equal(once.scores, twice.scores)
    assert np.array_equal(once.labels, twice.labels)
    before = sorted(zip(ps.scores.tolist(), ps.labels.tolist()))
    after = sorted(zip(once.scores.tolist(), once.labels.tolist()))
    assert before == after
    assert np.all(np.diff(once.scores) >= 0)


@given(prediction_sets())
def test_curve_invariants(ps):
    s = canonical_sort(ps)
    curve = cumulative_curve(s)
    v = curve.values
    assert v.shape == (ps.n + 1,) and v[0] == 0
    assert np.all(np.abs(v) <= 1)
    steps = (s.labels - s.scores) / ps.n
    np.testing.assert_allclose(np.diff(v), steps, rtol=0, atol=1e-12)
    total = (math.fsum(ps.labels.tolist()) - math.fsum(ps.scores.tolist())) / ps.n
    assert abs(v[-1] - total) <= 1e-12


@settings(max_examples=30)
@given(prediction_sets())
def test_curve_end_independent_of_input_order(ps):
    rng = np.random.default_rng(ps.n)
    perm = rng.permutation(ps.n)
    shuffled = make_prediction_set(ps.scores[perm], ps.labels[perm])
    a = cumulative_curve(canonical_sort(ps)).values
    b = cumulative_curve(canonical_sort(shuffled)).values
    assert np.array_equal(a, b)


def test_curve_accurate_at_large_n():
    # correctly rounded partial sums at a few checkpoints
    rng = np.random.default_rng(11)
    n = 1_000_000
    ps = canonical_sort(make_prediction_set(rng.random(n), rng.integers(0, 2, n)))
    values = cumulative_curve(ps).values
    for k in (1, 1000, 123_457, n):
        exact = (math.fsum(ps.labels[:k].tolist()) - math.fsum(ps.scores[:k].tolist())) / n
        assert abs(values[k] - exact) <= 1e-12
