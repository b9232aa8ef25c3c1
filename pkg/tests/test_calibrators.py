import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecce_select import log_loss, make_prediction_set
from ecce_select.calibrators import (
    Calibrator,
    Kind,
    apply,
    fit,
    fit_isotonic,
    fit_platt,
    fit_spline,
    identity,
    isotonic_fitted_values,
    natural_cubic_basis,
    pava,
)
from ecce_select.errors import NoConverge, OneClassOnly, TooFewPoints

from conftest import prediction_sets
from oracles import monotone_lsq_bruteforce


def calibrated_set(n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.random(n)
    return make_prediction_set(s, rng.random(n) < s)


# -- isotonic -----------------------------------------------------------------

def test_pava_example():
    xs, fitted = isotonic_fitted_values(make_prediction_set([0.1, 0.2, 0.3], [1, 0, 1]))
    assert xs.tolist() == [0.1, 0.2, 0.3]
    assert fitted.tolist() == [0.5, 0.5, 1.0]


def test_pava_no_violations_returns_labels():
    _, fitted = isotonic_fitted_values(make_prediction_set([0.1, 0.5, 0.6, 0.9], [0, 0, 1, 1]))
    assert fitted.tolist() == [0, 0, 1, 1]


@pytest.mark.parametrize("c", [0, 1])
def test_isotonic_constant_labels(c):
    cal = fit_isotonic(make_prediction_set([0.1, 0.4, 0.8], [c, c, c]))
    assert np.all(cal.apply(np.linspace(0, 1, 21)) == c)


def test_isotonic_apply_interpolates_and_clamps():
    cal = fit_isotonic(make_prediction_set([0.1, 0.2, 0.3], [1, 0, 1]))
    assert apply(cal, [0.25])[0] == pytest.approx(0.75, abs=1e-15)
    assert apply(cal, [0.05])[0] == 0.5
    assert apply(cal, [0.95])[0] == 1.0


def test_isotonic_pools_tied_scores():
    cal = fit_isotonic(make_prediction_set([0.5, 0.5, 0.5, 0.9], [1, 0, 0, 1]))
    assert cal.apply([0.5])[0] == pytest.approx(1 / 3)


# quarter-integer targets: competing partitions differ in SSE by far more
# than float resolution, so the enumeration picks the true optimum
@settings(max_examples=200)
@given(st.lists(st.integers(-20, 20).map(lambda k: k / 4), min_size=1, max_size=8))
def test_pava_matches_bruteforce(y):
    np.testing.assert_allclose(pava(y), monotone_lsq_bruteforce(y), rtol=0, atol=1e-12)


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.1, 5)), min_size=1, max_size=40))
def test_weighted_pava_is_monotone_and_preserves_mass(pairs):
    y, w = map(np.array, zip(*pairs))
    fit_ = pava(y, w)
    assert np.all(np.diff(fit_) >= -1e-12)
    assert np.sum(w * fit_) == pytest.approx(np.sum(w * y), abs=1e-9)


@given(prediction_sets(max_n=80), st.lists(st.floats(0, 1), min_size=2, max_size=20))
def test_isotonic_apply_monotone(ps, xs):
    cal = fit_isotonic(ps)
    out = cal.apply(np.sort(xs))
    assert np.all(np.diff(out) >= 0)
    assert np.all(np.diff(cal.parameters["values"]) >= 0)


def test_isotonic_breakpoint_compression_is_lossless():
    ps = calibrated_set(3000, seed=4)
    xs, fitted = isotonic_fitted_values(ps)
    cal = fit_isotonic(ps)
    assert len(cal.parameters["breakpoints"]) < len(xs)
    np.testing.assert_array_equal(cal.apply(xs), fitted)


# -- Platt --------------------------------------------------------------------

def test_platt_uninformative_scores_give_half():
    rng = np.random.default_rng(1)
    n = 10_000
    y = np.repeat([0, 1], n // 2)
    ps = make_prediction_set(rng.random(n), y)
    cal = fit_platt(ps)
    assert np.max(np.abs(cal.apply(np.linspace(0, 1, 101)) - 0.5)) < 0.02


def test_platt_one_class():
    with pytest.raises(OneClassOnly):
        fit_platt(make_prediction_set([0.2, 0.5, 0.9], [1, 1, 1]))


def test_platt_on_calibrated_data_costs_little():
    ps = calibrated_set()
    cal = fit_platt(ps)
    assert log_loss(ps.with_scores(cal.apply(ps.scores))) <= log_loss(ps) + 0.01


def test_platt_recovers_sigmoid():
    rng = np.random.default_rng(2)
    s = rng.random(50_000)
    y = rng.random(50_000) < 1 / (1 + np.exp(-(6 * s - 2)))
    cal = fit_platt(make_prediction_set(s, y))
    assert cal.parameters["slope"] == pytest.approx(6, abs=0.3)
    assert cal.parameters["intercept"] == pytest.approx(-2, abs=0.15)


def test_platt_negative_slope_is_flagged():
    ps = make_prediction_set([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [1, 1, 0, 1, 0, 0])
    cal = fit_platt(ps)
    assert cal.parameters["slope"] < 0
    assert cal.parameters["negative_slope"] is True
    out = cal.apply(np.linspace(0, 1, 11))
    assert np.all(np.diff(out) < 0)


def test_platt_separable_data_stays_finite():
    cal = fit_platt(make_prediction_set([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]))
    assert np.isfinite(cal.parameters["slope"])
    # smoothed targets bound the fit away from 0 and 1
    assert 0.2 < cal.apply([0.1])[0] < 0.4


def test_platt_iteration_cap_raises():
    with pytest.raises(NoConverge):
        fit_platt(calibrated_set(1000), max_iter=1)


@given(prediction_sets(max_n=50))
def test_platt_strictly_monotone(ps):
    if ps.labels.min() == ps.labels.max():
        return
    cal = fit_platt(ps)
    out = cal.apply(np.linspace(0, 1, 50))
    a = cal.parameters["slope"]
    if a > 1e-3:
        assert np.all(np.diff(out) > 0)
    elif a < -1e-3:
        assert np.all(np.diff(out) < 0)


# -- spline -------------------------------------------------------------------

def test_natural_basis_linear_outside_boundary_knots():
    knots = [0.2, 0.4, 0.5, 0.7, 0.8]
    x = np.array([0.85, 0.9, 0.95, 1.0])
    B = natural_cubic_basis(x, knots)
    second = B[2:] - 2 * B[1:-1] + B[:-2]
    np.testing.assert_allclose(second, 0, atol=1e-12)
    x = np.array([0.0, 0.05, 0.1, 0.15])
    B = natural_cubic_basis(x, knots)
    np.testing.assert_allclose(B[2:] - 2 * B[1:-1] + B[:-2], 0, atol=1e-12)
    assert B.shape[1] == len(knots) - 1


def test_spline_on_calibrated_data_costs_little():
    ps = calibrated_set()
    cal = fit_spline(ps)
    assert log_loss(ps.with_scores(cal.apply(ps.scores))) <= log_loss(ps) + 0.01


def test_spline_fixes_overconfidence():
    rng = np.random.default_rng(3)
    p = rng.random(10_000)
    s = 1 / (1 + np.exp(-2 * np.log(p / (1 - p))))
    ps = make_prediction_set(s, rng.random(10_000) < p)
    cal = fit_spline(ps)
    assert log_loss(ps.with_scores(cal.apply(s))) < log_loss(ps) - 0.03


def test_spline_errors():
    with pytest.raises(OneClassOnly):
        fit_spline(make_prediction_set(np.linspace(0, 1, 20), [0] * 20))
    with pytest.raises(TooFewPoints):
        fit_spline(make_prediction_set([0.1, 0.5, 0.9] * 5, [0, 1, 1] * 5))
    with pytest.raises(TooFewPoints):
        fit_spline(make_prediction_set(np.linspace(0, 1, 9), [0, 1] * 4 + [0]))


def test_spline_heavy_ties_still_fit():
    s = np.r_[np.full(200, 0.5), np.linspace(0, 1, 20)]
    y = np.r_[np.tile([0, 1], 100), np.tile([0, 1], 10)]
    cal = fit_spline(make_prediction_set(s, y))
    assert np.all(np.diff(cal.parameters["knots"]) > 0)


def test_spline_output_clamped():
    cal = fit_spline(make_prediction_set(np.linspace(0, 1, 40), [0] * 20 + [1] * 20))
    out = cal.apply(np.linspace(0, 1, 101))
    assert out.min() >= 1e-6 and out.max() <= 1 - 1e-6


def test_spline_deterministic_in_seed():
    ps = calibrated_set(2000, seed=9)
    a, b = fit_spline(ps, seed=5), fit_spline(ps, seed=5)
    assert a.to_json() == b.to_json()


# -- shared contracts ---------------------------------------------------------

def test_identity_is_exact():
    assert identity().apply([0.3, 0.8]).tolist() == [0.3, 0.8]


@settings(max_examples=40, deadline=None)
@given(prediction_sets(max_n=60, scores=st.floats(0, 1)))
def test_outputs_stay_in_unit_interval(ps):
    xs = np.linspace(0, 1, 33)
    kinds = [Kind.IDENTITY, Kind.ISOTONIC]
    if 0 < ps.labels.sum() < ps.n:
        kinds.append(Kind.PLATT)
        if ps.n >= 10 and len(np.unique(ps.scores)) >= 6:
            kinds.append(Kind.SPLINE)
    for k in kinds:
        out = fit(k, ps).apply(xs)
        assert np.all((out >= 0) & (out <= 1))


@pytest.mark.parametrize("kind", [Kind.IDENTITY, Kind.PLATT, Kind.ISOTONIC, Kind.SPLINE])
def test_json_round_trip(kind):
    ps = calibrated_set(3000, seed=8)
    cal = fit(kind, ps)
    doc = json.loads(cal.to_json())
    assert set(doc) == {"kind", "parameters", "fitted_on_n", "library_version"}
    back = Calibrator.from_json(cal.to_json())
    assert back.kind is cal.kind and back.fitted_on_n == cal.fitted_on_n == 3000
    assert back.parameters == cal.parameters
    xs = np.linspace(0, 1, 101)
    np.testing.assert_array_equal(back.apply(xs), cal.apply(xs))
