import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal.drift_catalog import (
    DiscontinuousSqrt,
    Linear,
    PowerLaw,
    Reflected,
    TabulatedPiecewise,
    Transform,
    Zero,
    check_hypotheses,
    default_hypothesis_grid,
    drift_from_dict,
    eval_drift,
    eval_drift_right_derivative,
    power_transform,
)
from extremal.errors import MissingTransform, UndefinedDerivative

CATALOG = [
    PowerLaw(0.5),
    PowerLaw(0.2),
    DiscontinuousSqrt(),
    Linear(2.0),
    Zero(),
    TabulatedPiecewise.cubic_with_tails(0.5, 0.1, 2.0),
]


def test_eval_examples():
    assert eval_drift(PowerLaw(0.5), 4.0) == 2.0
    assert eval_drift(DiscontinuousSqrt(), -1.0) == 2.0
    assert eval_drift(PowerLaw(0.5), 0.0) == 0.0
    assert eval_drift(DiscontinuousSqrt(), 9.0) == 3.0


def test_power_law_exact_on_grid():
    xs = np.linspace(-5, 5, 101)
    np.testing.assert_array_equal(PowerLaw(0.3)(xs), np.abs(xs) ** 0.3)


def test_right_derivative_examples():
    assert float(eval_drift_right_derivative(PowerLaw(0.5), 1.0).value) == pytest.approx(0.5)
    probe = eval_drift_right_derivative(PowerLaw(0.5), 0.0)
    assert probe.is_infinite
    assert float(eval_drift_right_derivative(Linear(2.0), 3.0).value) == 2.0


def test_infinite_derivative_is_flagged_not_a_float():
    vals, inf = PowerLaw(0.5).right_derivative(np.array([0.0, 1.0]))
    assert inf.tolist() == [True, False]
    assert np.all(np.isfinite(vals))


def test_tabulated_kink_without_limit_raises():
    b = TabulatedPiecewise((0.0,), ((0.0, -1.0), (0.0, 1.0)))
    with pytest.raises(UndefinedDerivative):
        b.right_derivative(np.array([0.0]))
    # away from the kink the derivative is the local slope
    vals, _ = b.right_derivative(np.array([-1.0, 1.0]))
    assert vals.tolist() == [-1.0, 1.0]


def test_tabulated_declared_kink_limit():
    b = TabulatedPiecewise((0.0,), ((0.0, -1.0), (0.0, 1.0)), kink_limits=((0.0, 1.0),))
    vals, _ = b.right_derivative(np.array([0.0]))
    assert vals[0] == 1.0


def test_cubic_with_tails_values():
    b = TabulatedPiecewise.cubic_with_tails(0.5, 0.1, 2.0)
    np.testing.assert_allclose(b(np.array([-3.0, -2.0, 0.0, 2.0, 3.0])), [-3.5, -1.8, 0.0, 1.8, 3.5])


@pytest.mark.parametrize("b", CATALOG, ids=lambda b: b.kind)
def test_h1_for_catalog(b):
    assert b(0.0) == 0.0 or isinstance(b, DiscontinuousSqrt)


@pytest.mark.parametrize("b", CATALOG, ids=lambda b: b.kind)
@settings(max_examples=200, deadline=None)
@given(x=st.floats(-1e6, 1e6, allow_nan=False))
def test_linear_growth_bound(b, x):
    assert abs(b(x)) <= b.growth_constant * (1.0 + abs(x)) * (1 + 1e-12)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("x", [0.3, 1.0, 2.5])
def test_power_law_derivative_matches_difference_quotient(alpha, x):
    b = PowerLaw(alpha)
    exact = float(eval_drift_right_derivative(b, x).value)
    errs = [abs((b(x + d) - b(x)) / d - exact) for d in (1e-4, 1e-5)]
    assert errs[0] < 1e-3
    assert 5.0 < errs[0] / errs[1] < 20.0


def test_hypotheses_power_law_basic():
    rep = check_hypotheses(PowerLaw(0.5), {"H1", "H2", "H3", "H4", "H5"}, default_hypothesis_grid())
    assert rep.all_hold()


def test_h4_discontinuous():
    rep = check_hypotheses(DiscontinuousSqrt(), {"H4"}, default_hypothesis_grid())
    assert rep["H4"].holds


def test_h9_power_law_with_two_sqrt():
    h = Transform(lambda x: 2.0 * np.sqrt(x), lambda x: 1.0 / np.sqrt(x), "2 sqrt x")
    rep = check_hypotheses(PowerLaw(0.5), {"H9"}, np.linspace(1e-3, 0.999, 1000), h)
    assert rep["H9"].holds


def test_h8_h9_need_transform():
    with pytest.raises(MissingTransform):
        check_hypotheses(PowerLaw(0.5), {"H9"}, np.linspace(0.01, 1, 10))


def test_tabulated_grid_check_fails_and_supergrid_also_fails():
    # decreasing on (0, 1): H2 must fail
    b = TabulatedPiecewise((0.0, 1.0), ((0.0,), (0.0, -1.0), (-1.0,)))
    g = np.linspace(-2, 2, 41)
    assert not check_hypotheses(b, {"H2"}, g)["H2"].holds
    sup = np.union1d(g, np.linspace(-2, 2, 97))
    assert not check_hypotheses(b, {"H2"}, sup)["H2"].holds


def test_h2_on_grid_implies_pairwise_order():
    b = TabulatedPiecewise.cubic_with_tails(0.5, 0.1, 2.0)
    g = np.linspace(-4, 4, 801)
    if check_hypotheses(b, {"H2"}, g)["H2"].holds:
        pos = g[g > 0]
        assert np.all(np.diff(b(pos)) >= 0)


def test_reflected_identity():
    b = DiscontinuousSqrt()
    r = Reflected(b)
    xs = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(r(xs), -b(-xs))


@pytest.mark.parametrize("b", CATALOG, ids=lambda b: b.kind)
def test_dict_round_trip(b):
    again = drift_from_dict(b.to_dict())
    xs = np.linspace(-4, 4, 33)
    np.testing.assert_array_equal(again(xs), b(xs))


def test_power_transform_derivative():
    g = power_transform(0.5)
    xs = np.array([0.25, 1.0, 4.0])
    np.testing.assert_allclose(g.func(xs), 2 * np.sqrt(xs))
    np.testing.assert_allclose(g.derivative(xs), 1 / np.sqrt(xs))
    assert math.isclose(float(g.derivative(np.array([1.0]))[0] * PowerLaw(0.5)(1.0)), 1.0)
