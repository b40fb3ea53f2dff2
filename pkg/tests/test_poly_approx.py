import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal.drift_catalog import DiscontinuousSqrt, Linear, PowerLaw
from extremal.errors import BadMode, DegreeExhausted
from extremal.poly_approx import (
    PiecewisePoly,
    ShiftMode,
    approximate,
    approximate_family,
    build_shifted,
    check_monotone_family,
    consecutive_epsilon,
    family_from_dict,
    family_growth_constant,
    family_to_dict,
    schedule_epsilon,
)

SMOOTHED = ShiftMode.SMOOTHED_DISCONTINUOUS


def test_epsilon_formulas():
    assert consecutive_epsilon(1) == 0.25
    assert consecutive_epsilon(3) == pytest.approx(1 / 24)
    assert schedule_epsilon(4, 5) == pytest.approx(consecutive_epsilon(4))
    assert schedule_epsilon(4, 8) == pytest.approx((1 / 4 - 1 / 8) / 2)


def test_build_shifted_examples():
    assert build_shifted(PowerLaw(0.5), 2, ShiftMode.MINUS_SHIFT)(4.0) == 1.5
    s = build_shifted(DiscontinuousSqrt(), 4, SMOOTHED)
    assert s(0.0) == -0.25
    assert s(-0.25) == pytest.approx(1.25)
    # both pieces agree at the junction
    assert -(4 + 2) * (-0.25) - 0.25 == pytest.approx(1.25)


def test_bad_modes():
    with pytest.raises(BadMode):
        build_shifted(PowerLaw(0.5), 2, SMOOTHED)
    with pytest.raises(BadMode):
        build_shifted(DiscontinuousSqrt(), 2, ShiftMode.MINUS_SHIFT)


@given(n=st.integers(1, 200), x=st.floats(-50, 50, allow_nan=False))
@settings(max_examples=300, deadline=None)
def test_smoothed_family_gap_and_continuity(n, x):
    b = DiscontinuousSqrt()
    lo, hi = build_shifted(b, n, SMOOTHED), build_shifted(b, n + 1, SMOOTHED)
    assert hi(x) - lo(x) >= 1.0 / (n * (n + 1)) - 1e-12
    assert lo(x) < b(x)


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_smoothed_continuous_at_breakpoints(n):
    s = build_shifted(DiscontinuousSqrt(), n, SMOOTHED)
    for x0 in (-1.0 / n, 0.0):
        left, right = s(np.nextafter(x0, -1.0)), s(np.nextafter(x0, 1.0))
        assert abs(left - right) < 1e-6


def test_linear_is_fit_exactly():
    p = approximate(build_shifted(Linear(1.0), 3), consecutive_epsilon(3))
    xs = np.linspace(-3, 3, 1001)
    np.testing.assert_allclose(p(xs), xs - 1 / 3, atol=1e-12)
    assert p.certified_sup_error < 1e-12


def test_sqrt_first_stage_error():
    s = build_shifted(PowerLaw(0.5), 1)
    p = approximate(s, 0.25, 10_000)
    xs = np.linspace(-1, 1, 10_000)
    assert np.max(np.abs(p(xs) - s(xs))) < 0.25
    assert p.certified_sup_error < 0.25


def test_clamping():
    p = approximate(build_shifted(PowerLaw(0.5), 3))
    assert p(3 + 5.0) == p(3.0)
    assert p(-3 - 5.0) == p(-3.0)
    assert p.clamp_values == (p(-3.0), p(3.0))
    assert p.derivative(np.array([10.0]))[0] == 0.0


def test_degree_exhausted_reports_best_error():
    with pytest.raises(DegreeExhausted) as exc:
        approximate(build_shifted(PowerLaw(0.5), 4), 1e-9, method="global", max_degree=16)
    assert exc.value.best_error > 1e-9


def test_discontinuous_family_passes_on_six():
    polys = approximate_family(DiscontinuousSqrt(), range(2, 7), SMOOTHED)
    rep = check_monotone_family(polys, np.linspace(-6, 6, 10_001))
    assert rep.passed and rep.pairs_checked == 4


def test_single_element_family_vacuous():
    polys = approximate_family(PowerLaw(0.5), [3])
    assert check_monotone_family(polys, np.linspace(-3, 3, 101)).passed


def test_corrupted_member_detected():
    polys = approximate_family(PowerLaw(0.5), [2, 3, 4])
    bad = dataclasses.replace(polys[1], coeffs=polys[1].coeffs + 1.0)
    rep = check_monotone_family([polys[0], bad, polys[2]], np.linspace(-4, 4, 2001))
    assert not rep.passed
    assert rep.first_violation is not None
    assert {v.check for v in rep.violations} >= {"order", "envelope"}


@pytest.fixture(scope="module")
def sqrt_family():
    return approximate_family(PowerLaw(0.5), range(1, 21))


def test_strict_envelope_and_growth(sqrt_family):
    b = PowerLaw(0.5)
    xs = np.linspace(-40, 40, 8001)
    for p in sqrt_family:
        assert np.all(p(xs) < b(xs))
    k = family_growth_constant(sqrt_family)
    for p in sqrt_family:
        assert np.all(np.abs(p(xs)) <= k * (1 + np.abs(xs)) + 1e-12)


def test_reported_lipschitz_matches_derivative(sqrt_family):
    for p in sqrt_family[:6]:
        xs = np.linspace(p.lo, p.hi, 20001)
        measured = float(np.max(np.abs(p.derivative(xs))))
        assert measured <= p.lipschitz * (1 + 1e-9)
        assert measured >= p.lipschitz / 1.1


def test_family_json_round_trip(sqrt_family):
    data = json.loads(json.dumps(family_to_dict(sqrt_family[:5])))
    back = family_from_dict(data)
    xs = np.linspace(-6, 6, 301)
    for a, b in zip(sqrt_family[:5], back):
        assert isinstance(b, PiecewisePoly)
        np.testing.assert_array_equal(a(xs), b(xs))
