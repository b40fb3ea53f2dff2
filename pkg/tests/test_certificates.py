import math

import numpy as np
import pytest

from extremal.certificates import (
    Criterion,
    IntegrandProfile,
    Verdict,
    a_profile,
    certify_iyanaga,
    certify_lakshmikantham,
    certify_nonneg_noise,
    certify_peano,
    eval_a,
    gronwall_gap_bound,
    integrate_profile,
)
from extremal.drift_catalog import DiscontinuousSqrt, Linear, PowerLaw, TabulatedPiecewise, Transform, power_transform
from extremal.errors import BadTransform, HypothesisViolation, NegativeNoise
from extremal.extremal_solver import minimal_solution
from extremal.noise_paths import NoiseKind, NoisePath, PathGrid, Provenance, make_noise

# closed form of int_0^1 (t + (2/3) t^(3/2))^(-1/2) dt, checked with mpmath
LAKSHMIKANTHAM_LINEAR = 1.74596669241483377


def linear_noise(steps=2**14):
    t = PathGrid.uniform(steps).times(1.0)
    return NoisePath(t, t.copy(), Provenance(NoiseKind.EXTERNAL, source="t"))


def test_zero_noise_integrand_is_infinite():
    b = PowerLaw(0.5)
    path = make_noise("zero", PathGrid.uniform(1024))
    y = minimal_solution(b, path)
    prof = a_profile(b, path, y)
    assert np.all(prof.infinite)
    assert eval_a(b, path, y, 0.5).is_infinite
    cert = certify_iyanaga(b, path, y)
    assert cert.verdict is Verdict.DIVERGING
    assert math.isinf(cert.integral_value) and not cert.integrable


def test_linear_drift_integral_is_horizon():
    b = Linear(1.0)
    path = make_noise("brownian", PathGrid.uniform(1024), seed=5)
    y = minimal_solution(b, path)
    prof = a_profile(b, path, y)
    np.testing.assert_allclose(prof.values, 1.0)
    cert = certify_iyanaga(b, path, y, initial_gap=0.1)
    assert cert.verdict is Verdict.INTEGRABLE
    assert cert.integral_value == pytest.approx(1.0, abs=1e-12)
    assert cert.gronwall_bound == pytest.approx(0.1 * math.e)


def test_lakshmikantham_against_closed_form():
    cert = certify_lakshmikantham(linear_noise())
    assert cert.criterion is Criterion.LAKSHMIKANTHAM
    assert cert.verdict is Verdict.INTEGRABLE
    assert cert.integral_value == pytest.approx(LAKSHMIKANTHAM_LINEAR, abs=1e-3)
    assert cert.tail_exponent == pytest.approx(-0.5, abs=0.05)


def test_nonneg_noise_matches_lakshmikantham_shape():
    # for b = sqrt the two integrands differ by the constant factor 1/2
    path = linear_noise()
    a = certify_nonneg_noise(PowerLaw(0.5), path)
    assert a.integral_value == pytest.approx(0.5 * LAKSHMIKANTHAM_LINEAR, abs=1e-3)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_brownian_certificates_integrable(seed):
    b = PowerLaw(0.5)
    path = make_noise("abs_brownian", PathGrid.uniform(2**14), seed=seed)
    assert certify_lakshmikantham(path).verdict is Verdict.INTEGRABLE
    assert certify_nonneg_noise(b, path).verdict is Verdict.INTEGRABLE
    bm = make_noise("brownian", PathGrid.uniform(2**14), seed=seed)
    assert certify_iyanaga(b, bm, minimal_solution(b, bm)).verdict is Verdict.INTEGRABLE


def test_negative_noise_rejected():
    path = make_noise("neg_abs_brownian", PathGrid.uniform(256), seed=1)
    with pytest.raises(NegativeNoise):
        certify_lakshmikantham(path)
    with pytest.raises(NegativeNoise):
        certify_nonneg_noise(PowerLaw(0.5), path)


def test_h3_required():
    # the cubic core has an increasing derivative on (0, 2)
    b = TabulatedPiecewise.cubic_with_tails(0.5, 0.1, 2.0)
    path = make_noise("brownian", PathGrid.uniform(256), seed=1)
    y = minimal_solution(b, path)
    with pytest.raises(HypothesisViolation):
        a_profile(b, path, y)


@pytest.mark.parametrize("a, g, expected", [(1.0, 0.0, 0.0), (0.0, 0.3, 0.3), (math.log(2.0), 0.1, 0.2)])
def test_gronwall_examples(a, g, expected):
    assert gronwall_gap_bound(a, g) == pytest.approx(expected)


def test_gronwall_rejects_bad_input():
    with pytest.raises(ValueError):
        gronwall_gap_bound(1.0, -1.0)
    with pytest.raises(ValueError):
        gronwall_gap_bound(math.inf, 1.0)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_peano_power_law_holds(alpha):
    cert = certify_peano(PowerLaw(alpha), power_transform(alpha), "H9")
    assert cert.verdict is Verdict.HOLDS and cert.integrable


def test_peano_fails_for_linear_with_identity():
    ident = Transform(lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float)), "x")
    cert = certify_peano(Linear(1.0), ident, "H9")
    assert cert.verdict is Verdict.FAILS
    assert cert.details["fails_at"] is not None


def test_peano_h8_negative_jump():
    assert certify_peano(DiscontinuousSqrt(-1.0), side="H8").verdict is Verdict.HOLDS


def test_bad_transform():
    dec = Transform(lambda x: -np.asarray(x, dtype=float), lambda x: -np.ones_like(np.asarray(x, dtype=float)))
    with pytest.raises(BadTransform):
        certify_peano(PowerLaw(0.5), dec)
    with pytest.raises(ValueError):
        certify_peano(PowerLaw(0.5), side="H7")


def _power_profile(p, n=2**14):
    t = np.linspace(0.0, 1.0, n + 1)
    inf = t == 0.0
    vals = np.where(inf, 0.0, np.where(inf, 1.0, t) ** p)
    return IntegrandProfile(t, vals, inf, t)


def test_synthetic_tails():
    good = integrate_profile(_power_profile(-0.5))
    assert good["tail_exponent"] == pytest.approx(-0.5, abs=0.02)
    assert good["integral"] == pytest.approx(2.0, rel=1e-3)
    bad = integrate_profile(_power_profile(-1.0))
    assert bad["tail_exponent"] <= -0.95
    assert math.isinf(bad["integral"])


def test_cap_sensitivity_recorded():
    b = PowerLaw(0.5)
    path = make_noise("abs_brownian", PathGrid.uniform(4096), seed=4)
    cert = certify_nonneg_noise(b, path)
    assert cert.details["cap_sensitivity"] is not None
    assert cert.details["cap_sensitivity"] < 0.01
    d = cert.to_dict()
    assert d["criterion"] == "nonneg_noise_l1" and d["verdict"] == "integrable"
