import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal.errors import OutOfRange
from extremal.noise_paths import (
    NoiseKind,
    NoisePath,
    PathGrid,
    Provenance,
    derive_seed,
    eval_path,
    load_external,
    make_noise,
    reflect,
    sample_brownian,
    smooth_path,
    splitmix64,
    transform_abs,
    transform_neg_abs,
    write_path_csv,
    zero_path,
)


def small_path(values, kind=NoiseKind.BROWNIAN):
    t = np.linspace(0.0, 1.0, len(values))
    return NoisePath(t, np.asarray(values, dtype=float), Provenance(kind, seed=1))


def test_grid_rules():
    with pytest.raises(ValueError):
        PathGrid.uniform(1)
    np.testing.assert_allclose(np.diff(PathGrid.uniform(8).times(2.0)), 0.25)
    assert PathGrid.explicit([0.0, 0.1, 0.5, 1.0]).steps == 3


@given(seed=st.integers(0, 2**64 - 1))
@settings(max_examples=50, deadline=None)
def test_brownian_starts_at_zero_and_is_deterministic(seed):
    g = PathGrid.uniform(64)
    a = sample_brownian(seed, g)
    b = sample_brownian(seed, g)
    assert a.values[0] == 0.0
    assert a.values.tobytes() == b.values.tobytes()


def test_brownian_increment_variance_pooled():
    # 1000 paths at N = 2^14: pooled increment variance times N within 5 % of 1
    n = 2**14
    g = PathGrid.uniform(n)
    total, count = 0.0, 0
    for i in range(1000):
        d = np.diff(sample_brownian(derive_seed(77, i), g).values)
        total += float(np.dot(d, d))
        count += d.size
    assert abs(total / count * n - 1.0) < 0.05


def test_brownian_statistical_suite():
    n = 2**12
    g = PathGrid.uniform(n)
    dt = 1.0 / n
    incs = np.concatenate([np.diff(sample_brownian(derive_seed(5, i), g).values) for i in range(1000)])
    m = incs.size
    assert abs(incs.mean()) <= 3.0 * math.sqrt(dt / m)
    per_path = incs.reshape(1000, n)
    x, y = per_path[:, :-1].ravel(), per_path[:, 1:].ravel()
    rho = np.corrcoef(x, y)[0, 1]
    assert abs(rho) <= 0.01


def test_abs_and_neg_abs_examples():
    p = small_path([0.0, -1.0, 2.0])
    assert transform_abs(p).values.tolist() == [0.0, 1.0, 2.0]
    assert transform_neg_abs(p).values.tolist() == [0.0, -1.0, -2.0]
    assert transform_abs(p).kind is NoiseKind.ABS_BROWNIAN


@given(seed=st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_abs_sign_invariants(seed):
    w = sample_brownian(seed, PathGrid.uniform(256))
    assert transform_abs(w).values.min() >= 0.0
    assert transform_neg_abs(w).values.max() <= 0.0


def test_reflect_examples():
    p = small_path([0.0, 1.0, -2.0])
    assert reflect(p).values.tolist() == [0.0, -1.0, 2.0]
    np.testing.assert_array_equal(reflect(reflect(p)).values, p.values)
    z = zero_path(PathGrid.uniform(4))
    assert reflect(z).is_identically_zero()
    assert not np.any(reflect(z).values)


def test_eval_path_examples():
    assert eval_path(zero_path(PathGrid.uniform(10)), 0.7) == 0.0
    s = smooth_path(1.0, 1.0, PathGrid.uniform(10))
    assert eval_path(s, 1.0 / math.pi) == pytest.approx(1.0 / math.pi, abs=1e-15)
    lin = NoisePath(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 2.0]), Provenance(NoiseKind.EXTERNAL))
    assert eval_path(lin, 0.25) == 0.5


def test_eval_out_of_range():
    p = zero_path(PathGrid.uniform(4))
    with pytest.raises(OutOfRange):
        eval_path(p, 1.5)
    with pytest.raises(OutOfRange):
        eval_path(p, -0.1)


def test_linear_interpolation_continuous_at_nodes():
    w = sample_brownian(3, PathGrid.uniform(32))
    for t, v in zip(w.times[1:-1], w.values[1:-1]):
        assert eval_path(w, t) == v
        left = eval_path(w, np.nextafter(t, 0.0))
        right = eval_path(w, np.nextafter(t, 2.0))
        assert abs(left - v) < 1e-12 and abs(right - v) < 1e-12


@given(
    alpha=st.floats(0.01, 5.0),
    beta=st.floats(0.01, 3.0),
    t=st.floats(1e-8, 1.0),
)
@settings(max_examples=200, deadline=None)
def test_smooth_envelope(alpha, beta, t):
    s = smooth_path(alpha, beta, PathGrid.uniform(4))
    # allowance: a few ulps of alpha*t from rounding the sum
    assert abs(eval_path(s, t) - alpha * t) <= t ** (2.0 + beta) * (1 + 1e-12) + 4e-16 * alpha * t


def test_smooth_analytic_off_grid():
    s = smooth_path(1.0, 1.0, PathGrid.uniform(4))
    t = 0.013
    assert eval_path(s, t) == pytest.approx(t + t**3 * math.sin(1 / t), rel=1e-14)


def test_seed_mixing():
    assert splitmix64(0) != splitmix64(1)
    seeds = {derive_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(42, 3) == derive_seed(42, 3)
    assert derive_seed(42, 3, 4096) != derive_seed(42, 3, 8192)


def test_external_round_trip(tmp_path):
    w = sample_brownian(9, PathGrid.uniform(100))
    f = tmp_path / "w.csv"
    write_path_csv(w, f)
    back = load_external(f)
    assert back.values.tobytes() == w.values.tobytes()
    assert back.times.tobytes() == w.times.tobytes()
    assert back.kind is NoiseKind.EXTERNAL


def test_external_rejects_bad_files(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("time,value\n0,0\n1,1\n")
    with pytest.raises(ValueError):
        load_external(f)
    f.write_text("t,omega\n0,0\n0.5,1\n0.4,1\n")
    with pytest.raises(ValueError):
        load_external(f)


def test_make_noise_kinds():
    g = PathGrid.uniform(16)
    assert make_noise("abs_brownian", g, seed=1).values.min() >= 0
    assert make_noise("zero", g).is_identically_zero()
    assert make_noise("smooth", g, alpha=2.0, beta=0.5).kind is NoiseKind.SMOOTH
    with pytest.raises(ValueError):
        make_noise("brownian", g)
    with pytest.raises(ValueError):
        smooth_path(0.0, 1.0, g)
