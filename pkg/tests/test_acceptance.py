"""Acceptance criteria 1-10, one test each, with a pass/fail line per criterion.

The heavy ensembles are module-scoped fixtures so later criteria (stage
ordering, determinism) reuse the runs instead of repeating them.
"""

import time

import numpy as np
import pytest

from extremal.certificates import Verdict, certify_iyanaga, certify_peano
from extremal.cli import run_case
from extremal.drift_catalog import DiscontinuousSqrt, Linear, PowerLaw, TabulatedPiecewise, default_transform
from extremal.extremal_solver import SolveSettings, extremal_pair, reference_solve
from extremal.jsonio import dumps
from extremal.monte_carlo import estimate_h7, refinement_study, run_gap_ensemble
from extremal.noise_paths import PathGrid, derive_seed, make_noise
from extremal.poly_approx import ShiftMode, approximate_family, check_monotone_family

from . import conftest

# (2/3) E|Z|^(-1/2), mpmath to 30 digits, computed before the solver existed
H7_ORACLE = 1.14671998309935937299240261984

N14 = PathGrid.uniform(2**14)
BROWNIAN_BASE = 2024
ABS_BASE = 7007
DISC_BASE = 88


def report(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES[n] = line
    print(line)
    assert passed, line


# ---------------------------------------------------------------------------
# shared runs


@pytest.fixture(scope="module")
def zero_noise_run():
    t0 = time.perf_counter()
    b = PowerLaw(0.5)
    path = make_noise("zero", N14)
    lo, hi, g = extremal_pair(b, path)
    cert = certify_iyanaga(b, path, lo)
    return {"lo": lo, "hi": hi, "gap": g, "cert": cert, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def brownian_run():
    t0 = time.perf_counter()
    b = PowerLaw(0.5)
    rep = run_gap_ensemble(b, "brownian", 100, BROWNIAN_BASE, grid=N14)
    tables = [
        refinement_study(b, "brownian", derive_seed(BROWNIAN_BASE, i), [2**12, 2**13, 2**14]) for i in range(100)
    ]
    return {"report": rep, "tables": tables, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def discontinuous_run():
    return run_gap_ensemble(
        DiscontinuousSqrt(), "brownian", 20, DISC_BASE, SolveSettings(n_max=64), grid=N14, certificates=()
    )


# ---------------------------------------------------------------------------
# criteria


def test_criterion_01_zero_noise_non_uniqueness(zero_noise_run):
    r = zero_noise_run
    sup_lo = float(np.max(np.abs(r["lo"].y)))
    at_t = float(r["hi"].y[-1])
    ok = sup_lo < 1e-6 and abs(at_t - 0.25) < 1e-3 and r["cert"].verdict is Verdict.DIVERGING and r["seconds"] < 5.0
    report(
        1, ok,
        f"sup|y_min|={sup_lo:.2e} y_max(1)={at_t:.6f} iyanaga={r['cert'].verdict.value} time={r['seconds']:.2f}s",
    )


def test_criterion_02_brownian_uniqueness(brownian_run):
    agg = brownian_run["report"].aggregates
    below = agg["below_threshold"]
    refined = sum(t.non_increasing for t in brownian_run["tables"])
    strict = sum(
        all(b.sup_gap <= a.sup_gap for a, b in zip(t.rows, t.rows[1:])) for t in brownian_run["tables"]
    )
    secs = brownian_run["seconds"]
    ok = below >= 95 and refined >= 90 and secs < 600
    report(
        2, ok,
        f"gap<1e-2 on {below}/100; refinement non-increasing on {refined}/100 "
        f"(strict {strict}/100); median gap={agg['gap_quantiles']['median']:.2e} time={secs:.0f}s",
    )


def test_criterion_03_polynomial_certification():
    t0 = time.perf_counter()
    worst, violations = 0.0, 0
    for b, mode in ((PowerLaw(0.5), ShiftMode.MINUS_SHIFT), (DiscontinuousSqrt(), ShiftMode.SMOOTHED_DISCONTINUOUS)):
        polys = approximate_family(b, range(1, 21), mode)
        for p in polys:
            xs = np.linspace(p.lo, p.hi, 10_000)
            worst = max(worst, float(np.max(np.abs(p(xs) - p.shifted(xs)))) / p.epsilon)
        violations += len(check_monotone_family(polys, np.linspace(-20.0, 20.0, 40_001)).violations)
    secs = time.perf_counter() - t0
    ok = worst < 1.0 and violations == 0 and secs < 60
    report(3, ok, f"max error/eps_n={worst:.3f} monotone violations={violations} time={secs:.1f}s")


def test_criterion_04_stage_order_and_domination(zero_noise_run, brownian_run):
    tol = SolveSettings().stage_tolerance
    sols = (zero_noise_run["lo"], zero_noise_run["hi"])
    order = all(r.min_increment is None or r.min_increment >= -1e-9 for s in sols for r in s.trail)
    dom = all(s.domination_excess <= tol for s in sols)
    agg = brownian_run["report"].aggregates
    ok = order and dom and agg["stage_order_ok"] and agg["domination_ok"]
    report(
        4, ok,
        f"zero-noise order={order} domination={dom}; brownian order={agg['stage_order_ok']} "
        f"domination={agg['domination_ok']}",
    )


def test_criterion_05_lipschitz_reference():
    st = SolveSettings(stage_tolerance=1e-8)
    worst = 0.0
    for b in (Linear(1.0), TabulatedPiecewise.cubic_with_tails(0.5, 0.1, 2.0)):
        for seed in range(10):
            path = make_noise("brownian", PathGrid.uniform(2**12), seed=derive_seed(5, seed))
            lo, hi, _ = extremal_pair(b, path, st)
            ref = reference_solve(b, path, refine=8)
            worst = max(worst, float(np.max(np.abs(lo.y - ref.y))), float(np.max(np.abs(hi.y - ref.y))))
    report(5, worst < 1e-6, f"max sup distance to the 8x RK4 reference={worst:.2e} over 2 drifts x 10 seeds")


def test_criterion_06_h7_closed_form():
    t0 = time.perf_counter()
    est = estimate_h7(0.5, 10_000, 2**12, seed_base=0)
    secs = time.perf_counter() - t0
    rel = abs(est.estimate - H7_ORACLE) / H7_ORACLE
    ok = rel < 0.10 and abs(est.oracle_value - H7_ORACLE) < 1e-12 and secs < 300
    report(6, ok, f"estimate={est.estimate:.5f} oracle={H7_ORACLE:.5f} rel.err={rel:.3%} time={secs:.0f}s")


def test_criterion_07_nonneg_noise_certificates():
    rep = run_gap_ensemble(
        PowerLaw(0.5), "abs_brownian", 100, ABS_BASE, grid=N14, certificates=("lakshmikantham", "nonneg_noise")
    )
    both = sum(
        r.verdicts.get("lakshmikantham") == "integrable" and r.verdicts.get("nonneg_noise") == "integrable"
        for r in rep.records
    )
    below = rep.aggregates["below_threshold"]
    report(7, both >= 99 and below >= 95, f"both certificates integrable on {both}/100; gap<1e-2 on {below}/100")


def test_criterion_08_discontinuous_route(discontinuous_run):
    agg = discontinuous_run.aggregates
    ok = agg["not_converged"] == 0 and agg["errors"] == 0 and agg["below_threshold"] >= 18 and agg["apriori_ok"]
    report(
        8, ok,
        f"not converged={agg['not_converged']} gap<1e-2 on {agg['below_threshold']}/20 "
        f"a-priori bound on every stage={agg['apriori_ok']}",
    )


def test_criterion_09_differentiable_noise(tmp_path):
    verdicts = [certify_peano(PowerLaw(a), default_transform(PowerLaw(a)), "H9").verdict for a in np.arange(1, 10) / 10]
    holds = sum(v is Verdict.HOLDS for v in verdicts)
    summary = run_case("smooth-noise-peano", tmp_path)
    g = summary["gap"]["sup_gap"]
    report(9, holds == 9 and g < 1e-3, f"peano holds for {holds}/9 exponents; smooth-noise gap={g:.2e}")


def test_criterion_10_determinism(zero_noise_run, brownian_run, discontinuous_run, tmp_path):
    b = PowerLaw(0.5)
    first = brownian_run["report"]
    again = run_gap_ensemble(b, "brownian", 10, BROWNIAN_BASE, grid=N14)
    same_records = dumps([r.to_dict() for r in again.records]) == dumps([r.to_dict() for r in first.records[:10]])
    disc = run_gap_ensemble(
        DiscontinuousSqrt(), "brownian", 20, DISC_BASE, SolveSettings(n_max=64), grid=N14, certificates=()
    )
    same_disc = dumps(disc.to_dict()) == dumps(discontinuous_run.to_dict())
    lo, hi, _ = extremal_pair(b, make_noise("zero", N14))
    same_zero = np.array_equal(lo.y, zero_noise_run["lo"].y) and np.array_equal(hi.y, zero_noise_run["hi"].y)
    a1 = run_case("sqrt-brownian", tmp_path / "a")
    a2 = run_case("sqrt-brownian", tmp_path / "b")
    same_case = dumps(a1) == dumps(a2)
    ok = same_records and same_disc and same_zero and same_case
    report(
        10, ok,
        f"brownian records={same_records} discontinuous aggregates={same_disc} "
        f"zero-noise paths={same_zero} reproduce summary={same_case}",
    )
