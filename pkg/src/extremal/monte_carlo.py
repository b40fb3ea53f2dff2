"""Seeded ensembles over Brownian paths.

Path ``i`` of an ensemble with base seed ``s`` is sampled from
``derive_seed(s, i)``; refinement levels mix in the step count as well.
Per-path work is independent and the report is assembled in path order, so
aggregates do not depend on how many workers ran.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import integrate, special

from .certificates import certify_iyanaga, certify_lakshmikantham, certify_nonneg_noise
from .drift_catalog import DriftSpec
from .errors import ExtremalError, NotConverged
from .extremal_solver import SolveSettings, gap, maximal_solution, minimal_solution
from .noise_paths import NoiseKind, PathGrid, derive_seed, make_noise, sample_brownian

SCHEMA_VERSION = "1.0"
GAP_THRESHOLD = 1e-2
ORDER_SLACK = 1e-9


@dataclass(frozen=True)
class PathRecord:
    index: int
    seed: int
    sup_gap: float | None
    l1_gap: float | None
    min_difference: float | None
    converged: bool
    stages_min: int
    stages_max: int
    stage_order_ok: bool  # every recorded stage increment >= -slack
    domination_ok: bool  # every stage within stage_tolerance of the output
    apriori_ok: bool
    verdicts: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            "sup_gap": self.sup_gap,
            "l1_gap": self.l1_gap,
            "min_difference": self.min_difference,
            "converged": self.converged,
            "stages_min": self.stages_min,
            "stages_max": self.stages_max,
            "stage_order_ok": self.stage_order_ok,
            "domination_ok": self.domination_ok,
            "apriori_ok": self.apriori_ok,
            "verdicts": dict(sorted(self.verdicts.items())),
            "error": self.error,
        }


@dataclass(frozen=True)
class McReport:
    scenario: str
    seed_base: int
    paths: int
    steps: int
    horizon: float
    drift: dict
    noise: str
    settings: dict
    records: tuple[PathRecord, ...]
    aggregates: dict
    wall_clock: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": "ensemble",
            "scenario": self.scenario,
            "seed_base": self.seed_base,
            "paths": self.paths,
            "steps": self.steps,
            "horizon": self.horizon,
            "drift": self.drift,
            "noise": self.noise,
            "settings": self.settings,
            "records": [r.to_dict() for r in self.records],
            "aggregates": self.aggregates,
        }
        if include_timing:
            out["wall_clock"] = self.wall_clock
        return out


def _check_trail(sol, tolerance: float) -> tuple[bool, bool, bool]:
    order = all(r.min_increment is None or r.min_increment >= -ORDER_SLACK for r in sol.trail)
    dom = sol.domination_excess <= tolerance
    bound = all(r.bound_holds for r in sol.trail)
    return order, dom, bound


def _solve_one(
    index: int,
    b: DriftSpec,
    kind: str,
    seed_base: int,
    settings: SolveSettings,
    grid: PathGrid,
    horizon: float,
    certificates: tuple[str, ...],
    noise_params: dict,
) -> PathRecord:
    seed = derive_seed(seed_base, index)
    path = make_noise(kind, grid, horizon, seed=seed, **noise_params)
    verdicts: dict = {}
    sols = []
    error = None
    converged = True
    for solver in (minimal_solution, maximal_solution):
        try:
            sols.append(solver(b, path, settings))
        except NotConverged as exc:
            converged = False
            error = exc.code
            sols.append(exc.solution)
        except ExtremalError as exc:
            return PathRecord(index, seed, None, None, None, False, 0, 0, False, False, False, {}, exc.code)
    lo, hi = sols
    g = gap(lo, hi)
    checks = [_check_trail(s, settings.stage_tolerance) for s in (lo, hi)]
    for name in certificates:
        try:
            if name == "iyanaga":
                cert = certify_iyanaga(b, path, lo, initial_gap=settings.stage_tolerance)
            elif name == "nonneg_noise":
                cert = certify_nonneg_noise(b, path)
            elif name == "lakshmikantham":
                cert = certify_lakshmikantham(path)
            else:
                raise ValueError(f"unknown certificate {name!r}")
            verdicts[name] = cert.verdict.value
        except ExtremalError as exc:
            verdicts[name] = exc.code
    return PathRecord(
        index=index,
        seed=seed,
        sup_gap=g.sup_gap,
        l1_gap=g.l1_gap,
        min_difference=g.min_difference,
        converged=converged,
        stages_min=len(lo.trail),
        stages_max=len(hi.trail),
        stage_order_ok=checks[0][0] and checks[1][0],
        domination_ok=checks[0][1] and checks[1][1],
        apriori_ok=checks[0][2] and checks[1][2],
        verdicts=verdicts,
        error=error,
    )


def _map_ordered(func, items, workers: int):
    if workers <= 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _quantiles(values: list[float]) -> dict:
    if not values:
        return {}
    arr = np.sort(np.asarray(values, dtype=float))
    return {
        "min": float(arr[0]),
        "q05": float(np.quantile(arr, 0.05)),
        "median": float(np.quantile(arr, 0.5)),
        "q95": float(np.quantile(arr, 0.95)),
        "max": float(arr[-1]),
        "mean": float(math.fsum(arr) / len(arr)),
    }


def aggregate_records(records, threshold: float = GAP_THRESHOLD) -> dict:
    """Aggregates recomputed from per-path records, in index order."""
    records = sorted(records, key=lambda r: r.index)
    gaps = [r.sup_gap for r in records if r.sup_gap is not None]
    names = sorted({k for r in records for k in r.verdicts})
    counts = {n: {} for n in names}
    for r in records:
        for n, v in r.verdicts.items():
            counts[n][v] = counts[n].get(v, 0) + 1
    integrable_gaps = [
        r.sup_gap for r in records if r.sup_gap is not None and r.verdicts.get("iyanaga") == "integrable"
    ]
    coupling: dict = {"checked": bool(integrable_gaps)}
    if integrable_gaps:
        med = float(np.quantile(integrable_gaps, 0.5))
        q95 = float(np.quantile(integrable_gaps, 0.95))
        coupling.update(
            median=med,
            q95=q95,
            holds=q95 <= 10.0 * med,
            outliers=[r.index for r in records if r.verdicts.get("iyanaga") == "integrable" and r.sup_gap > 10.0 * med],
        )
    return {
        "gap_quantiles": _quantiles(gaps),
        "gap_threshold": threshold,
        "below_threshold": sum(1 for g in gaps if g < threshold),
        "fraction_below_threshold": (sum(1 for g in gaps if g < threshold) / len(records)) if records else 0.0,
        "not_converged": sum(1 for r in records if not r.converged),
        "errors": sum(1 for r in records if r.error is not None),
        "negative_gaps": sum(1 for g in gaps if g < -ORDER_SLACK),
        "stage_order_ok": all(r.stage_order_ok for r in records),
        "domination_ok": all(r.domination_ok for r in records),
        "apriori_ok": all(r.apriori_ok for r in records),
        "verdict_counts": counts,
        "certificate_gap_coupling": coupling,
    }


def run_gap_ensemble(
    b: DriftSpec,
    noise_kind: NoiseKind | str,
    M: int,
    seed_base: int,
    settings: SolveSettings | None = None,
    *,
    grid: PathGrid | None = None,
    horizon: float = 1.0,
    certificates: tuple[str, ...] = ("iyanaga",),
    noise_params: dict | None = None,
    scenario: str = "ensemble",
    workers: int = 1,
    threshold: float = GAP_THRESHOLD,
) -> McReport:
    """Minimal/maximal gaps and certificate verdicts over M seeded paths."""
    if M < 1:
        raise ValueError("M must be at least 1")
    settings = settings or SolveSettings()
    grid = grid or settings.grid or PathGrid.uniform(2**14)
    kind = NoiseKind(noise_kind).value
    t0 = time.perf_counter()
    work = partial(
        _solve_one,
        b=b,
        kind=kind,
        seed_base=seed_base,
        settings=settings,
        grid=grid,
        horizon=horizon,
        certificates=tuple(certificates),
        noise_params=dict(noise_params or {}),
    )
    records = tuple(_map_ordered(work, range(M), workers))
    return McReport(
        scenario=scenario,
        seed_base=int(seed_base),
        paths=M,
        steps=grid.steps,
        horizon=horizon,
        drift=b.to_dict(),
        noise=kind,
        settings=settings.to_dict(),
        records=records,
        aggregates=aggregate_records(records, threshold),
        wall_clock=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# H7


@dataclass(frozen=True)
class H7Target:
    """Oracle for E int_0^T b'(|W_s|+) ds with b = |x|^alpha."""

    alpha: float
    horizon: float
    abs_moment: float  # E|Z|^(alpha - 1) by quadrature
    oracle_value: float
    provenance: str

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "horizon": self.horizon,
            "abs_moment": self.abs_moment,
            "oracle_value": self.oracle_value,
            "provenance": self.provenance,
        }


def gaussian_abs_moment(p: float) -> float:
    """E|Z|^p for p > -1 by adaptive quadrature of 2 int_0^inf z^p phi(z) dz."""
    if p <= -1.0:
        return math.inf
    phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)  # noqa: E731
    # the algebraic weight handles z^p at the origin exactly
    head, _ = integrate.quad(phi, 0.0, 1.0, weight="alg", wvar=(p, 0.0), epsabs=1e-14, epsrel=1e-13)
    tail, _ = integrate.quad(lambda z: z**p * phi(z), 1.0, math.inf, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * (head + tail)


def gaussian_abs_moment_closed_form(p: float) -> float:
    """2^(p/2) Gamma((p+1)/2) / sqrt(pi); used only to cross-check the quadrature."""
    return 2.0 ** (p / 2.0) * special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


def h7_target(alpha: float, horizon: float = 1.0) -> H7Target:
    """alpha E|Z|^(alpha-1) int_0^T s^((alpha-1)/2) ds."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    moment = gaussian_abs_moment(alpha - 1.0)
    q = (alpha + 1.0) / 2.0
    value = alpha * moment * horizon**q / q
    return H7Target(alpha, horizon, moment, value, "scipy.integrate.quad of 2*int_0^inf z^(alpha-1) phi(z) dz")


def h7_path_integral(times: np.ndarray, values: np.ndarray, alpha: float) -> np.ndarray:
    """int alpha |w|^(alpha-1) dt for each row of ``values`` (paths x grid).

    Midpoint rule on cells of one sign; cells that touch or cross zero use
    the exact integral over the linear interpolant, through the
    antiderivative F(w) = sign(w) |w|^alpha of alpha |w|^(alpha-1).
    """
    w = np.atleast_2d(values)
    h = np.diff(times)[None, :]
    w0, w1 = w[:, :-1], w[:, 1:]
    cross = (w0 * w1) <= 0.0
    mid = 0.5 * (w0 + w1)
    safe_mid = np.where(cross, 1.0, np.abs(mid))
    midpoint = alpha * safe_mid ** (alpha - 1.0) * h
    dw = w1 - w0
    F = lambda v: np.sign(v) * np.abs(v) ** alpha  # noqa: E731
    safe_dw = np.where(dw == 0.0, 1.0, dw)
    exact = np.where(dw == 0.0, 0.0, h * (F(w1) - F(w0)) / safe_dw)
    cells = np.where(cross, exact, midpoint)
    return cells.sum(axis=1)


@dataclass(frozen=True)
class H7Estimate:
    estimate: float
    stderr: float
    oracle: H7Target
    paths: int
    steps: int
    seed_base: int

    @property
    def oracle_value(self) -> float:
        return self.oracle.oracle_value

    @property
    def relative_error(self) -> float:
        return abs(self.estimate - self.oracle_value) / self.oracle_value

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "oracle": self.oracle.to_dict(),
            "relative_error": self.relative_error,
            "paths": self.paths,
            "steps": self.steps,
            "seed_base": self.seed_base,
        }


def estimate_h7(alpha: float, M: int, N: int, T: float = 1.0, seed_base: int = 0, batch: int = 500) -> H7Estimate:
    """Monte Carlo estimate of E int_0^T alpha |W_s|^(alpha-1) ds over M paths of N steps."""
    target = h7_target(alpha, T)
    grid = PathGrid.uniform(N)
    totals = np.empty(M)
    for start in range(0, M, batch):
        stop = min(M, start + batch)
        rows = [sample_brownian(derive_seed(seed_base, i), grid, T).values for i in range(start, stop)]
        totals[start:stop] = h7_path_integral(grid.times(T), np.vstack(rows), alpha)
    mean = math.fsum(totals) / M
    stderr = float(np.std(totals, ddof=1) / math.sqrt(M)) if M > 1 else math.nan
    return H7Estimate(float(mean), stderr, target, M, N, int(seed_base))


# ---------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class RefinementRow:
    steps: int
    seed: int
    sup_gap: float | None
    ratio: float | None  # gap / previous gap
    converged: bool

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "seed": self.seed,
            "sup_gap": self.sup_gap,
            "ratio": self.ratio,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class RefinementTable:
    rows: tuple[RefinementRow, ...]
    growth_allowance: float = 2.0

    @property
    def non_increasing(self) -> bool:
        """Each gap at most ``growth_allowance`` times the previous one (plus a rounding floor)."""
        gaps = [r.sup_gap for r in self.rows]
        if any(g is None for g in gaps):
            return False
        return all(b <= self.growth_allowance * a + 1e-12 for a, b in zip(gaps, gaps[1:]))

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "growth_allowance": self.growth_allowance,
            "non_increasing": self.non_increasing,
        }


def refinement_study(
    b: DriftSpec,
    noise_kind: NoiseKind | str,
    seed: int,
    Ns,
    settings: SolveSettings | None = None,
    *,
    horizon: float = 1.0,
    noise_params: dict | None = None,
) -> RefinementTable:
    """Gap at each resolution N, each on an independent path seeded by derive_seed(seed, N)."""
    Ns = [int(n) for n in Ns]
    if any(b2 <= a for a, b2 in zip(Ns, Ns[1:])):
        raise ValueError("N list must be increasing")
    settings = settings or SolveSettings()
    rows = []
    prev = None
    for n in Ns:
        level_seed = derive_seed(seed, n)
        path = make_noise(noise_kind, PathGrid.uniform(n), horizon, seed=level_seed, **(noise_params or {}))
        converged = True
        sols = []
        for solver in (minimal_solution, maximal_solution):
            try:
                sols.append(solver(b, path, settings))
            except NotConverged as exc:
                converged = False
                sols.append(exc.solution)
        g = gap(*sols).sup_gap
        ratio = None if prev is None or prev == 0.0 else g / prev
        rows.append(RefinementRow(n, level_seed, g, ratio, converged))
        prev = g
    return RefinementTable(tuple(rows))


__all__ = [
    "H7Estimate",
    "H7Target",
    "McReport",
    "PathRecord",
    "RefinementRow",
    "RefinementTable",
    "aggregate_records",
    "estimate_h7",
    "gaussian_abs_moment",
    "gaussian_abs_moment_closed_form",
    "h7_path_integral",
    "h7_target",
    "refinement_study",
    "run_gap_ensemble",
]
