"""Minimal and maximal solutions of y_t = int_0^t b(y_s + omega_s) ds.

The minimal solution is the increasing limit of the stage solutions

    y^n' = p_n(y^n + omega_t),    y^n(0) = y0_n,

where p_n approximates b - 1/n within eps_n. Each stage drift is Lipschitz,
so the stage ODE is solved by a fixed-step Runge-Kutta method whose step is
sub-divided until dt * Lip(p_n) <= safety. The maximal solution comes from
the reflection z -> -z (minimal solution of -b(-z) under -omega, negated)
or from the upper family b + 1/n, whose stages decrease.

Stage indices follow a schedule (doubling by default); the tolerance of
stage n is half the gap between its shift and the next one, which keeps the
approximant family ordered exactly as for consecutive indices.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _kernels
from .drift_catalog import DiscontinuousSqrt, DriftSpec, Reflected, check_hypotheses, default_hypothesis_grid
from .errors import BadMode, DegreeExhausted, GridMismatch, MonotonicityViolation, NotConverged, StepTooCoarse
from .noise_paths import NoisePath, PathGrid, eval_path, noise_kernel_params, reflect
from .poly_approx import PiecewisePoly, ShiftMode, approximate, build_shifted, schedule_epsilon

SCHEMA_VERSION = "1.0"
_MAX_RANGE = 2.0**20
_MIN_EPSILON = 1e-13  # stage tolerances below this are not resolvable in double precision


class Integrator(str, Enum):
    RK4 = "rk4"
    HEUN = "heun"
    EULER = "euler"
    SSPRK3 = "ssprk3"

    @property
    def code(self) -> int:
        return {
            "euler": _kernels.EULER,
            "heun": _kernels.HEUN,
            "rk4": _kernels.RK4,
            "ssprk3": _kernels.SSPRK3,
        }[self.value]

    @property
    def order_preserving(self) -> bool:
        """True for schemes built from convex combinations of Euler steps."""
        return self is not Integrator.RK4


class Schedule(str, Enum):
    DOUBLING = "doubling"
    CONSECUTIVE = "consecutive"


class SolutionTag(str, Enum):
    MINIMAL = "minimal"
    MAXIMAL = "maximal"
    LIPSCHITZ = "lipschitz"
    PLAIN = "plain"


@dataclass(frozen=True)
class SolveSettings:
    """Solver configuration.

    ``n_max`` caps the number of stages and ``max_substeps`` the sub-steps
    per grid interval; either limit ends the iteration as not converged. ``approx_range`` is the half-width
    of the interval on which the stage drifts are approximated; it doubles
    automatically if a stage leaves it. The default integrator is the
    three-stage strong-stability-preserving Runge-Kutta scheme: with
    dt * Lip <= 1 it maps ordered drifts and starts to ordered solutions,
    so the stage ordering holds on the grid and not only in the limit.
    """

    grid: PathGrid | None = None
    n_max: int = 64
    stage_tolerance: float = 1e-4
    integrator: Integrator = Integrator.SSPRK3
    step_safety: float = 0.25
    schedule: Schedule = Schedule.DOUBLING
    n_start: int = 1
    approx_range: float = 16.0
    substep: bool = True
    keep_stages: bool = False
    monotone_slack: float = 1e-9
    maximal_route: str = "reflection"
    project: bool = True
    verify_grid_size: int = 10_000
    max_substeps: int = 1024

    def __post_init__(self):
        if self.stage_tolerance <= 0:
            raise ValueError("stage_tolerance must be positive")
        if self.n_max < 2:
            raise ValueError("n_max must be at least 2")
        if self.step_safety <= 0:
            raise ValueError("step_safety must be positive")
        if self.maximal_route not in ("reflection", "plus_shift"):
            raise ValueError("maximal_route is 'reflection' or 'plus_shift'")
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        object.__setattr__(self, "schedule", Schedule(self.schedule))

    def stage_indices(self) -> list[int]:
        """n_max + 1 indices; the last one only fixes the final tolerance."""
        if self.schedule is Schedule.DOUBLING:
            return [self.n_start * 2**k for k in range(self.n_max + 1)]
        return [self.n_start + k for k in range(self.n_max + 1)]

    def to_dict(self) -> dict:
        return {
            "grid_steps": None if self.grid is None else self.grid.steps,
            "n_max": self.n_max,
            "stage_tolerance": self.stage_tolerance,
            "integrator": self.integrator.value,
            "step_safety": self.step_safety,
            "schedule": self.schedule.value,
            "n_start": self.n_start,
            "approx_range": self.approx_range,
            "substep": self.substep,
            "maximal_route": self.maximal_route,
            "project": self.project,
            "max_substeps": self.max_substeps,
        }


@dataclass(frozen=True)
class StageRecord:
    n: int
    shift: float
    epsilon: float
    y0: float
    lipschitz: float
    substeps: int
    pieces: int
    sup_gap: float | None  # sup |y^n - y^prev|
    min_increment: float | None  # min of direction * (y^n - y^prev)
    sup_abs: float
    apriori_bound: float

    @property
    def bound_holds(self) -> bool:
        return self.sup_abs <= self.apriori_bound

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "shift": self.shift,
            "epsilon": self.epsilon,
            "y0": self.y0,
            "lipschitz": self.lipschitz,
            "substeps": self.substeps,
            "pieces": self.pieces,
            "sup_gap": self.sup_gap,
            "min_increment": self.min_increment,
            "sup_abs": self.sup_abs,
            "apriori_bound": self.apriori_bound,
        }


@dataclass(frozen=True, eq=False)
class SolutionPath:
    times: np.ndarray
    y: np.ndarray
    omega: np.ndarray
    tag: SolutionTag
    y0: float = 0.0
    n: int | None = None
    trail: tuple[StageRecord, ...] = ()
    converged: bool = True
    route: str = "direct"
    domination_excess: float = 0.0  # max over stages of sup(stage - output) in the monotone direction
    approx_range: float | None = None
    stages: tuple[np.ndarray, ...] | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("times", "y", "omega"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def x(self) -> np.ndarray:
        return self.y + self.omega

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def stage_trail_gaps(self) -> list[float | None]:
        return [r.sup_gap for r in self.trail]

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "route": self.route,
            "y0": self.y0,
            "n": self.n,
            "converged": self.converged,
            "approx_range": self.approx_range,
            "domination_excess": self.domination_excess,
            "steps": len(self.times) - 1,
            "horizon": self.horizon,
            "y_end": float(self.y[-1]),
            "sup_abs_y": float(np.max(np.abs(self.y))),
            "trail": [r.to_dict() for r in self.trail],
            **({"meta": self.meta} if self.meta else {}),
        }

    def write_csv(self, file: str | Path) -> None:
        """CSV columns t, y, x with round-trip float formatting."""
        with Path(file).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y", "x"])
            for t, y, x in zip(self.times, self.y, self.x):
                w.writerow([repr(float(t)), repr(float(y)), repr(float(x))])

    def write_sidecar(self, file: str | Path, extra: dict | None = None) -> None:
        data = {"schema_version": SCHEMA_VERSION, "kind": "solution", **self.to_dict(), **(extra or {})}
        Path(file).write_text(json.dumps(data, indent=2, sort_keys=True))


@dataclass(frozen=True)
class GapStats:
    sup_gap: float
    argmax_time: float
    l1_gap: float
    min_difference: float  # min of (maximal - minimal); negative means the order broke

    def to_dict(self) -> dict:
        return {
            "sup_gap": self.sup_gap,
            "argmax_time": self.argmax_time,
            "l1_gap": self.l1_gap,
            "min_difference": self.min_difference,
        }


# ---------------------------------------------------------------------------
# single Lipschitz solve


def _solution_times(path: NoisePath, settings: SolveSettings) -> np.ndarray:
    if settings.grid is None:
        return np.asarray(path.times)
    times = settings.grid.times(path.horizon)
    if abs(times[-1] - path.horizon) > 1e-12 * max(1.0, path.horizon):
        raise GridMismatch("solver grid and noise path have different horizons")
    return times


def required_substeps(p: PiecewisePoly, times: np.ndarray, safety: float) -> int:
    dt = float(np.max(np.diff(times)))
    return max(1, math.ceil(dt * p.lipschitz / safety - 1e-12))


def _integrate(
    p: PiecewisePoly, path: NoisePath, times: np.ndarray, y0: float, settings: SolveSettings, substeps: int | None = None
):
    need_sub = required_substeps(p, times, settings.step_safety)
    substeps = need_sub if substeps is None else max(int(substeps), need_sub)
    if substeps > 1 and not settings.substep:
        need = math.ceil(path.horizon * p.lipschitz / settings.step_safety)
        raise StepTooCoarse(f"grid step too large for Lipschitz constant {p.lipschitz:.3g}", need)
    mode, alpha, beta, sign = noise_kernel_params(path)
    y = _kernels.integrate(
        times,
        float(y0),
        int(substeps),
        settings.integrator.code,
        p.edges,
        p.coeffs,
        p.degrees.astype(np.int64),
        np.asarray(path.times),
        np.asarray(path.values),
        mode,
        alpha,
        beta,
        sign,
    )
    return y, substeps


def solve_lipschitz(
    p: PiecewisePoly, path: NoisePath, y0: float = 0.0, settings: SolveSettings | None = None
) -> SolutionPath:
    """Solve y' = p(y + omega_t), y(0) = y0 on the solver grid."""
    settings = settings or SolveSettings()
    times = _solution_times(path, settings)
    y, _ = _integrate(p, path, times, y0, settings)
    return SolutionPath(times, y, eval_path(path, times), SolutionTag.LIPSCHITZ, float(y0), n=p.n)


def gap(minimal: SolutionPath, maximal: SolutionPath) -> GapStats:
    """Sup and L1 norms of maximal - minimal."""
    if minimal.times.shape != maximal.times.shape or not np.array_equal(minimal.times, maximal.times):
        raise GridMismatch("solutions live on different grids")
    diff = maximal.y - minimal.y
    absd = np.abs(diff)
    j = int(np.argmax(absd))
    return GapStats(
        sup_gap=float(absd[j]),
        argmax_time=float(minimal.times[j]),
        l1_gap=float(np.trapezoid(absd, minimal.times)),
        min_difference=float(np.min(diff)),
    )


# ---------------------------------------------------------------------------
# stage iteration


@lru_cache(maxsize=256)
def _h1_to_h5(spec: DriftSpec) -> bool:
    try:
        report = check_hypotheses(spec, {"H1", "H2", "H3", "H4", "H5"}, default_hypothesis_grid())
    except Exception:
        return False
    return report.all_hold()


def _noise_sup(path: NoisePath) -> float:
    return path.sup_abs


def _apriori_bound(k_growth: float, horizon: float, noise_sup: float) -> float:
    k = max(1.0, k_growth)
    return k * (1.0 + horizon + horizon * noise_sup) * math.exp(k * horizon)


def _growth_on_range(p: PiecewisePoly, r: float) -> float:
    return p.growth_constant(np.linspace(-r, r, 4001))


def _run_stages(base: DriftSpec, path: NoisePath, mode: ShiftMode, settings: SolveSettings, start_offsets: bool):
    """Iterate stages until the successive sup gap drops below tolerance.

    Returns (times, last_y, trail, converged, domination_excess, stages, R, stop_reason).
    """
    times = _solution_times(path, settings)
    direction = mode.direction
    indices = settings.stage_indices()
    r = float(settings.approx_range)
    noise_sup = _noise_sup(path)
    while True:
        trail: list[StageRecord] = []
        kept: list[np.ndarray] = []
        prev = prev_p = None
        prev_y0, prev_sub = 0.0, 0
        running = None  # pointwise extreme of all stages in the monotone direction
        converged = False
        restart = False
        stop = "n_max"
        for k in range(settings.n_max):
            n, n_next = indices[k], indices[k + 1]
            eps = schedule_epsilon(n, n_next)
            if eps < _MIN_EPSILON:
                stop = "precision"
                break
            shifted = build_shifted(base, n, mode)
            try:
                p = approximate(shifted, eps, settings.verify_grid_size, interval=(-r, r))
            except DegreeExhausted:
                stop = "degree_exhausted"
                break
            if settings.substep and required_substeps(p, times, settings.step_safety) > settings.max_substeps:
                stop = "substep_budget"
                break
            y0 = -direction / n if start_offsets else 0.0
            y, substeps = _integrate(p, path, times, y0, settings)
            if not np.all(np.isfinite(y)) or np.max(np.abs(y + eval_path(path, times))) >= r:
                restart = True
                break
            sup_gap = min_inc = None
            if prev is not None and substeps != prev_sub:
                # compare on a common discretisation, where the order is exact
                prev, _ = _integrate(prev_p, path, times, prev_y0, settings, substeps)
            if prev is not None:
                inc = direction * (y - prev)
                j = int(np.argmin(inc))
                min_inc = float(inc[j])
                sup_gap = float(np.max(np.abs(y - prev)))
                if min_inc < -settings.monotone_slack:
                    raise MonotonicityViolation("stage ordering broken", n, float(times[j]), -min_inc)
            trail.append(
                StageRecord(
                    n=n,
                    shift=1.0 / n,
                    epsilon=eps,
                    y0=y0,
                    lipschitz=p.lipschitz,
                    substeps=substeps,
                    pieces=p.pieces,
                    sup_gap=sup_gap,
                    min_increment=min_inc,
                    sup_abs=float(np.max(np.abs(y))),
                    apriori_bound=_apriori_bound(_growth_on_range(p, r), path.horizon, noise_sup),
                )
            )
            running = y.copy() if running is None else (np.maximum(running, y) if direction > 0 else np.minimum(running, y))
            if settings.keep_stages:
                kept.append(y)
            prev, prev_p, prev_y0, prev_sub = y, p, y0, substeps
            if sup_gap is not None and sup_gap < settings.stage_tolerance:
                converged = True
                stop = "tolerance"
                break
        if restart:
            if 2 * r > _MAX_RANGE:
                raise NotConverged(f"solution left the approximation range {r:g}")
            r *= 2.0
            continue
        if prev is None:
            raise NotConverged(f"no stage could be computed ({stop})")
        excess = float(np.max(direction * (running - prev)))
        return times, prev, tuple(trail), converged, excess, (tuple(kept) if settings.keep_stages else None), r, stop


def _finish(tag, times, y, path, trail, converged, excess, stages, r, route, stop, y0=0.0):
    sol = SolutionPath(
        times,
        y,
        eval_path(path, times),
        tag,
        y0,
        trail=trail,
        converged=converged,
        route=route,
        domination_excess=excess,
        approx_range=r,
        stages=stages,
        meta={"stop_reason": stop},
    )
    if not converged:
        raise NotConverged(f"{tag.value} solution: stage gap above tolerance after {len(trail)} stages ({stop})", sol)
    return sol


def _running_max(y: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.maximum.accumulate(y))


def _suffix_min(y: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, np.minimum.accumulate(y[::-1])[::-1])


def _is_discontinuous_sqrt(b: DriftSpec) -> bool:
    return isinstance(b, DiscontinuousSqrt) and b.jump != 0.0


def minimal_solution(b: DriftSpec, path: NoisePath, settings: SolveSettings | None = None) -> SolutionPath:
    """Minimal solution as the increasing limit of the lower stages.

    Under H1-H5 every solution is non-negative and non-decreasing, so the
    last stage (a lower bound) is lifted to its running maximum clipped at
    zero, which is still a lower bound and closer to the limit.
    """
    settings = settings or SolveSettings()
    if _is_discontinuous_sqrt(b):
        if b.jump < 0:
            raise BadMode("the smoothed route needs a positive jump")
        mode, offsets, route = ShiftMode.SMOOTHED_DISCONTINUOUS, True, "smoothed-discontinuous"
    else:
        if b.discontinuities():
            raise BadMode(f"{b.kind} is discontinuous and has no smoothed family")
        mode, offsets, route = ShiftMode.MINUS_SHIFT, False, "minus-shift"
    monotone = settings.project and _h1_to_h5(b)
    times = _solution_times(path, settings)
    if monotone and path.is_identically_zero() and float(b(0.0)) == 0.0:
        # zero noise: y = 0 solves the equation and every solution is >= 0
        zeros = np.zeros_like(times)
        return SolutionPath(times, zeros, zeros, SolutionTag.MINIMAL, 0.0, route="zero-noise")
    times, y, trail, conv, excess, stages, r, stop = _run_stages(b, path, mode, settings, offsets)
    if monotone:
        y = _running_max(y)
        excess = max(excess, 0.0) if stages is None else float(max(np.max(s - y) for s in stages))
        route += "+envelope"
    return _finish(SolutionTag.MINIMAL, times, y, path, trail, conv, excess, stages, r, route, stop)


def maximal_solution(b: DriftSpec, path: NoisePath, settings: SolveSettings | None = None) -> SolutionPath:
    """Maximal solution: reflection by default, upper stages otherwise.

    The discontinuous square root has no reflected smoothed family, so it
    always takes the upper route with starts +1/m.
    """
    settings = settings or SolveSettings()
    monotone = settings.project and _h1_to_h5(b)
    if _is_discontinuous_sqrt(b) or settings.maximal_route == "plus_shift":
        if _is_discontinuous_sqrt(b):
            mode, offsets, route = ShiftMode.SMOOTHED_DISCONTINUOUS_UPPER, True, "smoothed-discontinuous-upper"
        else:
            if b.discontinuities():
                raise BadMode(f"{b.kind} is discontinuous and has no smoothed family")
            mode, offsets, route = ShiftMode.PLUS_SHIFT, False, "plus-shift"
        times, y, trail, conv, excess, stages, r, stop = _run_stages(b, path, mode, settings, offsets)
    else:
        route = "reflection"
        inner = replace(settings, project=False)
        times, z, trail, conv, excess, stages, r, stop = _run_stages(
            Reflected(b), reflect(path), ShiftMode.MINUS_SHIFT, inner, False
        )
        y = -z
        if stages is not None:
            stages = tuple(-s for s in stages)
    if monotone:
        y = _suffix_min(y)
        if stages is not None:
            excess = float(max(np.max(y - s) for s in stages))
        route += "+envelope"
    return _finish(SolutionTag.MAXIMAL, times, y, path, trail, conv, excess, stages, r, route, stop)


def extremal_pair(b: DriftSpec, path: NoisePath, settings: SolveSettings | None = None):
    """(minimal, maximal, gap) for one path."""
    lo = minimal_solution(b, path, settings)
    hi = maximal_solution(b, path, settings)
    return lo, hi, gap(lo, hi)


def reference_solve(b: DriftSpec, path: NoisePath, refine: int = 8) -> SolutionPath:
    """Classical RK4 on y' = b(y + omega) with the exact drift, ``refine`` times finer.

    Only meaningful for Lipschitz drifts. Piecewise polynomial drifts run
    compiled; others fall back to a Python loop. Returned on the path grid.
    """
    fine = _refine_times(np.asarray(path.times), refine)
    pieces = b.power_pieces()
    if pieces is not None:
        breaks = np.asarray(pieces[0], dtype=float)
        width = max(len(c) for c in pieces[1])
        coeffs = np.zeros((len(pieces[1]), width))
        for k, c in enumerate(pieces[1]):
            coeffs[k, : len(c)] = c
        degrees = np.array([len(c) - 1 for c in pieces[1]], dtype=np.int64)
        mode, alpha, beta, sign = noise_kernel_params(path)
        y = _kernels.integrate_power_rk4(
            fine, 0.0, breaks, coeffs, degrees, np.asarray(path.times), np.asarray(path.values), mode, alpha, beta, sign
        )
    else:
        w = eval_path(path, fine)
        y = np.zeros_like(fine)
        for i in range(len(fine) - 1):
            h = fine[i + 1] - fine[i]
            wm = float(eval_path(path, 0.5 * (fine[i] + fine[i + 1])))
            cur = y[i]
            k1 = float(b(cur + w[i]))
            k2 = float(b(cur + 0.5 * h * k1 + wm))
            k3 = float(b(cur + 0.5 * h * k2 + wm))
            k4 = float(b(cur + h * k3 + w[i + 1]))
            y[i + 1] = cur + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return SolutionPath(path.times, y[::refine], eval_path(path, path.times), SolutionTag.PLAIN, 0.0, route="reference")


def _refine_times(times: np.ndarray, refine: int) -> np.ndarray:
    frac = np.arange(refine) / refine
    inner = (times[:-1, None] + np.diff(times)[:, None] * frac[None, :]).ravel()
    return np.concatenate([inner, times[-1:]])


__all__ = [
    "GapStats",
    "Integrator",
    "Schedule",
    "SolutionPath",
    "SolutionTag",
    "SolveSettings",
    "StageRecord",
    "extremal_pair",
    "gap",
    "maximal_solution",
    "minimal_solution",
    "reference_solve",
    "required_substeps",
    "solve_lipschitz",
]
