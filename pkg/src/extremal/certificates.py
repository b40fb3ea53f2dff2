"""Uniqueness certificates.

Each certificate integrates a non-negative function of time built from b'
along the noise (and, for the general test, along the minimal solution)
and decides whether it is integrable on [0, T]. Grid points where the
derivative argument falls below ``DELTA`` are treated as singular: their
value is capped and counted, and the grid cells touching them are
integrated with a local power law d^p whose exponent p is fitted by
log-log regression over dyadic shells of neighbouring points. A fitted p <= -1 means the
singularity is not integrable.

Verdict rules
-------------
* Diverging: more than ``MAX_CAPPED_FRACTION`` of the grid is singular, or
  some fitted exponent is <= -1.
* Integrable: the capped fraction is small, every fitted exponent exceeds
  -1 + ``EXPONENT_MARGIN``, the integral is finite and doubling the cap
  moves it by less than 1 %.
* Inconclusive: anything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .drift_catalog import (
    DriftSpec,
    ExtendedReal,
    Transform,
    _composite_monotone,
    check_hypotheses,
    default_transform,
)
from .errors import BadTransform, HypothesisViolation, NegativeNoise
from .extremal_solver import SolutionPath
from .noise_paths import NoisePath

DELTA = 1e-8
CAP = 1e12
MAX_CAPPED_FRACTION = 1e-3
EXPONENT_MARGIN = 0.1
FIT_SHELLS = 10
CAP_SENSITIVITY = 0.01


class Criterion(str, Enum):
    IYANAGA_L1 = "iyanaga_l1"
    NONNEG_NOISE_L1 = "nonneg_noise_l1"
    LAKSHMIKANTHAM = "lakshmikantham"
    PEANO_H8 = "peano_h8"
    PEANO_H9 = "peano_h9"


class Verdict(str, Enum):
    INTEGRABLE = "integrable"
    DIVERGING = "diverging"
    INCONCLUSIVE = "inconclusive"
    HOLDS = "holds"
    FAILS = "fails"


@dataclass(frozen=True)
class Certificate:
    criterion: Criterion
    verdict: Verdict
    integral_value: float  # may be inf
    tail_exponent: float | None = None
    capped_fraction: float = 0.0
    gronwall_bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def integrable(self) -> bool:
        return self.verdict in (Verdict.INTEGRABLE, Verdict.HOLDS)

    def to_dict(self) -> dict:
        finite = math.isfinite(self.integral_value)
        return {
            "criterion": self.criterion.value,
            "verdict": self.verdict.value,
            "integral_value": self.integral_value if finite else None,
            "integral_infinite": math.isinf(self.integral_value),
            "tail_exponent": self.tail_exponent,
            "capped_fraction": self.capped_fraction,
            "gronwall_bound": (
                None if self.gronwall_bound is None or not math.isfinite(self.gronwall_bound) else self.gronwall_bound
            ),
            "details": self.details,
        }


@dataclass(frozen=True)
class IntegrandProfile:
    """Sampled integrand: values (finite part), infinite mask and the derivative argument."""

    times: np.ndarray
    values: np.ndarray
    infinite: np.ndarray
    argument: np.ndarray
    blows_up_at_zero: bool = True  # False when b' is bounded near 0

    @property
    def singular(self) -> np.ndarray:
        if not self.blows_up_at_zero:
            return self.infinite
        return self.infinite | (self.argument < DELTA)


# ---------------------------------------------------------------------------
# integrands


def _positive_part_integral(b: DriftSpec, times: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Running trapezoid of 1_{omega > 0} b(omega)."""
    vals = np.where(omega > 0.0, b(np.where(omega > 0.0, omega, 0.0)), 0.0)
    return cumulative_trapezoid(vals, times, initial=0.0)


def _require_h3(b: DriftSpec) -> None:
    report = check_hypotheses(b, {"H3"}, np.linspace(-64.0, 64.0, 4001))
    if not report["H3"].holds:
        raise HypothesisViolation(f"{b.kind} does not satisfy H3")


def a_profile(b: DriftSpec, path: NoisePath, y_min: SolutionPath) -> IntegrandProfile:
    """a(t) on the solution grid.

    a(t) = b'((omega_t + int_0^t 1_{omega_s > 0} b(omega_s) ds)+)   if omega_t >= 0
           b'(|y_t + omega_t|+)                                     if omega_t < 0
    """
    _require_h3(b)
    times = np.asarray(y_min.times)
    omega = np.asarray(y_min.omega)
    inner = _positive_part_integral(b, times, omega)
    arg = np.where(omega >= 0.0, omega + inner, np.abs(np.asarray(y_min.y) + omega))
    vals, inf = b.right_derivative(arg)
    return IntegrandProfile(times, vals, inf, arg, 0.0 in b.singular_points())


def eval_a(b: DriftSpec, path: NoisePath, y_min: SolutionPath, t: float) -> ExtendedReal:
    """a(t) at one time; off-grid times interpolate y and the running integral."""
    _require_h3(b)
    if not 0.0 <= t <= y_min.horizon:
        raise ValueError("t outside the solution grid")
    times = np.asarray(y_min.times)
    omega_t = float(path(t))
    inner = float(np.interp(t, times, _positive_part_integral(b, times, np.asarray(y_min.omega))))
    if omega_t >= 0.0:
        arg = omega_t + inner
    else:
        arg = abs(float(np.interp(t, times, y_min.y)) + omega_t)
    vals, inf = b.right_derivative(np.array([arg]))
    return ExtendedReal.infinity() if inf[0] else ExtendedReal(float(vals[0]))


def nonneg_noise_profile(b: DriftSpec, path: NoisePath) -> IntegrandProfile:
    """t -> b'((omega_t + int_0^t b(omega_s) ds)+) for omega >= 0."""
    omega = np.asarray(path.values)
    if np.any(omega < 0.0):
        raise NegativeNoise("noise takes negative values")
    times = np.asarray(path.times)
    arg = omega + cumulative_trapezoid(b(omega), times, initial=0.0)
    vals, inf = b.right_derivative(arg)
    return IntegrandProfile(times, vals, inf, arg, 0.0 in b.singular_points())


def lakshmikantham_profile(path: NoisePath) -> IntegrandProfile:
    """t -> (omega_t + int_0^t omega_s^(1/2) ds)^(-1/2) for omega >= 0."""
    omega = np.asarray(path.values)
    if np.any(omega < 0.0):
        raise NegativeNoise("noise takes negative values")
    times = np.asarray(path.times)
    arg = omega + cumulative_trapezoid(np.sqrt(omega), times, initial=0.0)
    inf = arg <= 0.0
    vals = np.where(inf, 0.0, 1.0 / np.sqrt(np.where(inf, 1.0, arg)))
    return IntegrandProfile(times, vals, inf, arg)


# ---------------------------------------------------------------------------
# singularity-aware integration


def _fit_exponent(times: np.ndarray, vals: np.ndarray, ok: np.ndarray, center: int) -> float | None:
    """Power-law exponent of the integrand around ``center``.

    Points are grouped in dyadic shells of index offset [2^k, 2^(k+1)) on both
    sides; the log of each shell's median value is regressed on the log of
    its median distance. Medians keep isolated near-zero crossings of a rough
    path from dominating the slope.
    """
    n = times.shape[0]
    xs, ys = [], []
    for k in range(FIT_SHELLS):
        lo, hi = 2**k, 2 ** (k + 1)
        idx = np.concatenate([np.arange(center - hi + 1, center - lo + 1), np.arange(center + lo, center + hi)])
        idx = idx[(idx >= 0) & (idx < n)]
        idx = idx[ok[idx] & (vals[idx] > 0.0)]
        if idx.size == 0:
            continue
        xs.append(np.log(np.median(np.abs(times[idx] - times[center]))))
        ys.append(np.log(np.median(vals[idx])))
    if len(xs) < 4:
        return None
    return float(np.polyfit(xs, ys, 1)[0])


def integrate_profile(profile: IntegrandProfile, cap: float = CAP) -> dict:
    """Integral with capped singular points and power-law cells; returns diagnostics."""
    t = profile.times
    sing = profile.singular
    raw = np.where(profile.infinite, np.inf, profile.values)
    capped = np.minimum(raw, cap)
    ok = ~sing
    frac = float(np.mean(sing))
    exponents: list[float] = []
    sing_idx = np.nonzero(sing)[0]
    fit_centres = sing_idx if sing_idx.size else np.array([int(np.argmax(capped))])
    if frac <= MAX_CAPPED_FRACTION:
        for s in fit_centres:
            p = _fit_exponent(t, capped, ok, int(s))
            if p is not None:
                exponents.append(p)
    worst = min(exponents) if exponents else None
    h = np.diff(t)
    left, right = capped[:-1], capped[1:]
    cells = 0.5 * h * (left + right)
    # cells with exactly one singular end: integrate a d^p anchored at the regular end
    p_cell = worst if worst is not None else None
    one_end = sing[:-1] ^ sing[1:]
    if np.any(one_end) and p_cell is not None:
        regular = np.where(sing[:-1], right, left)
        if p_cell > -1.0:
            cells = np.where(one_end, regular * h / (p_cell + 1.0), cells)
        else:
            cells = np.where(one_end, np.inf, cells)
    return {
        "integral": float(np.sum(cells)),
        "capped_fraction": frac,
        "tail_exponent": worst,
        "singular_points": int(sing_idx.size),
    }


def _verdict(profile: IntegrandProfile) -> tuple[Verdict, dict]:
    base = integrate_profile(profile, CAP)
    doubled = integrate_profile(profile, 2.0 * CAP)
    p = base["tail_exponent"]
    val = base["integral"]
    change = abs(doubled["integral"] - val) / max(abs(val), 1e-300) if math.isfinite(val) else math.inf
    base["cap_sensitivity"] = change if math.isfinite(change) else None
    if base["capped_fraction"] > MAX_CAPPED_FRACTION or (p is not None and p <= -1.0):
        return Verdict.DIVERGING, base
    if (
        math.isfinite(val)
        and (p is None or p > -1.0 + EXPONENT_MARGIN)
        and change < CAP_SENSITIVITY
    ):
        return Verdict.INTEGRABLE, base
    return Verdict.INCONCLUSIVE, base


def _certificate(criterion: Criterion, profile: IntegrandProfile, gronwall_gap: float | None = None) -> Certificate:
    verdict, diag = _verdict(profile)
    integral = diag["integral"] if verdict is not Verdict.DIVERGING else math.inf
    bound = None
    if gronwall_gap is not None and verdict is Verdict.INTEGRABLE:
        bound = gronwall_gap_bound(integral, gronwall_gap)
    details = {
        "integral_estimate": diag["integral"] if math.isfinite(diag["integral"]) else None,
        "singular_points": diag["singular_points"],
        "cap_sensitivity": diag["cap_sensitivity"],
        "cap": CAP,
        "delta": DELTA,
    }
    return Certificate(criterion, verdict, integral, diag["tail_exponent"], diag["capped_fraction"], bound, details)


# ---------------------------------------------------------------------------
# public certificates


def certify_iyanaga(
    b: DriftSpec, path: NoisePath, y_min: SolutionPath, grid=None, *, initial_gap: float | None = None
) -> Certificate:
    """L1 test of a(t) along the minimal solution.

    ``grid`` is accepted for symmetry with the other certificates; the
    integrand lives on the solution grid. With ``initial_gap`` the
    certificate carries the Gronwall ceiling initial_gap * exp(int a).
    """
    return _certificate(Criterion.IYANAGA_L1, a_profile(b, path, y_min), initial_gap)


def certify_nonneg_noise(b: DriftSpec, path: NoisePath, grid=None) -> Certificate:
    """L1 test of b'((omega_t + int_0^t b(omega_s) ds)+) for non-negative noise."""
    return _certificate(Criterion.NONNEG_NOISE_L1, nonneg_noise_profile(b, path))


def certify_lakshmikantham(path: NoisePath, grid=None) -> Certificate:
    """L1 test of (omega_t + int_0^t omega_s^(1/2) ds)^(-1/2), the square-root case."""
    cert = _certificate(Criterion.LAKSHMIKANTHAM, lakshmikantham_profile(path))
    # separation at the origin follows from the envelope t^2/4 of the difference
    cert.details["origin_separation"] = "envelope t^2/4 against B_t = t^alpha, 0 < alpha < 2"
    return cert


def gronwall_gap_bound(a_integral: float, initial_gap: float) -> float:
    """initial_gap * exp(a_integral); zero gaps stay zero."""
    if initial_gap < 0:
        raise ValueError("initial_gap must be non-negative")
    if not math.isfinite(a_integral):
        raise ValueError("a_integral must be finite")
    if initial_gap == 0.0:
        return 0.0
    try:
        return initial_gap * math.exp(a_integral)
    except OverflowError:
        return math.inf


def _check_transform(transform: Transform, eta: float, size: int) -> list[str]:
    xs = np.linspace(0.0, eta, size + 1)[1:]
    xs = xs[xs < eta]
    problems = []
    g = np.asarray(transform.func(xs), dtype=float)
    dg = np.asarray(transform.derivative(xs), dtype=float)
    if not np.all(np.isfinite(g)) or not np.all(np.isfinite(dg)):
        problems.append("transform is not finite on (0, eta)")
    if np.any(np.diff(g) <= 0.0):
        problems.append("transform is not increasing")
    if np.any(dg < 0.0):
        problems.append("transform derivative is negative")
    if np.any(np.diff(dg) > 1e-12 * max(1.0, float(np.max(np.abs(dg))))):
        problems.append("transform derivative is not non-increasing")
    return problems


def certify_peano(
    b: DriftSpec,
    transform: Transform | None = None,
    side: str = "H9",
    grid=None,
    *,
    eta: float = 1.0,
    size: int = 1000,
) -> Certificate:
    """Monotonicity of g'(-x) b(x) on (-eta, 0) (H8) or h'(x) b(x) on (0, eta) (H9)."""
    side = side.upper()
    if side not in ("H8", "H9"):
        raise ValueError("side is H8 or H9")
    transform = transform or default_transform(b)
    problems = _check_transform(transform, eta, size)
    if problems:
        raise BadTransform("; ".join(problems))
    if grid is None:
        inner = np.linspace(0.0, eta, size + 2)[1:-1]
        grid = inner if side == "H9" else -inner[::-1]
    xs = np.asarray(grid, dtype=float)
    xs = xs[(xs > -eta) & (xs < eta)]
    ok, where = _composite_monotone(b, transform, side, xs, 1e-12)
    criterion = Criterion.PEANO_H9 if side == "H9" else Criterion.PEANO_H8
    verdict = Verdict.HOLDS if ok else Verdict.FAILS
    details = {"transform": transform.name, "eta": eta, "points": int(xs.size), "fails_at": where}
    return Certificate(criterion, verdict, math.nan, details=details)


__all__ = [
    "CAP",
    "DELTA",
    "Certificate",
    "Criterion",
    "IntegrandProfile",
    "Verdict",
    "a_profile",
    "certify_iyanaga",
    "certify_lakshmikantham",
    "certify_nonneg_noise",
    "certify_peano",
    "eval_a",
    "gronwall_gap_bound",
    "integrate_profile",
    "lakshmikantham_profile",
    "nonneg_noise_profile",
]
