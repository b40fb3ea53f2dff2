"""Shifted drifts b_n and their clamped polynomial approximants p_n.

For a drift b the lower family is b_n = b - 1/n, approximated on [-n, n] by
p_n with |b_n - p_n| < eps_n and extended by constants outside. With
consecutive indices eps_n = 1 / (2 n (n + 1)), half the gap 1/n - 1/(n+1)
between successive shifts, which is what makes p_{n+1} >= p_n and
p_n + eps_n <= b. The discontinuous square root uses the smoothed family

    b_n(x) = sqrt(x) - 1/n                    x > 0
             -(n + sqrt(n)) x - 1/n           -1/n <= x <= 0
             sqrt(-x) + 1 - 1/n               x < -1/n

and the upper families mirror these constructions with +1/n.

Approximants are stored as Chebyshev series on one or more pieces. The
default strategy first fits a single polynomial by least squares on
Chebyshev nodes with escalating degree; when that cannot reach the target
(non-smooth drifts at large n) it falls back to an adaptive piecewise
interpolant at Chebyshev-Lobatto points, which is continuous and Lipschitz.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from .drift_catalog import DiscontinuousSqrt, DriftSpec, drift_from_dict
from .errors import BadMode, DegreeExhausted

SCHEMA_VERSION = "1.0"


def consecutive_epsilon(n: int) -> float:
    """Tolerance for the unit-step family: 1 / (2 n (n + 1))."""
    return 1.0 / (2.0 * n * (n + 1))


def schedule_epsilon(n: int, n_next: int) -> float:
    """Half the gap between the shifts 1/n and 1/n_next.

    Reduces to ``consecutive_epsilon`` when n_next = n + 1.
    """
    return 0.5 * (1.0 / n - 1.0 / n_next)


class ShiftMode(str, Enum):
    MINUS_SHIFT = "minus_shift"
    PLUS_SHIFT = "plus_shift"
    SMOOTHED_DISCONTINUOUS = "smoothed_discontinuous"
    SMOOTHED_DISCONTINUOUS_UPPER = "smoothed_discontinuous_upper"

    @property
    def direction(self) -> int:
        """+1 for families increasing to b from below, -1 from above."""
        return 1 if self in (ShiftMode.MINUS_SHIFT, ShiftMode.SMOOTHED_DISCONTINUOUS) else -1


@dataclass(frozen=True)
class ShiftedDrift:
    base: DriftSpec
    n: int
    mode: ShiftMode

    @property
    def direction(self) -> int:
        return self.mode.direction

    @property
    def shift(self) -> float:
        return 1.0 / self.n

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = self._eval(np.atleast_1d(arr)).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def _eval(self, x: np.ndarray) -> np.ndarray:
        n, s = self.n, 1.0 / self.n
        if self.mode is ShiftMode.MINUS_SHIFT:
            return self.base._eval(x) - s
        if self.mode is ShiftMode.PLUS_SHIFT:
            return self.base._eval(x) + s
        jump = self.base.jump
        root = np.sqrt(np.abs(x))
        if self.mode is ShiftMode.SMOOTHED_DISCONTINUOUS:
            slope = jump * n + math.sqrt(n)
            return np.where(
                x > 0.0, root - s, np.where(x < -s, root + jump - s, -slope * x - s)
            )
        slope = jump * n - math.sqrt(n)
        return np.where(x < 0.0, root + jump + s, np.where(x > s, root + s, jump + s - slope * x))

    def singular_points(self) -> tuple[float, ...]:
        return tuple(self.base.singular_points())

    def special_points(self) -> tuple[float, ...]:
        """Points where the shifted drift is not smooth."""
        pts = set(self.base.singular_points()) | set(self.base.kinks()) | set(self.base.discontinuities())
        if self.mode is ShiftMode.SMOOTHED_DISCONTINUOUS:
            pts.add(-1.0 / self.n)
        elif self.mode is ShiftMode.SMOOTHED_DISCONTINUOUS_UPPER:
            pts.add(1.0 / self.n)
        return tuple(sorted(pts))


def build_shifted(base: DriftSpec, n: int, mode: ShiftMode | str = ShiftMode.MINUS_SHIFT) -> ShiftedDrift:
    mode = ShiftMode(mode)
    if n < 1:
        raise ValueError("n must be >= 1")
    smoothed = mode in (ShiftMode.SMOOTHED_DISCONTINUOUS, ShiftMode.SMOOTHED_DISCONTINUOUS_UPPER)
    if smoothed and not (isinstance(base, DiscontinuousSqrt) and base.jump > 0):
        raise BadMode(f"{mode.value} needs a discontinuous square root with positive jump")
    if not smoothed and base.discontinuities():
        raise BadMode(f"{mode.value} needs a continuous drift; use the smoothed family")
    return ShiftedDrift(base, int(n), mode)


# ---------------------------------------------------------------------------
# piecewise Chebyshev representation


def _clenshaw(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise Chebyshev evaluation: coeffs has shape (len(u), D+1)."""
    b1 = np.zeros_like(u)
    b2 = np.zeros_like(u)
    for k in range(coeffs.shape[1] - 1, 0, -1):
        b1, b2 = coeffs[:, k] + 2.0 * u * b1 - b2, b1
    return coeffs[:, 0] + u * b1 - b2


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Clamped approximant p_n: Chebyshev series on pieces of [lo, hi].

    Outside [lo, hi] the value is frozen at p(lo) resp. p(hi).
    """

    n: int
    edges: np.ndarray
    coeffs: np.ndarray
    degrees: np.ndarray
    certified_sup_error: float
    epsilon: float
    lipschitz: float
    method: str
    shifted: ShiftedDrift | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("edges", "coeffs", "degrees"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])

    @property
    def epsilon_n(self) -> float:
        return consecutive_epsilon(self.n)

    @property
    def pieces(self) -> int:
        return len(self.edges) - 1

    @property
    def degree(self) -> int:
        return int(self.degrees.max())

    @property
    def clamp_values(self) -> tuple[float, float]:
        return float(self(self.lo)), float(self(self.hi))

    def _locate(self, x: np.ndarray):
        xc = np.clip(x, self.edges[0], self.edges[-1])
        idx = np.clip(np.searchsorted(self.edges, xc, side="right") - 1, 0, self.pieces - 1)
        a = self.edges[idx]
        b = self.edges[idx + 1]
        return xc, idx, a, b

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        xc, idx, a, b = self._locate(flat)
        u = np.clip((2.0 * xc - a - b) / (b - a), -1.0, 1.0)
        out = _clenshaw(self.coeffs[idx], u).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out

    def derivative(self, x):
        """p'(x); zero in the clamped regions."""
        arr = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        xc, idx, a, b = self._locate(arr)
        u = (2.0 * xc - a - b) / (b - a)
        dcoef = np.zeros_like(self.coeffs)
        for k in range(self.pieces):
            d = C.chebder(self.coeffs[k]) * (2.0 / (self.edges[k + 1] - self.edges[k]))
            dcoef[k, : len(d)] = d
        out = _clenshaw(dcoef[idx], u)
        return np.where((arr < self.lo) | (arr > self.hi), 0.0, out)

    def growth_constant(self, grid: np.ndarray | None = None) -> float:
        """max |p(x)| / (1 + |x|) over ``grid`` (default [-40, 40])."""
        xs = np.linspace(-40.0, 40.0, 8001) if grid is None else np.asarray(grid, dtype=float)
        xs = np.concatenate([xs, self.edges])
        return float(np.max(np.abs(self(xs)) / (1.0 + np.abs(xs))))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "range": [self.lo, self.hi],
            "edges": [float(e) for e in self.edges],
            "coeffs": [[float(c) for c in row[: d + 1]] for row, d in zip(self.coeffs, self.degrees)],
            "degrees": [int(d) for d in self.degrees],
            "certified_sup_error": self.certified_sup_error,
            "epsilon": self.epsilon,
            "lipschitz": self.lipschitz,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, data: dict, shifted: ShiftedDrift | None = None) -> "PiecewisePoly":
        degrees = np.asarray(data["degrees"], dtype=np.int64)
        coeffs = np.zeros((len(degrees), int(degrees.max()) + 1))
        for k, row in enumerate(data["coeffs"]):
            coeffs[k, : len(row)] = row
        return cls(
            n=int(data["n"]),
            edges=np.asarray(data["edges"], dtype=float),
            coeffs=coeffs,
            degrees=degrees,
            certified_sup_error=float(data["certified_sup_error"]),
            epsilon=float(data["epsilon"]),
            lipschitz=float(data["lipschitz"]),
            method=str(data["method"]),
            shifted=shifted,
        )


# ---------------------------------------------------------------------------
# construction


def _lobatto(a: float, b: float, deg: int) -> np.ndarray:
    j = np.arange(deg + 1)
    return 0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * j / deg)


def _piece_check_points(a: float, b: float, deg: int) -> np.ndarray:
    nodes = _lobatto(a, b, max(deg, 1))
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    quarter = np.concatenate([0.75 * nodes[:-1] + 0.25 * nodes[1:], 0.25 * nodes[:-1] + 0.75 * nodes[1:]])
    return np.concatenate([np.linspace(a, b, 33), mids, quarter])


def _fit_piece(f, a: float, b: float, deg: int) -> np.ndarray:
    if deg == 0:
        return np.array([float(f(np.array([0.5 * (a + b)]))[0])])
    x = _lobatto(a, b, deg)
    u = (2.0 * x - a - b) / (b - a)
    u[0], u[-1] = -1.0, 1.0
    return C.chebfit(u, f(x), deg)


def _piece_lipschitz(coef: np.ndarray, a: float, b: float) -> float:
    if len(coef) < 2:
        return 0.0
    d = C.chebder(coef) * (2.0 / (b - a))
    m = 4 * len(coef)
    u = np.cos(np.pi * np.arange(m + 1) / m)
    # sampling at the m+1 Chebyshev extrema under-reads a degree-k polynomial
    # by at most the factor cos(pi k / (2m)); dividing makes this an upper bound
    return float(np.max(np.abs(C.chebval(u, d)))) / np.cos(np.pi * (len(d) - 1) / (2 * m))


def _verification_grid(lo: float, hi: float, size: int, extra: Sequence[float]) -> np.ndarray:
    pts = np.concatenate([np.linspace(lo, hi, size), np.asarray(extra, dtype=float)])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(pts)


def _global_fit(f, lo, hi, target, special, verify_size, max_degree):
    """Least squares on Chebyshev nodes, degree 1, 2, 4, 8, ... up to max_degree."""
    best = (math.inf, None, None)
    degrees = [1, 2, 4] + [2**k for k in range(3, int(math.log2(max_degree)) + 1)]
    history: list[tuple[int, float]] = []
    for d in degrees:
        m = 2 * (d + 1)
        u = np.cos(np.pi * (np.arange(m) + 0.5) / m)
        x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * u
        coef = C.chebfit(u, f(x), d)
        grid = _verification_grid(lo, hi, verify_size, list(x) + list(special))
        ug = (2.0 * grid - lo - hi) / (hi - lo)
        err = float(np.max(np.abs(C.chebval(ug, coef) - f(grid))))
        if err < best[0]:
            best = (err, coef, d)
        if err < target:
            return coef, err, grid
        history.append((d, err))
        if len(history) >= 2 and d >= 8:
            (d0, e0), (d1, e1) = history[-2], history[-1]
            if e1 >= e0:
                continue
            rate = math.log(e0 / e1) / math.log(d1 / d0)
            needed = d1 * (e1 / target) ** (1.0 / max(rate, 1e-3))
            if needed > 4 * max_degree:
                break
    raise DegreeExhausted(f"global fit up to degree {max_degree} missed {target:.3e}", best[0])


def _piecewise_fit(f, lo, hi, target, special, singular, max_degree, max_pieces):
    """Adaptive bisection with Lobatto interpolation on each piece.

    Pieces touching a point where b' is unbounded are kept linear, which
    keeps the Lipschitz constant of the approximant near its minimum.
    """
    cuts = sorted({lo, hi, *[p for p in special if lo < p < hi]})
    todo = [(a, b) for a, b in zip(cuts[:-1], cuts[1:])][::-1]
    done: list[tuple[float, float, np.ndarray, float]] = []
    degrees = [d for d in (1, 2, 4, 8, 16, 32) if d <= max_degree]
    sing = [p for p in singular if lo <= p <= hi]
    best_err = 0.0
    while todo:
        a, b = todo.pop()
        at_singular = any(math.isclose(a, p, abs_tol=1e-300) or math.isclose(b, p, abs_tol=1e-300) for p in sing)
        accepted = None
        err = math.inf
        for d in ([1] if at_singular else degrees):
            coef = _fit_piece(f, a, b, d)
            pts = _piece_check_points(a, b, d)
            u = (2.0 * pts - a - b) / (b - a)
            err = float(np.max(np.abs(C.chebval(u, coef) - f(pts))))
            if err < target:
                accepted = coef
                break
        if accepted is not None:
            done.append((a, b, accepted, err))
            best_err = max(best_err, err)
            continue
        mid = 0.5 * (a + b)
        if not (a < mid < b) or len(done) + len(todo) > max_pieces:
            raise DegreeExhausted(f"piecewise fit stalled on [{a:.3g}, {b:.3g}]", err)
        todo.append((mid, b))
        todo.append((a, mid))
    return done


def _assemble(n, done, certified, target, method, shifted):
    edges = np.array([p[0] for p in done] + [done[-1][1]])
    width = max(len(p[2]) for p in done)
    coeffs = np.zeros((len(done), width))
    degrees = np.zeros(len(done), dtype=np.int64)
    lip = 0.0
    for k, (a, b, coef, _) in enumerate(done):
        coef = np.trim_zeros(np.where(np.abs(coef) < 1e-15 * max(1.0, np.abs(coef).max()), 0.0, coef), "b")
        if coef.size == 0:
            coef = np.zeros(1)
        coeffs[k, : len(coef)] = coef
        degrees[k] = len(coef) - 1
        lip = max(lip, _piece_lipschitz(coef, a, b))
    return PiecewisePoly(n, edges, coeffs, degrees, certified, target, lip, method, shifted)


@functools.lru_cache(maxsize=1024)
def _approximate_cached(shifted, target, verify_size, lo, hi, method, max_degree, margin, max_pieces):
    f = shifted._eval
    special = shifted.special_points()
    singular = shifted.singular_points()
    goal = margin * target
    if method in ("auto", "global"):
        try:
            coef, err, grid = _global_fit(f, lo, hi, goal, special, verify_size, max_degree)
            poly = _assemble(shifted.n, [(lo, hi, coef, err)], err, target, "global", shifted)
            return poly
        except DegreeExhausted:
            if method == "global":
                raise
    done = _piecewise_fit(f, lo, hi, goal, special, singular, max_degree, max_pieces)
    poly = _assemble(shifted.n, done, 0.0, target, "piecewise", shifted)
    extra = [poly.edges]
    for k in range(poly.pieces):
        extra.append(_piece_check_points(poly.edges[k], poly.edges[k + 1], int(poly.degrees[k])))
    grid = _verification_grid(lo, hi, verify_size, np.concatenate(extra + [np.asarray(special)]))
    err = float(np.max(np.abs(poly(grid) - f(grid))))
    if not err < target:
        raise DegreeExhausted("piecewise fit failed verification", err)
    return PiecewisePoly(
        poly.n, poly.edges, poly.coeffs, poly.degrees, err, target, poly.lipschitz, poly.method, shifted
    )


def approximate(
    shifted: ShiftedDrift,
    target_eps: float | None = None,
    verify_grid_size: int = 10_000,
    *,
    interval: tuple[float, float] | None = None,
    method: str = "auto",
    max_degree: int = 512,
    margin: float = 0.9,
    max_pieces: int = 200_000,
) -> PiecewisePoly:
    """Build p_n with verification-grid sup error below ``target_eps``.

    ``interval`` defaults to [-n, n]. ``method`` is "global" (single
    polynomial, degree escalation), "piecewise", or "auto" (global first).
    Pieces are accepted at ``margin * target_eps`` so that the certified
    error keeps a buffer between grid points.
    """
    target = consecutive_epsilon(shifted.n) if target_eps is None else float(target_eps)
    if target <= 0:
        raise ValueError("target_eps must be positive")
    if method not in ("auto", "global", "piecewise"):
        raise ValueError(f"unknown method {method!r}")
    lo, hi = interval if interval is not None else (-float(shifted.n), float(shifted.n))
    return _approximate_cached(
        shifted, target, int(verify_grid_size), float(lo), float(hi), method, int(max_degree), float(margin), int(max_pieces)
    )


def approximate_family(
    base: DriftSpec,
    ns: Sequence[int],
    mode: ShiftMode | str = ShiftMode.MINUS_SHIFT,
    *,
    epsilons: Sequence[float] | None = None,
    interval: tuple[float, float] | None = None,
    **kwargs,
) -> list[PiecewisePoly]:
    eps = [consecutive_epsilon(n) for n in ns] if epsilons is None else list(epsilons)
    return [
        approximate(build_shifted(base, n, mode), e, interval=interval, **kwargs) for n, e in zip(ns, eps)
    ]


# ---------------------------------------------------------------------------
# family checks


@dataclass(frozen=True)
class MonotoneViolation:
    check: str  # "order" or "envelope"
    n: int
    x: float
    amount: float


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    violations: tuple[MonotoneViolation, ...] = ()
    pairs_checked: int = 0

    @property
    def first_violation(self) -> MonotoneViolation | None:
        return self.violations[0] if self.violations else None


def check_monotone_family(
    polys: Sequence[PiecewisePoly], grid: Sequence[float] | np.ndarray, base: DriftSpec | None = None
) -> MonotoneReport:
    """Check p_{n+1} >= p_n and p_n + eps_n <= b on ``grid`` (mirrored for upper families)."""
    xs = np.asarray(grid, dtype=float)
    if not polys:
        return MonotoneReport(True)
    direction = polys[0].shifted.direction if polys[0].shifted is not None else 1
    if base is None and polys[0].shifted is not None:
        base = polys[0].shifted.base
    violations: list[MonotoneViolation] = []
    values = [p(xs) for p in polys]
    for k in range(len(polys) - 1):
        diff = direction * (values[k + 1] - values[k])
        bad = np.nonzero(diff < 0.0)[0]
        if bad.size:
            j = bad[np.argmin(diff[bad])]
            violations.append(MonotoneViolation("order", polys[k].n, float(xs[j]), float(-diff[j])))
    if base is not None:
        b = base(xs)
        for p, v in zip(polys, values):
            gap = direction * (b - v) - p.epsilon
            bad = np.nonzero(gap < 0.0)[0]
            if bad.size:
                j = bad[np.argmin(gap[bad])]
                violations.append(MonotoneViolation("envelope", p.n, float(xs[j]), float(-gap[j])))
    return MonotoneReport(not violations, tuple(violations), max(len(polys) - 1, 0))


def family_growth_constant(polys: Sequence[PiecewisePoly], grid: np.ndarray | None = None) -> float:
    return max(p.growth_constant(grid) for p in polys)


def family_to_dict(polys: Sequence[PiecewisePoly]) -> dict:
    first = polys[0].shifted if polys else None
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "poly_family",
        "drift": first.base.to_dict() if first is not None else None,
        "mode": first.mode.value if first is not None else None,
        "growth_constant": family_growth_constant(polys) if polys else 0.0,
        "polys": [p.to_dict() for p in polys],
    }


def family_from_dict(data: dict) -> list[PiecewisePoly]:
    base = drift_from_dict(data["drift"]) if data.get("drift") else None
    mode = ShiftMode(data["mode"]) if data.get("mode") else None
    out = []
    for item in data["polys"]:
        shifted = ShiftedDrift(base, int(item["n"]), mode) if base is not None else None
        out.append(PiecewisePoly.from_dict(item, shifted))
    return out
