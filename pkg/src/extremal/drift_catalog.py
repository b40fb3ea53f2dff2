"""Drift functions b, their right-limit derivatives and hypothesis predicates.

Hypotheses on b (all one-dimensional, autonomous):

    H1  b(0) = 0
    H2  b non-decreasing on (0, inf)
    H3  b continuous on [0, inf), C^1 there with b' non-increasing on (0, inf)
    H4  b(|x|) <= b(-|x|)
    H5  b non-increasing on (-inf, 0]
    H6  b continuous with |b(x)| <= C (1 + |x|)
    H7  E int_0^T b'(|W_s|+) ds < inf for a Brownian motion W
    H8  x -> g'(-x) b(x) non-increasing on (-eta, 0)   (needs a transform g)
    H9  x -> h'(x) b(x) non-increasing on (0, eta)     (needs a transform h)

Analytic kinds answer H1-H7 from closed-form knowledge; tabulated and scaled
kinds are checked as finite-sample predicates on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Iterable, Sequence

import numpy as np

from .errors import MissingTransform, UndefinedDerivative

HYPOTHESES = ("H1", "H2", "H3", "H4", "H5", "H6", "H7", "H8", "H9")
BASIC = frozenset({"H1", "H2", "H3", "H4", "H5"})


@dataclass(frozen=True)
class ExtendedReal:
    """A real number or +inf, kept apart from float arithmetic."""

    value: float
    infinite: bool = False

    @classmethod
    def infinity(cls) -> "ExtendedReal":
        return cls(math.nan, True)

    @property
    def is_infinite(self) -> bool:
        return self.infinite

    def __float__(self) -> float:
        return math.inf if self.infinite else float(self.value)

    def __repr__(self) -> str:
        return "ExtendedReal(+inf)" if self.infinite else f"ExtendedReal({self.value!r})"


@dataclass(frozen=True)
class DerivativeProbe:
    point: float
    value: ExtendedReal

    @property
    def is_infinite(self) -> bool:
        return self.value.infinite


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


class DriftSpec:
    """Base class for drifts. Instances are immutable and vectorised."""

    kind: ClassVar[str] = "abstract"
    growth_constant: float

    def __call__(self, x):
        arr, scalar = _as_array(x)
        return _out(self._eval(np.atleast_1d(arr)).reshape(arr.shape), scalar)

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def right_derivative(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised b'(x+): finite values plus a mask of infinite entries.

        Entries flagged in the mask hold 0.0 and must not be used as numbers.
        """
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        vals, inf = self._derivative(arr)
        vals = np.where(inf, 0.0, vals)
        return vals, inf

    def _derivative(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise UndefinedDerivative(f"{self.kind} has no derivative rule")

    # structural information used by the approximation and certificate code
    def discontinuities(self) -> tuple[float, ...]:
        return ()

    def singular_points(self) -> tuple[float, ...]:
        """Points where b' is unbounded."""
        return ()

    def kinks(self) -> tuple[float, ...]:
        """Points where b is continuous but not smooth."""
        return ()

    @property
    def is_lipschitz(self) -> bool:
        return not self.singular_points() and not self.discontinuities()

    def exact_profile(self) -> dict[str, bool] | None:
        """Closed-form answers for H1-H7, or None for grid-checked kinds."""
        return None

    def derivative_exponent_at_zero(self) -> float | None:
        """gamma with b'(x) ~ x^-gamma as x -> 0+, when b'(0+) is infinite."""
        return None

    def power_pieces(self) -> tuple[tuple[float, ...], tuple[tuple[float, ...], ...]] | None:
        """(breakpoints, ascending coefficients per piece) when b is piecewise polynomial."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, repr=True)
class PowerLaw(DriftSpec):
    """b(x) = |x|^alpha, 0 < alpha < 1."""

    alpha: float
    kind: ClassVar[str] = "power_law"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def growth_constant(self) -> float:
        return 1.0

    def _eval(self, x):
        return np.abs(x) ** self.alpha

    def _derivative(self, x):
        inf = x == 0.0
        safe = np.where(inf, 1.0, np.abs(x))
        vals = self.alpha * np.sign(x) * safe ** (self.alpha - 1.0)
        return vals, inf

    def singular_points(self):
        return (0.0,)

    def exact_profile(self):
        return {h: True for h in ("H1", "H2", "H3", "H4", "H5", "H6", "H7")}

    def derivative_exponent_at_zero(self):
        return 1.0 - self.alpha

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class DiscontinuousSqrt(DriftSpec):
    """b(x) = sqrt(x) for x >= 0 and sqrt(-x) + jump for x < 0.

    jump = 1 is the drift with an upward jump from the right that the monotone
    scheme handles via a smoothed family; jump = -1 gives the example used
    for the negative-derivative noise test.
    """

    jump: float = 1.0
    kind: ClassVar[str] = "discontinuous_sqrt"

    @property
    def growth_constant(self) -> float:
        return 0.5 + abs(self.jump)

    def _eval(self, x):
        return np.where(x >= 0.0, np.sqrt(np.abs(x)), np.sqrt(np.abs(x)) + self.jump)

    def _derivative(self, x):
        inf = x == 0.0
        safe = np.where(inf, 1.0, np.abs(x))
        vals = np.where(x > 0.0, 0.5 / np.sqrt(safe), -0.5 / np.sqrt(safe))
        return vals, inf

    def discontinuities(self):
        return (0.0,) if self.jump != 0.0 else ()

    def singular_points(self):
        return (0.0,)

    def exact_profile(self):
        up = self.jump >= 0.0
        return {
            "H1": True,
            "H2": True,
            "H3": True,
            "H4": up,
            "H5": up,
            "H6": self.jump == 0.0,
            "H7": True,
        }

    def derivative_exponent_at_zero(self):
        return 0.5

    def to_dict(self):
        return {"kind": self.kind, "jump": self.jump}


@dataclass(frozen=True)
class Linear(DriftSpec):
    slope: float
    kind: ClassVar[str] = "linear"

    @property
    def growth_constant(self) -> float:
        return abs(self.slope)

    def _eval(self, x):
        return self.slope * x

    def _derivative(self, x):
        return np.full_like(x, self.slope), np.zeros(x.shape, dtype=bool)

    def exact_profile(self):
        s = self.slope
        return {
            "H1": True,
            "H2": s >= 0,
            "H3": True,
            "H4": s <= 0,
            "H5": s <= 0,
            "H6": True,
            "H7": True,
        }

    def power_pieces(self):
        return (), ((0.0, self.slope),)

    def to_dict(self):
        return {"kind": self.kind, "slope": self.slope}


@dataclass(frozen=True)
class Zero(DriftSpec):
    kind: ClassVar[str] = "zero"

    @property
    def growth_constant(self) -> float:
        return 0.0

    def _eval(self, x):
        return np.zeros_like(x)

    def _derivative(self, x):
        return np.zeros_like(x), np.zeros(x.shape, dtype=bool)

    def exact_profile(self):
        return {h: True for h in ("H1", "H2", "H3", "H4", "H5", "H6", "H7")}

    def power_pieces(self):
        return (), ((0.0,),)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ScaledPower(DriftSpec):
    """b(x) = r(x) |x|^alpha with a user-supplied scale function r.

    Validity of r is not assumed; ask ``check_hypotheses``.
    """

    alpha: float
    scale: Callable[[np.ndarray], np.ndarray]
    scale_derivative: Callable[[np.ndarray], np.ndarray] | None = None
    growth: float | None = None
    name: str = "r"
    kind: ClassVar[str] = "scaled_power"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def growth_constant(self) -> float:
        if self.growth is not None:
            return self.growth
        xs = np.linspace(-64.0, 64.0, 4001)
        return float(np.max(np.abs(self._eval(xs)) / (1.0 + np.abs(xs))))

    def _eval(self, x):
        return np.asarray(self.scale(x), dtype=float) * np.abs(x) ** self.alpha

    def _derivative(self, x):
        if self.scale_derivative is None:
            raise UndefinedDerivative("ScaledPower needs scale_derivative for b'")
        r = np.asarray(self.scale(x), dtype=float)
        dr = np.asarray(self.scale_derivative(x), dtype=float)
        at0 = x == 0.0
        inf = at0 & (np.asarray(self.scale(np.full_like(x, 1e-300)), dtype=float) > 0)
        safe = np.where(at0, 1.0, np.abs(x))
        vals = dr * safe**self.alpha + r * self.alpha * np.sign(x) * safe ** (self.alpha - 1)
        vals = np.where(at0 & ~inf, 0.0, vals)
        return vals, inf

    def singular_points(self):
        return (0.0,)

    def derivative_exponent_at_zero(self):
        return 1.0 - self.alpha

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "scale": self.name}


@dataclass(frozen=True)
class TabulatedPiecewise(DriftSpec):
    """Piecewise polynomial drift.

    ``breakpoints`` x_0 < ... < x_{k-1} split the line into k+1 intervals
    (-inf, x_0), [x_0, x_1), ..., [x_{k-1}, inf); ``pieces`` holds one
    ascending power-basis coefficient tuple per interval. ``kink_limits``
    declares b'(x+) at breakpoints where the one-sided derivatives differ.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[tuple[float, ...], ...]
    kink_limits: tuple[tuple[float, float], ...] = ()
    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        pcs = tuple(tuple(float(c) for c in p) for p in self.pieces)
        if len(pcs) != len(bps) + 1:
            raise ValueError("need exactly len(breakpoints) + 1 pieces")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)

    @classmethod
    def cubic_with_tails(cls, linear: float, cubic: float, radius: float) -> "TabulatedPiecewise":
        """linear*x + cubic*x^3 on [-radius, radius], continued by its tangent lines.

        The result is C^1, odd, vanishes at 0 and is globally Lipschitz.
        """
        r = float(radius)
        value = linear * r + cubic * r**3
        slope = linear + 3.0 * cubic * r**2
        return cls(
            (-r, r),
            ((-value + slope * r, slope), (0.0, linear, 0.0, cubic), (value - slope * r, slope)),
        )

    def _piece_index(self, x):
        return np.searchsorted(np.asarray(self.breakpoints), x, side="right")

    def _eval(self, x):
        idx = self._piece_index(x)
        out = np.empty_like(x)
        for k, coeffs in enumerate(self.pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = np.polynomial.polynomial.polyval(x[sel], coeffs)
        return out

    def _piece_derivative(self, k: int, x):
        return np.polynomial.polynomial.polyval(
            x, np.polynomial.polynomial.polyder(self.pieces[k]) if len(self.pieces[k]) > 1 else [0.0]
        )

    def _derivative(self, x):
        idx = self._piece_index(x)
        out = np.empty_like(x)
        for k in range(len(self.pieces)):
            sel = idx == k
            if np.any(sel):
                out[sel] = self._piece_derivative(k, x[sel])
        declared = dict(self.kink_limits)
        for j, bp in enumerate(self.breakpoints):
            hit = x == bp
            if not np.any(hit):
                continue
            left = float(self._piece_derivative(j, np.array([bp]))[0])
            right = float(self._piece_derivative(j + 1, np.array([bp]))[0])
            if left != right:
                if bp not in declared:
                    raise UndefinedDerivative(f"kink at {bp} has no declared right limit")
                out[hit] = declared[bp]
        return out, np.zeros(x.shape, dtype=bool)

    def discontinuities(self):
        out = []
        for j, bp in enumerate(self.breakpoints):
            left = np.polynomial.polynomial.polyval(bp, self.pieces[j])
            right = np.polynomial.polynomial.polyval(bp, self.pieces[j + 1])
            if not math.isclose(left, right, rel_tol=1e-12, abs_tol=1e-12):
                out.append(bp)
        return tuple(out)

    def kinks(self):
        return tuple(b for b in self.breakpoints if b not in self.discontinuities())

    def power_pieces(self):
        return self.breakpoints, self.pieces

    @property
    def growth_constant(self) -> float:
        outer = (self.pieces[0], self.pieces[-1])
        if any(len(np.trim_zeros(np.asarray(p), "b")) > 2 for p in outer):
            return math.inf
        lo = (self.breakpoints[0] if self.breakpoints else 0.0) - 1.0
        hi = (self.breakpoints[-1] if self.breakpoints else 0.0) + 1.0
        span = max(abs(lo), abs(hi))
        xs = np.concatenate([np.linspace(-4 * span - 1, 4 * span + 1, 8001), self.breakpoints])
        ratio = float(np.max(np.abs(self._eval(xs)) / (1.0 + np.abs(xs))))
        slopes = [abs(p[1]) if len(p) > 1 else 0.0 for p in outer]
        return max(ratio, *slopes)

    def to_dict(self):
        return {
            "kind": self.kind,
            "breakpoints": list(self.breakpoints),
            "pieces": [list(p) for p in self.pieces],
        }


@dataclass(frozen=True)
class Reflected(DriftSpec):
    """z -> -b(-z); maps the maximal problem onto a minimal one."""

    base: DriftSpec
    kind: ClassVar[str] = "reflected"

    @property
    def growth_constant(self) -> float:
        return self.base.growth_constant

    def _eval(self, x):
        return -self.base._eval(-x)

    def _derivative(self, x):
        # b~'(z+) = lim_{y -> z+} b'(-y), the left limit of b' at -z;
        # away from declared special points that is just b'(-z).
        special = set(self.base.singular_points()) | set(self.base.discontinuities())
        vals, inf = self.base._derivative(-x)
        for p in special:
            hit = x == -p
            if np.any(hit):
                inf = inf | hit
        return vals, inf

    def discontinuities(self):
        return tuple(-p for p in self.base.discontinuities())

    def singular_points(self):
        return tuple(-p for p in self.base.singular_points())

    def kinks(self):
        return tuple(-p for p in self.base.kinks())

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict()}


def eval_drift(spec: DriftSpec, x):
    return spec(x)


def eval_drift_right_derivative(spec: DriftSpec, x: float) -> DerivativeProbe:
    vals, inf = spec.right_derivative(np.array([float(x)]))
    if inf[0]:
        return DerivativeProbe(float(x), ExtendedReal.infinity())
    return DerivativeProbe(float(x), ExtendedReal(float(vals[0])))


def drift_from_dict(data: dict) -> DriftSpec:
    kind = data.get("kind")
    if kind == "power_law":
        return PowerLaw(float(data["alpha"]))
    if kind == "discontinuous_sqrt":
        return DiscontinuousSqrt(float(data.get("jump", 1.0)))
    if kind == "linear":
        return Linear(float(data["slope"]))
    if kind == "zero":
        return Zero()
    if kind == "tabulated":
        return TabulatedPiecewise(
            tuple(data.get("breakpoints", ())),
            tuple(tuple(p) for p in data["pieces"]),
        )
    if kind == "reflected":
        return Reflected(drift_from_dict(data["base"]))
    raise ValueError(f"unknown drift kind {kind!r}")


# ---------------------------------------------------------------------------
# transforms for H8 / H9


@dataclass(frozen=True)
class Transform:
    """Increasing C^1 map on [0, eta) with its derivative."""

    func: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    name: str = "g"


def power_transform(alpha: float) -> Transform:
    """g(x) = x^(1-alpha) / (1-alpha), so g'(x) = x^-alpha."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("power transform needs 0 <= alpha < 1")
    return Transform(
        func=lambda x: np.asarray(x, dtype=float) ** (1.0 - alpha) / (1.0 - alpha),
        derivative=lambda x: np.asarray(x, dtype=float) ** (-alpha),
        name=f"x^{1 - alpha:g}/{1 - alpha:g}",
    )


def default_transform(spec: DriftSpec) -> Transform:
    alpha = getattr(spec, "alpha", None)
    if alpha is None and isinstance(spec, DiscontinuousSqrt):
        alpha = 0.5
    if alpha is None and isinstance(spec, Linear):
        alpha = 0.0
    if alpha is None:
        raise MissingTransform(f"no default transform for {spec.kind}")
    return power_transform(alpha)


# ---------------------------------------------------------------------------
# hypothesis predicates


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    status: str  # "holds" | "fails" | "skipped"
    fails_at: float | None = None
    method: str = "grid"  # "exact" when the grid was not used

    @property
    def holds(self) -> bool:
        return self.status == "holds"


@dataclass(frozen=True)
class HypothesisReport:
    checks: dict[str, HypothesisCheck] = field(default_factory=dict)

    def __getitem__(self, name: str) -> HypothesisCheck:
        return self.checks[name]

    def all_hold(self, names: Iterable[str] | None = None) -> bool:
        names = self.checks.keys() if names is None else names
        return all(self.checks[n].holds for n in names)

    def to_dict(self) -> dict:
        return {
            k: {"status": v.status, "fails_at": v.fails_at, "method": v.method}
            for k, v in self.checks.items()
        }


def default_hypothesis_grid(n_max: float = 64.0, size: int = 4001) -> np.ndarray:
    return np.linspace(-n_max, n_max, size)


def _first_decrease(xs: np.ndarray, vals: np.ndarray) -> float | None:
    """First x_i with vals[i+1] < vals[i] (x sorted ascending)."""
    bad = np.nonzero(np.diff(vals) < 0.0)[0]
    return None if bad.size == 0 else float(xs[bad[0]])


def _first_increase(xs: np.ndarray, vals: np.ndarray) -> float | None:
    bad = np.nonzero(np.diff(vals) > 0.0)[0]
    return None if bad.size == 0 else float(xs[bad[0]])


def _composite_monotone(spec: DriftSpec, transform: Transform, side: str, xs: np.ndarray, slack: float):
    """Check the H8/H9 composite on grid points; returns (ok, fails_at)."""
    if side == "H9":
        pts = np.sort(xs[xs > 0.0])
        comp = np.asarray(transform.derivative(pts), dtype=float) * spec(pts)
    else:
        pts = np.sort(xs[xs < 0.0])
        comp = np.asarray(transform.derivative(-pts), dtype=float) * spec(pts)
    if pts.size < 2:
        return True, None
    scale = slack * max(1.0, float(np.max(np.abs(comp))))
    bad = np.nonzero(np.diff(comp) > scale)[0]
    return bad.size == 0, (None if bad.size == 0 else float(pts[bad[0]]))


def check_hypotheses(
    spec: DriftSpec,
    which: Iterable[str] = HYPOTHESES[:7],
    grid: Sequence[float] | np.ndarray | None = None,
    aux: Transform | None = None,
    *,
    eta: float = 1.0,
    exact: bool = True,
    slack: float = 0.0,
) -> HypothesisReport:
    """Verify hypotheses on b, exactly for analytic kinds or on ``grid``.

    Monotonicity is checked between adjacent grid points and sign conditions
    pointwise, so a failure on a grid persists on every refinement of it.
    H8/H9 always use the grid restricted to (-eta, 0) / (0, eta).
    """
    which = list(which)
    unknown = set(which) - set(HYPOTHESES)
    if unknown:
        raise ValueError(f"unknown hypotheses {sorted(unknown)}")
    if ("H8" in which or "H9" in which) and aux is None:
        raise MissingTransform("H8/H9 need a transform g or h")
    xs = np.sort(np.asarray(grid if grid is not None else default_hypothesis_grid(), dtype=float))
    profile = spec.exact_profile() if exact else None
    checks: dict[str, HypothesisCheck] = {}

    pos = xs[xs > 0.0]
    nonpos = xs[xs <= 0.0]
    for h in which:
        if h in ("H8", "H9"):
            window = xs[(xs > -eta) & (xs < eta)]
            ok, where = _composite_monotone(spec, aux, h, window, slack if slack else 1e-12)
            checks[h] = HypothesisCheck(h, "holds" if ok else "fails", where)
            continue
        if profile is not None and h in profile:
            checks[h] = HypothesisCheck(h, "holds" if profile[h] else "fails", None, "exact")
            continue
        where: float | None = None
        ok = True
        if h == "H1":
            ok = abs(float(spec(0.0))) <= 1e-14
            where = None if ok else 0.0
        elif h == "H2":
            where = _first_decrease(pos, spec(pos))
            ok = where is None
        elif h == "H3":
            jumps = [d for d in spec.discontinuities() if d >= 0.0]
            if jumps:
                ok, where = False, float(jumps[0])
            else:
                try:
                    d, inf = spec.right_derivative(pos)
                except UndefinedDerivative:
                    checks[h] = HypothesisCheck(h, "skipped")
                    continue
                d = np.where(inf, np.inf, d)
                where = _first_increase(pos, d)
                ok = where is None
        elif h == "H4":
            ax = np.abs(xs)
            bad = np.nonzero(spec(ax) > spec(-ax))[0]
            ok = bad.size == 0
            where = None if ok else float(xs[bad[0]])
        elif h == "H5":
            where = _first_increase(nonpos, spec(nonpos))
            ok = where is None
        elif h == "H6":
            jumps = spec.discontinuities()
            if jumps:
                ok, where = False, float(jumps[0])
            else:
                c = spec.growth_constant
                bad = np.nonzero(np.abs(spec(xs)) > c * (1.0 + np.abs(xs)))[0]
                ok = bad.size == 0
                where = None if ok else float(xs[bad[0]])
        elif h == "H7":
            try:
                probe = eval_drift_right_derivative(spec, 0.0)
            except UndefinedDerivative:
                checks[h] = HypothesisCheck(h, "skipped")
                continue
            if not probe.is_infinite:
                ok = True
            else:
                small = pos[: min(20, pos.size)]
                if small.size < 3:
                    checks[h] = HypothesisCheck(h, "skipped")
                    continue
                d, _ = spec.right_derivative(small)
                slope = np.polyfit(np.log(small), np.log(np.abs(d)), 1)[0]
                ok = -slope < 1.0
                where = None if ok else 0.0
        checks[h] = HypothesisCheck(h, "holds" if ok else "fails", where)
    return HypothesisReport(checks)
