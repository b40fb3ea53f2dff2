"""Noise paths: sampled Brownian motion and its transforms, smooth and external paths.

RNG contract
------------
Every sampled path is drawn from ``numpy.random.Generator(PCG64(seed))`` with
a 64-bit seed. Stream splitting derives child seeds with ``derive_seed``,
which folds each key into the parent through the SplitMix64 finaliser::

    z = (state + key * 0x9E3779B97F4A7C15) mod 2^64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

so path ``i`` of an ensemble uses ``derive_seed(base, i)`` and a refinement
level additionally mixes in its step count ``N``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import OutOfRange

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    z = (state + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base: int, *keys: int) -> int:
    """Mix integer keys into a 64-bit seed (see module docstring)."""
    state = int(base) & _MASK
    for key in keys:
        state = splitmix64((state + (int(key) & _MASK) * 0x9E3779B97F4A7C15) & _MASK)
    return state


class NoiseKind(str, Enum):
    BROWNIAN = "brownian"
    ABS_BROWNIAN = "abs_brownian"
    NEG_ABS_BROWNIAN = "neg_abs_brownian"
    SMOOTH = "smooth"
    ZERO = "zero"
    EXTERNAL = "external"


@dataclass(frozen=True)
class PathGrid:
    """Time grid: ``steps`` uniform steps on [0, T] or explicit times."""

    steps: int
    times_explicit: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("a path grid needs at least 2 steps")
        if self.times_explicit is not None:
            t = np.asarray(self.times_explicit)
            if len(t) != self.steps + 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ValueError("explicit times must start at 0, increase strictly and have steps+1 entries")

    @classmethod
    def uniform(cls, steps: int) -> "PathGrid":
        return cls(int(steps))

    @classmethod
    def explicit(cls, times) -> "PathGrid":
        t = tuple(float(v) for v in times)
        return cls(len(t) - 1, t)

    def times(self, horizon: float) -> np.ndarray:
        if self.times_explicit is not None:
            return np.asarray(self.times_explicit, dtype=float)
        return np.linspace(0.0, horizon, self.steps + 1)


@dataclass(frozen=True)
class Provenance:
    kind: NoiseKind
    seed: int | None = None
    params: tuple[tuple[str, float], ...] = ()
    source: str | None = None
    sign: int = 1  # -1 after an odd number of reflections

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "params": dict(self.params),
            "source": self.source,
            "sign": self.sign,
        }


@dataclass(frozen=True, eq=False)
class NoisePath:
    """A continuous path omega on [0, T] sampled on a grid.

    ``analytic`` paths (smooth, zero) are evaluated from their formula at any
    time; the others interpolate linearly between grid values.
    """

    times: np.ndarray
    values: np.ndarray
    provenance: Provenance
    analytic: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 3:
            raise ValueError("times and values must be 1-D arrays of equal length >= 3")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if v[0] != 0.0:
            raise ValueError("noise paths start at 0")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def kind(self) -> NoiseKind:
        return self.provenance.kind

    @property
    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_identically_zero(self) -> bool:
        return self.provenance.kind is NoiseKind.ZERO or (
            not np.any(self.values) and self.analytic
        )

    def __call__(self, t):
        return eval_path(self, t)


def _smooth_formula(t: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    safe = np.where(t > 0.0, t, 1.0)
    val = alpha * safe + safe ** (2.0 + beta) * np.sin(1.0 / safe)
    return np.where(t > 0.0, val, 0.0)


def eval_path(path: NoisePath, t):
    """omega(t): formula for analytic paths, linear interpolation otherwise."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > path.horizon):
        raise OutOfRange(f"t outside [0, {path.horizon}]")
    prov = path.provenance
    if path.analytic and prov.kind is NoiseKind.SMOOTH:
        out = prov.sign * _smooth_formula(arr, prov.param("alpha"), prov.param("beta"))
    elif path.analytic and prov.kind is NoiseKind.ZERO:
        out = np.zeros_like(arr)
    else:
        out = np.interp(arr, path.times, path.values)
    return float(out) if arr.ndim == 0 else out


def sample_brownian(seed: int, grid: PathGrid, horizon: float = 1.0) -> NoisePath:
    """Brownian path: cumulative sums of N(0, dt_i) increments, W_0 = 0."""
    times = grid.times(horizon)
    rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK))
    incr = rng.standard_normal(grid.steps) * np.sqrt(np.diff(times))
    values = np.concatenate(([0.0], np.cumsum(incr)))
    return NoisePath(times, values, Provenance(NoiseKind.BROWNIAN, seed=int(seed)))


def transform_abs(path: NoisePath) -> NoisePath:
    prov = replace(path.provenance, kind=NoiseKind.ABS_BROWNIAN, sign=1)
    return NoisePath(path.times, np.abs(path.values), prov)


def transform_neg_abs(path: NoisePath) -> NoisePath:
    prov = replace(path.provenance, kind=NoiseKind.NEG_ABS_BROWNIAN, sign=1)
    return NoisePath(path.times, -np.abs(path.values), prov)


def reflect(path: NoisePath) -> NoisePath:
    """omega -> -omega."""
    prov = replace(path.provenance, sign=-path.provenance.sign)
    return NoisePath(path.times, -path.values + 0.0, prov, path.analytic)


def smooth_path(alpha: float, beta: float, grid: PathGrid, horizon: float = 1.0) -> NoisePath:
    """omega_t = alpha t + t^(2+beta) sin(1/t), omega_0 = 0."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("smooth noise needs alpha > 0 and beta > 0")
    times = grid.times(horizon)
    prov = Provenance(NoiseKind.SMOOTH, params=(("alpha", float(alpha)), ("beta", float(beta))))
    return NoisePath(times, _smooth_formula(times, alpha, beta), prov, analytic=True)


def zero_path(grid: PathGrid, horizon: float = 1.0) -> NoisePath:
    times = grid.times(horizon)
    return NoisePath(times, np.zeros_like(times), Provenance(NoiseKind.ZERO), analytic=True)


def load_external(file: str | Path, column: str = "omega") -> NoisePath:
    """Read a CSV with a ``t`` column and a value column (default ``omega``)."""
    file = Path(file)
    with file.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "t" not in reader.fieldnames or column not in reader.fieldnames:
            raise ValueError(f"{file}: expected header with columns t and {column}")
        rows = [(float(r["t"]), float(r[column])) for r in reader]
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    prov = Provenance(NoiseKind.EXTERNAL, source=str(file))
    return NoisePath(t, v, prov)


def write_path_csv(path: NoisePath, file: str | Path) -> None:
    with Path(file).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "omega"])
        for t, v in zip(path.times, path.values):
            w.writerow([repr(float(t)), repr(float(v))])


def make_noise(
    kind: NoiseKind | str,
    grid: PathGrid,
    horizon: float = 1.0,
    *,
    seed: int | None = None,
    alpha: float = 1.0,
    beta: float = 1.0,
    file: str | Path | None = None,
) -> NoisePath:
    kind = NoiseKind(kind)
    if kind in (NoiseKind.BROWNIAN, NoiseKind.ABS_BROWNIAN, NoiseKind.NEG_ABS_BROWNIAN):
        if seed is None:
            raise ValueError(f"{kind.value} noise needs a seed")
        w = sample_brownian(seed, grid, horizon)
        if kind is NoiseKind.ABS_BROWNIAN:
            return transform_abs(w)
        if kind is NoiseKind.NEG_ABS_BROWNIAN:
            return transform_neg_abs(w)
        return w
    if kind is NoiseKind.SMOOTH:
        return smooth_path(alpha, beta, grid, horizon)
    if kind is NoiseKind.ZERO:
        return zero_path(grid, horizon)
    if file is None:
        raise ValueError("external noise needs a file")
    return load_external(file)


def noise_kernel_params(path: NoisePath) -> tuple[int, float, float, float]:
    """(mode, alpha, beta, sign) for the compiled integrators.

    mode 0: linear interpolation of grid values, 1: smooth formula, 2: zero.
    """
    prov = path.provenance
    if path.analytic and prov.kind is NoiseKind.SMOOTH:
        return 1, prov.param("alpha"), prov.param("beta"), float(prov.sign)
    if path.analytic and prov.kind is NoiseKind.ZERO:
        return 2, 0.0, 0.0, 1.0
    return 0, 0.0, 0.0, 1.0


__all__ = [
    "NoiseKind",
    "NoisePath",
    "PathGrid",
    "Provenance",
    "derive_seed",
    "eval_path",
    "load_external",
    "make_noise",
    "reflect",
    "sample_brownian",
    "smooth_path",
    "splitmix64",
    "transform_abs",
    "transform_neg_abs",
    "write_path_csv",
    "zero_path",
]
