"""Scenario files (TOML).

Grammar
-------
Top level keys::

    name = "sqrt-brownian"      # required, used in output file names
    horizon = 1.0               # T > 0, default 1
    steps = 16384               # grid N >= 2, default 2^14
    output_dir = "out"          # optional

Tables::

    [drift]        kind = power_law | discontinuous_sqrt | linear | zero | tabulated
                   alpha (power_law, 0 < alpha < 1), jump (discontinuous_sqrt),
                   slope (linear), breakpoints + pieces (tabulated)
    [noise]        kind = brownian | abs_brownian | neg_abs_brownian | smooth | zero | external
                   seed (sampled kinds, 0 <= seed < 2^64), alpha and beta (smooth, > 0),
                   file and column (external, CSV with a t column and a value
                   column, default omega)
    [solver]       n_max, stage_tolerance, integrator, step_safety, schedule,
                   approx_range, maximal_route, max_substeps
    [certificates] select = [...] from iyanaga, nonneg_noise, lakshmikantham,
                   peano_h8, peano_h9; eta > 0 for the Peano tests
    [ensemble]     paths >= 1, seed_base, refinement = [N1, N2, ...] (increasing),
                   certificates = [...]
    [h7]           alpha in (0, 1], paths, steps, seed_base
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .drift_catalog import DriftSpec, drift_from_dict
from .errors import ScenarioParseError, ScenarioValidationError
from .extremal_solver import Integrator, Schedule, SolveSettings
from .noise_paths import NoiseKind, NoisePath, PathGrid, load_external, make_noise

CERTIFICATES = ("iyanaga", "nonneg_noise", "lakshmikantham", "peano_h8", "peano_h9")
DRIFT_KINDS = ("power_law", "discontinuous_sqrt", "linear", "zero", "tabulated")
_U64 = 2**64


@dataclass(frozen=True)
class Scenario:
    name: str
    drift: dict
    noise: dict
    horizon: float = 1.0
    steps: int = 2**14
    solver: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    h7: dict = field(default_factory=dict)
    output_dir: str | None = None
    base_dir: Path = Path(".")

    def drift_spec(self) -> DriftSpec:
        return drift_from_dict(self.drift)

    def grid(self) -> PathGrid:
        return PathGrid.uniform(self.steps)

    def settings(self) -> SolveSettings:
        return SolveSettings(**self.solver)

    @property
    def noise_kind(self) -> NoiseKind:
        return NoiseKind(self.noise["kind"])

    def noise_params(self) -> dict:
        kind = self.noise_kind
        if kind is NoiseKind.SMOOTH:
            return {"alpha": float(self.noise.get("alpha", 1.0)), "beta": float(self.noise.get("beta", 1.0))}
        if kind is NoiseKind.EXTERNAL:
            return {"file": str(self.resolve(self.noise["file"]))}
        return {}

    def noise_path(self, seed: int | None = None) -> NoisePath:
        if self.noise_kind is NoiseKind.EXTERNAL:
            return load_external(self.resolve(self.noise["file"]), self.noise.get("column", "omega"))
        seed = self.noise.get("seed") if seed is None else seed
        return make_noise(self.noise_kind, self.grid(), self.horizon, seed=seed, **self.noise_params())

    def resolve(self, file: str) -> Path:
        p = Path(file)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, *, seed: int | None = None, steps: int | None = None) -> "Scenario":
        noise = dict(self.noise)
        ensemble = dict(self.ensemble)
        if seed is not None:
            noise["seed"] = int(seed)
            ensemble["seed_base"] = int(seed)
        data = {**self.__dict__, "noise": noise, "ensemble": ensemble}
        if steps is not None:
            data["steps"] = int(steps)
        out = Scenario(**data)
        validate(out)
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "horizon": self.horizon,
            "steps": self.steps,
            "drift": self.drift,
            "noise": self.noise,
            "solver": self.solver,
            "certificates": self.certificates,
            "ensemble": self.ensemble,
            "h7": self.h7,
        }


def _line_of(message: str) -> str:
    m = re.search(r"line (\d+)", message)
    return f"line {m.group(1)}" if m else "unknown line"


def parse_text(text: str, base_dir: Path | str = ".") -> Scenario:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioParseError(f"{_line_of(str(exc))}: {exc}") from exc
    return from_dict(data, base_dir)


def load_scenario(file: str | Path) -> Scenario:
    file = Path(file)
    text = file.read_text()  # OSError propagates: an I/O failure, not a parse error
    try:
        return parse_text(text, file.parent)
    except ScenarioParseError as exc:
        raise ScenarioParseError(f"{file}: {exc}") from exc


_TOP = {"name", "horizon", "steps", "output_dir", "drift", "noise", "solver", "certificates", "ensemble", "h7"}
_SOLVER_KEYS = {
    "n_max",
    "stage_tolerance",
    "integrator",
    "step_safety",
    "schedule",
    "approx_range",
    "maximal_route",
    "n_start",
    "substep",
    "max_substeps",
}


def from_dict(data: dict, base_dir: Path | str = ".") -> Scenario:
    unknown = set(data) - _TOP
    if unknown:
        raise ScenarioParseError(f"unknown top-level field(s): {', '.join(sorted(unknown))}")
    for key in ("name", "drift", "noise"):
        if key not in data:
            raise ScenarioParseError(f"missing field '{key}'")
    for key in ("drift", "noise", "solver", "certificates", "ensemble", "h7"):
        if key in data and not isinstance(data[key], dict):
            raise ScenarioParseError(f"field '{key}' must be a table")
    bad_solver = set(data.get("solver", {})) - _SOLVER_KEYS
    if bad_solver:
        raise ScenarioParseError(f"unknown solver field(s): {', '.join(sorted(bad_solver))}")
    try:
        sc = Scenario(
            name=str(data["name"]),
            drift=dict(data["drift"]),
            noise=dict(data["noise"]),
            horizon=float(data.get("horizon", 1.0)),
            steps=int(data.get("steps", 2**14)),
            solver=dict(data.get("solver", {})),
            certificates=dict(data.get("certificates", {})),
            ensemble=dict(data.get("ensemble", {})),
            h7=dict(data.get("h7", {})),
            output_dir=data.get("output_dir"),
            base_dir=Path(base_dir),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"bad field type: {exc}") from exc
    validate(sc)
    return sc


def _num(problems, table, key, value, lo=None, hi=None, lo_open=True, hi_open=True, integer=False):
    where = f"{table}.{key}" if table else key
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (integer and not isinstance(value, int)):
        problems.append(f"{where} must be {'an integer' if integer else 'a number'}")
        return
    if isinstance(value, float) and not math.isfinite(value):
        problems.append(f"{where} must be finite")
        return
    if lo is not None and (value <= lo if lo_open else value < lo):
        problems.append(f"{where} = {value} outside range {'(' if lo_open else '['}{lo}, {hi if hi is not None else 'inf'}{')' if hi_open else ']'}")
        return
    if hi is not None and (value >= hi if hi_open else value > hi):
        problems.append(f"{where} = {value} outside range {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")


def validate(sc: Scenario) -> None:
    """Collect every range violation and raise them together."""
    p: list[str] = []
    if not sc.name or not re.fullmatch(r"[A-Za-z0-9_.-]+", sc.name):
        p.append("name must be non-empty and use only letters, digits, '.', '_' or '-'")
    _num(p, "", "horizon", sc.horizon, 0.0)
    _num(p, "", "steps", sc.steps, 2, lo_open=False, integer=True)

    d = sc.drift
    kind = d.get("kind")
    if kind not in DRIFT_KINDS:
        p.append(f"drift.kind must be one of {', '.join(DRIFT_KINDS)}")
    elif kind == "power_law":
        _num(p, "drift", "alpha", d.get("alpha"), 0.0, 1.0)
    elif kind == "discontinuous_sqrt":
        _num(p, "drift", "jump", d.get("jump", 1.0))
    elif kind == "linear":
        _num(p, "drift", "slope", d.get("slope"))
    elif kind == "tabulated":
        try:
            drift_from_dict(d)
        except (KeyError, TypeError, ValueError) as exc:
            p.append(f"drift tabulated: {exc}")

    n = sc.noise
    nkind = n.get("kind")
    kinds = [k.value for k in NoiseKind]
    if nkind not in kinds:
        p.append(f"noise.kind must be one of {', '.join(kinds)}")
    elif nkind in ("brownian", "abs_brownian", "neg_abs_brownian"):
        if "seed" not in n:
            p.append(f"noise.seed is required for {nkind} noise")
        else:
            _num(p, "noise", "seed", n["seed"], 0, _U64, lo_open=False, integer=True)
    elif nkind == "smooth":
        _num(p, "noise", "alpha", n.get("alpha", 1.0), 0.0)
        _num(p, "noise", "beta", n.get("beta", 1.0), 0.0)
    elif nkind == "external":
        if "file" not in n:
            p.append("noise.file is required for external noise")
        elif not sc.resolve(n["file"]).is_file():
            p.append(f"noise.file {n['file']} does not exist")

    s = sc.solver
    if "n_max" in s:
        _num(p, "solver", "n_max", s["n_max"], 2, lo_open=False, integer=True)
    if "stage_tolerance" in s:
        _num(p, "solver", "stage_tolerance", s["stage_tolerance"], 0.0)
    if "step_safety" in s:
        _num(p, "solver", "step_safety", s["step_safety"], 0.0, 1.0, hi_open=False)
    if "approx_range" in s:
        _num(p, "solver", "approx_range", s["approx_range"], 0.0)
    if "max_substeps" in s:
        _num(p, "solver", "max_substeps", s["max_substeps"], 1, lo_open=False, integer=True)
    if "n_start" in s:
        _num(p, "solver", "n_start", s["n_start"], 1, lo_open=False, integer=True)
    if "integrator" in s and s["integrator"] not in [i.value for i in Integrator]:
        p.append(f"solver.integrator must be one of {', '.join(i.value for i in Integrator)}")
    if "schedule" in s and s["schedule"] not in [i.value for i in Schedule]:
        p.append(f"solver.schedule must be one of {', '.join(i.value for i in Schedule)}")
    if "maximal_route" in s and s["maximal_route"] not in ("reflection", "plus_shift"):
        p.append("solver.maximal_route must be reflection or plus_shift")

    c = sc.certificates
    for name in c.get("select", []):
        if name not in CERTIFICATES:
            p.append(f"certificates.select: unknown certificate {name!r}")
    if "eta" in c:
        _num(p, "certificates", "eta", c["eta"], 0.0)

    e = sc.ensemble
    if "paths" in e:
        _num(p, "ensemble", "paths", e["paths"], 1, lo_open=False, integer=True)
    if "seed_base" in e:
        _num(p, "ensemble", "seed_base", e["seed_base"], 0, _U64, lo_open=False, integer=True)
    ref = e.get("refinement", [])
    if ref and (any(not isinstance(v, int) or v < 2 for v in ref) or any(b <= a for a, b in zip(ref, ref[1:]))):
        p.append("ensemble.refinement must be an increasing list of integers >= 2")
    for name in e.get("certificates", []):
        if name not in ("iyanaga", "nonneg_noise", "lakshmikantham"):
            p.append(f"ensemble.certificates: unknown certificate {name!r}")

    h = sc.h7
    if h:
        _num(p, "h7", "alpha", h.get("alpha", 0.5), 0.0, 1.0, hi_open=False)
        _num(p, "h7", "paths", h.get("paths", 1000), 1, lo_open=False, integer=True)
        _num(p, "h7", "steps", h.get("steps", 4096), 2, lo_open=False, integer=True)
    if p:
        raise ScenarioValidationError(p)


__all__ = ["CERTIFICATES", "Scenario", "from_dict", "load_scenario", "parse_text", "validate"]
