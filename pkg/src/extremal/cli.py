"""Command line front end.

    extremal solve      --scenario FILE [--seed S] [--grid N] [--out DIR] [--svg]
    extremal extremal   --scenario FILE ...
    extremal certify    --scenario FILE ...
    extremal ensemble   --scenario FILE ...
    extremal approx-cache --scenario FILE [--count K]
    extremal reproduce  CASE [--out DIR] [--svg]

The default output directory is $EXTREMAL_OUT, then the scenario's
``output_dir``, then ``./extremal-out``. Exit status is 0 whenever the
computation ran, whatever the verdicts; 2 for parse, validation or usage
errors; 3 for file I/O errors; 1 for any other operational failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import certify_iyanaga, certify_lakshmikantham, certify_nonneg_noise, certify_peano, a_profile
from .drift_catalog import DriftSpec
from .errors import (
    ExtremalError,
    NotConverged,
    ScenarioParseError,
    ScenarioValidationError,
    UnknownCase,
)
from .extremal_solver import SolutionPath, gap, maximal_solution, minimal_solution
from .jsonio import SCHEMA_VERSION, write_json
from .monte_carlo import estimate_h7, refinement_study, run_gap_ensemble
from .noise_paths import NoisePath, derive_seed
from .poly_approx import approximate_family, family_from_dict, family_to_dict
from .scenario import Scenario, from_dict, load_scenario
from .svg import write_line_plot

ENV_OUT = "EXTREMAL_OUT"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _solve(solver, b: DriftSpec, path: NoisePath, sc: Scenario) -> SolutionPath:
    try:
        return solver(b, path, sc.settings())
    except NotConverged as exc:
        return exc.solution


def _noise_dict(path: NoisePath) -> dict:
    return {**path.provenance.to_dict(), "steps": path.steps, "horizon": path.horizon}


def _certificates(sc: Scenario, b: DriftSpec, path: NoisePath, lo: SolutionPath | None, names) -> dict:
    out = {}
    eta = float(sc.certificates.get("eta", 1.0))
    for name in names:
        try:
            if name == "iyanaga":
                cert = certify_iyanaga(b, path, lo, initial_gap=sc.settings().stage_tolerance)
            elif name == "nonneg_noise":
                cert = certify_nonneg_noise(b, path)
            elif name == "lakshmikantham":
                cert = certify_lakshmikantham(path)
            elif name in ("peano_h8", "peano_h9"):
                cert = certify_peano(b, side=name[-2:], eta=eta)
            else:
                raise ValueError(name)
            out[name] = cert.to_dict()
        except ExtremalError as exc:
            # a certificate that does not apply is a report entry, not a failure
            out[name] = {"criterion": name, "verdict": "not_applicable", "error": exc.code, "message": str(exc)}
    return out


def _out_dir(args, sc: Scenario | None = None) -> Path:
    raw = args.out or os.environ.get(ENV_OUT) or (sc.output_dir if sc else None) or "extremal-out"
    out = Path(raw)
    if sc is not None and not out.is_absolute() and not args.out and not os.environ.get(ENV_OUT) and sc.output_dir:
        out = sc.base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.seed is not None or args.grid is not None:
        sc = sc.with_overrides(seed=args.seed, steps=args.grid)
    return sc


def _header(sc: Scenario, kind: str) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "scenario": sc.to_dict()}


def _write_solution(out: Path, stem: str, sol: SolutionPath, sc: Scenario, path: NoisePath) -> list[str]:
    sol.write_csv(out / f"{stem}.csv")
    data = {**_header(sc, "solution"), "noise": _noise_dict(path), "solution": sol.to_dict()}
    write_json(out / f"{stem}.json", data)
    return [f"{stem}.csv", f"{stem}.json"]


def _extremal_run(sc: Scenario, out: Path, svg: bool) -> tuple[dict, NoisePath, SolutionPath, SolutionPath]:
    b = sc.drift_spec()
    path = sc.noise_path()
    lo = _solve(minimal_solution, b, path, sc)
    hi = _solve(maximal_solution, b, path, sc)
    g = gap(lo, hi)
    files = _write_solution(out, f"{sc.name}_minimal", lo, sc, path)
    files += _write_solution(out, f"{sc.name}_maximal", hi, sc, path)
    if svg:
        series = [("minimal x", lo.times, lo.x), ("maximal x", hi.times, hi.x)]
        write_line_plot(out / f"{sc.name}_extremal.svg", series, f"{sc.name}: extremal solutions")
        files.append(f"{sc.name}_extremal.svg")
    data = {
        **_header(sc, "extremal"),
        "noise": _noise_dict(path),
        "gap": g.to_dict(),
        "minimal": {k: v for k, v in lo.to_dict().items() if k != "trail"},
        "maximal": {k: v for k, v in hi.to_dict().items() if k != "trail"},
        "files": files,
    }
    write_json(out / f"{sc.name}_extremal.json", data)
    return data, path, lo, hi


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    sc = _load(args)
    out = _out_dir(args, sc)
    b = sc.drift_spec()
    path = sc.noise_path()
    sol = _solve(minimal_solution, b, path, sc)
    _write_solution(out, f"{sc.name}_solution", sol, sc, path)
    if args.svg:
        series = [("x", sol.times, sol.x), ("y", sol.times, sol.y)]
        write_line_plot(out / f"{sc.name}_solution.svg", series, f"{sc.name}: solution")
    print(f"wrote {out / (sc.name + '_solution.csv')} (converged={sol.converged})")
    return EXIT_OK


def cmd_extremal(args) -> int:
    sc = _load(args)
    out = _out_dir(args, sc)
    data, *_ = _extremal_run(sc, out, args.svg)
    print(f"sup gap {data['gap']['sup_gap']:.3e}; wrote {out / (sc.name + '_extremal.json')}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = _load(args)
    out = _out_dir(args, sc)
    b = sc.drift_spec()
    path = sc.noise_path()
    names = list(sc.certificates.get("select", ["iyanaga"]))
    lo = _solve(minimal_solution, b, path, sc) if "iyanaga" in names else None
    certs = _certificates(sc, b, path, lo, names)
    data = {**_header(sc, "certificates"), "noise": _noise_dict(path), "certificates": certs}
    write_json(out / f"{sc.name}_certificates.json", data)
    if args.svg and lo is not None and "error" not in certs.get("iyanaga", {}):
        prof = a_profile(b, path, lo)
        vals = np.where(prof.infinite, np.nan, prof.values)
        write_line_plot(out / f"{sc.name}_a.svg", [("log10 a(t)", prof.times, vals)], f"{sc.name}: a(t)", log_y=True)
    for name, c in certs.items():
        print(f"{name}: {c['verdict']}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    sc = _load(args)
    out = _out_dir(args, sc)
    b = sc.drift_spec()
    e = sc.ensemble
    paths = int(e.get("paths", 10))
    seed_base = int(e.get("seed_base", sc.noise.get("seed", 0)))
    t0 = time.perf_counter()
    report = run_gap_ensemble(
        b,
        sc.noise_kind,
        paths,
        seed_base,
        sc.settings(),
        grid=sc.grid(),
        horizon=sc.horizon,
        certificates=tuple(e.get("certificates", ["iyanaga"])),
        noise_params=sc.noise_params(),
        scenario=sc.name,
    )
    data = {**report.to_dict(), "scenario_config": sc.to_dict()}
    timing = {"ensemble": report.wall_clock}
    if e.get("refinement"):
        t1 = time.perf_counter()
        tables = [
            refinement_study(
                b, sc.noise_kind, derive_seed(seed_base, i), e["refinement"], sc.settings(),
                horizon=sc.horizon, noise_params=sc.noise_params(),
            )
            for i in range(paths)
        ]
        ok = sum(t.non_increasing for t in tables)
        data["refinement"] = {
            "levels": list(e["refinement"]),
            "tables": [t.to_dict() for t in tables],
            "non_increasing": ok,
            "fraction_non_increasing": ok / paths,
        }
        timing["refinement"] = time.perf_counter() - t1
    if sc.h7:
        t1 = time.perf_counter()
        h = sc.h7
        est = estimate_h7(
            float(h.get("alpha", 0.5)), int(h.get("paths", 1000)), int(h.get("steps", 4096)), sc.horizon,
            int(h.get("seed_base", seed_base)),
        )
        data["h7"] = est.to_dict()
        timing["h7"] = time.perf_counter() - t1
    write_json(out / f"{sc.name}_ensemble.json", data)
    with (out / f"{sc.name}_ensemble.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["index", "seed", "sup_gap", "l1_gap", "min_difference", "converged", "stage_order_ok", "domination_ok", "apriori_ok"]
        w.writerow(cols)
        for r in report.records:
            d = r.to_dict()
            w.writerow(["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c]) for c in cols])
    timing["total"] = time.perf_counter() - t0
    write_json(out / f"{sc.name}_timing.json", {"schema_version": SCHEMA_VERSION, "kind": "timing", "seconds": timing})
    if args.svg:
        gaps = [np.nan if r.sup_gap is None else r.sup_gap for r in report.records]
        write_line_plot(
            out / f"{sc.name}_gaps.svg", [("log10 sup gap", np.arange(paths), gaps)], f"{sc.name}: gap per path", log_y=True
        )
    agg = report.aggregates
    print(f"{agg['below_threshold']}/{paths} paths below gap threshold; wrote {out / (sc.name + '_ensemble.json')}")
    return EXIT_OK


def cmd_approx_cache(args) -> int:
    """Build (or reuse) the consecutive approximant family for the scenario drift."""
    sc = _load(args)
    out = _out_dir(args, sc)
    b = sc.drift_spec()
    mode = "smoothed_discontinuous" if sc.drift.get("kind") == "discontinuous_sqrt" else "minus_shift"
    ns = list(range(1, args.count + 1))
    file = out / f"{sc.name}_poly_family.json"
    if file.exists():
        try:
            cached = json.loads(file.read_text())
            polys = family_from_dict(cached)
            if cached.get("drift") == b.to_dict() and [p.n for p in polys] == ns:
                print(f"reused {file}")
                return EXIT_OK
        except (ValueError, KeyError, TypeError):
            pass
    polys = approximate_family(b, ns, mode)
    write_json(file, family_to_dict(polys))
    print(f"wrote {file}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reproduce cases


def _case(name, drift, noise, select, **extra) -> dict:
    return {"name": name, "horizon": 1.0, "steps": 2**14, "drift": drift, "noise": noise, "certificates": {"select": select}, **extra}


SQRT = {"kind": "power_law", "alpha": 0.5}
CASES = {
    "sqrt-zero-noise": _case("sqrt-zero-noise", SQRT, {"kind": "zero"}, ["iyanaga"]),
    "sqrt-brownian": _case("sqrt-brownian", SQRT, {"kind": "brownian", "seed": 42}, ["iyanaga"]),
    "sqrt-abs-brownian": _case(
        "sqrt-abs-brownian", SQRT, {"kind": "abs_brownian", "seed": 7}, ["lakshmikantham", "nonneg_noise", "iyanaga"]
    ),
    "discontinuous-sqrt-brownian": _case(
        "discontinuous-sqrt-brownian", {"kind": "discontinuous_sqrt", "jump": 1.0}, {"kind": "brownian", "seed": 11},
        [], solver={"n_max": 64},
    ),
    "sqrt-neg-abs-brownian": _case("sqrt-neg-abs-brownian", SQRT, {"kind": "neg_abs_brownian", "seed": 13}, ["iyanaga"]),
    "smooth-noise-peano": _case(
        "smooth-noise-peano", SQRT, {"kind": "smooth", "alpha": 1.0, "beta": 1.0}, ["peano_h9"]
    ),
}


def _check(name: str, value, expected: str, passed: bool) -> dict:
    return {"name": name, "value": value, "expected": expected, "passed": bool(passed)}


def _verdict(certs: dict, name: str) -> str | None:
    return certs.get(name, {}).get("verdict")


def _expectations(case: str, ext: dict, lo: SolutionPath, hi: SolutionPath, certs: dict) -> list[dict]:
    g = ext["gap"]["sup_gap"]
    checks = []
    if case == "sqrt-zero-noise":
        sup_lo = float(np.max(np.abs(lo.y)))
        checks += [
            _check("minimal_sup", sup_lo, "< 1e-6", sup_lo < 1e-6),
            _check("maximal_at_T", float(hi.y[-1]), "within 1e-3 of 0.25", abs(hi.y[-1] - 0.25) < 1e-3),
            _check("sup_gap", g, "within 1e-3 of 0.25 (two distinct solutions)", abs(g - 0.25) < 1e-3),
            _check("iyanaga", _verdict(certs, "iyanaga"), "diverging", _verdict(certs, "iyanaga") == "diverging"),
        ]
        return checks
    limit = 1e-3 if case == "smooth-noise-peano" else 1e-2
    checks.append(_check("sup_gap", g, f"< {limit:g}", g < limit))
    checks.append(_check("converged", lo.converged and hi.converged, "true", lo.converged and hi.converged))
    if case == "discontinuous-sqrt-brownian":
        ok = all(r.bound_holds for s in (lo, hi) for r in s.trail)
        checks.append(_check("apriori_bound", ok, "holds on every stage", ok))
    for name in certs:
        want = "holds" if name.startswith("peano") else "integrable"
        checks.append(_check(name, _verdict(certs, name), want, _verdict(certs, name) == want))
    return checks


def run_case(case: str, out_root: Path, svg: bool = False) -> dict:
    if case not in CASES:
        raise UnknownCase(f"unknown case {case!r}; choose from {', '.join(CASES)}")
    sc = from_dict(CASES[case])
    out = out_root / case
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ext, path, lo, hi = _extremal_run(sc, out, svg)
    certs = _certificates(sc, sc.drift_spec(), path, lo, sc.certificates["select"])
    write_json(out / f"{case}_certificates.json", {**_header(sc, "certificates"), "noise": _noise_dict(path), "certificates": certs})
    checks = _expectations(case, ext, lo, hi, certs)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "reproduce",
        "case": case,
        "scenario": sc.to_dict(),
        "gap": ext["gap"],
        "certificates": {k: v.get("verdict") for k, v in certs.items()},
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        "files": ext["files"] + [f"{case}_extremal.json", f"{case}_certificates.json"],
    }
    write_json(out / f"{case}_summary.json", summary)
    write_json(
        out / f"{case}_timing.json",
        {"schema_version": SCHEMA_VERSION, "kind": "timing", "seconds": {"total": time.perf_counter() - t0}},
    )
    return summary


def cmd_reproduce(args) -> int:
    out = _out_dir(args)
    cases = list(CASES) if args.case == "all" else [args.case]
    for case in cases:
        s = run_case(case, out, args.svg)
        print(f"{case}: {'PASS' if s['passed'] else 'FAIL'} (sup gap {s['gap']['sup_gap']:.3e})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./extremal-out)")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--scenario", required=True, help="TOML scenario file")
    scen.add_argument("--seed", type=int, help="override the noise seed / ensemble seed base")
    scen.add_argument("--grid", type=int, help="override the grid size N")

    p = argparse.ArgumentParser(prog="extremal", description="Extremal solutions of noisy non-Lipschitz ODEs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common, scen], help="minimal solution").set_defaults(func=cmd_solve)
    sub.add_parser("extremal", parents=[common, scen], help="minimal and maximal solutions").set_defaults(
        func=cmd_extremal
    )
    sub.add_parser("certify", parents=[common, scen], help="uniqueness certificates").set_defaults(func=cmd_certify)
    sub.add_parser("ensemble", parents=[common, scen], help="Monte Carlo gap study").set_defaults(func=cmd_ensemble)
    ac = sub.add_parser("approx-cache", parents=[common, scen], help="build the approximant family JSON")
    ac.add_argument("--count", type=int, default=20, help="family members n = 1..count")
    ac.set_defaults(func=cmd_approx_cache)
    rp = sub.add_parser("reproduce", parents=[common], help="built-in example cases")
    rp.add_argument("case", help=f"one of {', '.join(CASES)} or all")
    rp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioParseError, UnknownCase) as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"IO_ERROR: {exc}", file=sys.stderr)
        return EXIT_IO
    except ExtremalError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
