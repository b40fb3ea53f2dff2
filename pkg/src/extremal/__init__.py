"""Minimal and maximal solutions of x_t = x_0 + int_0^t b(x_s) ds + omega_t.

Modules
-------
drift_catalog      drift functions b, their one-sided derivatives and hypothesis checks
noise_paths        seeded Brownian, |W|, -|W|, smooth, zero and external noise paths
poly_approx        certified monotone polynomial approximants of shifted drifts
extremal_solver    staged construction of the minimal and maximal solutions
certificates       L1 and monotonicity tests that certify uniqueness
monte_carlo        seeded ensembles, grid refinement and the |W| derivative integral
cli                scenario-driven command line interface
"""

__version__ = "0.1.0"

from .certificates import (  # noqa: E402
    Certificate,
    Verdict,
    certify_iyanaga,
    certify_lakshmikantham,
    certify_nonneg_noise,
    certify_peano,
)
from .drift_catalog import (  # noqa: E402
    DiscontinuousSqrt,
    Linear,
    PowerLaw,
    Reflected,
    TabulatedPiecewise,
    Zero,
    check_hypotheses,
    drift_from_dict,
)
from .extremal_solver import (  # noqa: E402
    SolutionPath,
    SolveSettings,
    extremal_pair,
    gap,
    maximal_solution,
    minimal_solution,
)
from .noise_paths import NoiseKind, NoisePath, PathGrid, make_noise, sample_brownian  # noqa: E402

__all__ = [
    "Certificate",
    "DiscontinuousSqrt",
    "Linear",
    "NoiseKind",
    "NoisePath",
    "PathGrid",
    "PowerLaw",
    "Reflected",
    "SolutionPath",
    "SolveSettings",
    "TabulatedPiecewise",
    "Verdict",
    "Zero",
    "check_hypotheses",
    "certify_iyanaga",
    "certify_lakshmikantham",
    "certify_nonneg_noise",
    "certify_peano",
    "drift_from_dict",
    "extremal_pair",
    "gap",
    "make_noise",
    "maximal_solution",
    "minimal_solution",
    "sample_brownian",
]
