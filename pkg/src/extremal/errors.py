"""Exception hierarchy. Each class carries the error code used in reports."""

from __future__ import annotations


class ExtremalError(Exception):
    code = "ERROR"


class UndefinedDerivative(ExtremalError):
    code = "UNDEFINED_DERIVATIVE"


class MissingTransform(ExtremalError):
    code = "MISSING_TRANSFORM"


class OutOfRange(ExtremalError):
    code = "OUT_OF_RANGE"


class BadMode(ExtremalError):
    code = "BAD_MODE"


class DegreeExhausted(ExtremalError):
    code = "DEGREE_EXHAUSTED"

    def __init__(self, message: str, best_error: float):
        super().__init__(f"{message} (best error {best_error:.3e})")
        self.best_error = best_error


class StepTooCoarse(ExtremalError):
    code = "STEP_TOO_COARSE"

    def __init__(self, message: str, required_steps: int):
        super().__init__(f"{message}; need N >= {required_steps}")
        self.required_steps = required_steps


class NotConverged(ExtremalError):
    """Raised when the stage limit stops without meeting the tolerance.

    ``solution`` holds the best (last) stage and its trail.
    """

    code = "NOT_CONVERGED"

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


class MonotonicityViolation(ExtremalError):
    code = "MONOTONICITY_VIOLATION"

    def __init__(self, message: str, n: int, time: float, amount: float):
        super().__init__(f"{message}: stage n={n} at t={time:.6g} by {amount:.3e}")
        self.n = n
        self.time = time
        self.amount = amount


class GridMismatch(ExtremalError):
    code = "GRID_MISMATCH"


class HypothesisViolation(ExtremalError):
    code = "HYPOTHESIS_VIOLATION"


class NegativeNoise(ExtremalError):
    code = "NEGATIVE_NOISE"


class BadTransform(ExtremalError):
    code = "BAD_TRANSFORM"


class UnknownCase(ExtremalError):
    code = "UNKNOWN_CASE"


class ScenarioParseError(ExtremalError):
    code = "PARSE_ERROR"


class ScenarioValidationError(ExtremalError):
    code = "VALIDATION_ERROR"

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)
