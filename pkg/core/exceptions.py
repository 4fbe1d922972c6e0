from typing import Any, Optional


class RVSeriesException(Exception):
    """
    Base exception class for all toolkit errors.
    All custom exceptions should inherit from this class.
    """
    exit_code: int = 2
    detail: str = "Internal error"
    error_code: str = "INTERNAL_ERROR"

    def __init__(self, detail: Optional[str] = None, exit_code: Optional[int] = None):
        self.detail = detail or self.detail
        self.exit_code = exit_code or self.exit_code
        super().__init__(self.detail)

    def __str__(self) -> str:
        return f"[{self.error_code}] {self.detail}"


# ========== VALIDATION EXCEPTIONS ==========

class ValidationException(RVSeriesException):
    """Exception raised when an argument or specification is invalid"""
    exit_code = 1
    detail = "Validation error"
    error_code = "VALIDATION_ERROR"


class InvalidParameterException(ValidationException):
    """Exception raised when a numeric parameter is outside its domain"""
    error_code = "INVALID_PARAMETER"

    def __init__(self, name: str, value: Any, constraint: str):
        self.name = name
        self.value = value
        self.constraint = constraint
        super().__init__(detail=f"{name}={value!r} violates {constraint}")


class GridMismatchException(ValidationException):
    """Exception raised when two paths live on different grids"""
    error_code = "GRID_MISMATCH"

    def __init__(self, left: int, right: int):
        super().__init__(detail=f"Grid mismatch: resolution {left} vs {right}")


class ConfigException(ValidationException):
    """Exception raised when a config text fails to parse or validate"""
    error_code = "CONFIG_ERROR"

    def __init__(self, issues: list):
        self.issues = list(issues)
        lines = "\n".join(f"  - {issue}" for issue in self.issues)
        super().__init__(detail=f"{len(self.issues)} config error(s):\n{lines}")


class UnknownPresetException(ValidationException):
    """Exception raised when a preset name is not checked in"""
    error_code = "UNKNOWN_PRESET"

    def __init__(self, name: str, available: list[str]):
        self.available = list(available)
        super().__init__(
            detail=f"Unknown preset '{name}'. Available: {', '.join(self.available)}"
        )


# ========== SIMULATION EXCEPTIONS ==========

class SimulationException(RVSeriesException):
    """Exception raised when a simulation cannot produce a valid draw"""
    detail = "Simulation error"
    error_code = "SIMULATION_ERROR"


class TruncationFailureException(SimulationException):
    """Exception raised when the term cap is reached with the bound above tolerance"""
    error_code = "TRUNCATION_FAILURE"

    def __init__(self, partial: Any, bound: float, tolerance: float):
        self.partial = partial
        self.bound = bound
        self.tolerance = tolerance
        super().__init__(
            detail=f"Residual bound {bound:.3e} above tolerance {tolerance:.3e} "
                   f"after {partial.j_used} terms"
        )


class PredictabilityViolationException(SimulationException):
    """Exception raised when a coefficient depends on a current or future innovation"""
    error_code = "PREDICTABILITY_VIOLATION"

    def __init__(self, term: int, drivers: tuple[int, ...]):
        super().__init__(
            detail=f"Coefficient {term} is driven by innovations {list(drivers)}; "
                   f"only indices < {term} are allowed"
        )


class TermCapExceededException(SimulationException):
    """Exception raised when more series terms are requested than the hard cap"""
    error_code = "TERM_CAP_EXCEEDED"

    def __init__(self, requested: int, cap: int):
        super().__init__(detail=f"Requested {requested} terms, hard cap is {cap}")


# ========== STATISTICAL EXCEPTIONS ==========

class StatisticalPreconditionException(RVSeriesException):
    """Exception raised when an estimator's preconditions do not hold"""
    detail = "Statistical precondition failed"
    error_code = "STATISTICAL_PRECONDITION"


class InsufficientDataException(StatisticalPreconditionException):
    """Exception raised when too few observations or exceedances are available"""
    error_code = "INSUFFICIENT_DATA"

    def __init__(self, needed: int, available: int, what: str = "observations"):
        self.needed = needed
        self.available = available
        super().__init__(detail=f"Need at least {needed} {what}, got {available}")


class EmptySampleException(StatisticalPreconditionException):
    """Exception raised when an estimator receives no data"""
    error_code = "EMPTY_SAMPLE"

    def __init__(self, what: str = "sample"):
        super().__init__(detail=f"Empty {what}")


class DivergentSeriesException(StatisticalPreconditionException):
    """Exception raised when a predicted tail constant is an infinite sum"""
    error_code = "DIVERGENT_SERIES"

    def __init__(self, moment: float, alpha: float):
        self.moment = moment
        super().__init__(
            detail=f"E|Y|^{alpha:g} = {moment:.6g} >= 1: the tail constant series diverges"
        )


# ========== RUN EXCEPTIONS ==========

class StageException(RVSeriesException):
    """Exception raised by the experiment pipeline, labelled with the failing stage"""
    error_code = "STAGE_FAILURE"

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        exit_code = getattr(cause, "exit_code", 2)
        super().__init__(detail=f"Stage '{stage}' failed: {cause}", exit_code=exit_code)
