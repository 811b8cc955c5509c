"""Exception hierarchy. Every error carries the process exit code the CLI should use."""
import typing

__all__ = (
    "NcqarError",
    "ConfigurationError",
    "ParameterDomainError",
    "DataError",
    "InsufficientDataError",
    "NumericalError",
    "StationarityError",
    "DegeneracyError",
    "ConvergenceError",
    "UndefinedMomentError",
    "ReplicateFailureError",
)


class NcqarError(Exception):
    """Base class for everything this package raises on purpose."""

    exit_code: int = 1
    hint: typing.Optional[str] = None

    def __init__(self, message: str, *, hint: typing.Optional[str] = None):
        super().__init__(message)
        if hint is not None:
            self.hint = hint


class ConfigurationError(NcqarError, ValueError):
    exit_code = 2


class ParameterDomainError(ConfigurationError):
    """A parameter lies outside its mathematical domain (sigma <= 0, tau not in (0,1), ...)."""


class DataError(NcqarError, ValueError):
    exit_code = 3

    def __init__(self, message: str, *, row: typing.Optional[int] = None, hint: typing.Optional[str] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message, hint=hint)
        self.row = row


class InsufficientDataError(DataError):
    def __init__(self, message: str, *, n_effective: int, hint: typing.Optional[str] = None):
        super().__init__(f"{message} (n_effective={n_effective})", hint=hint)
        self.n_effective = n_effective


class NumericalError(NcqarError):
    exit_code = 4


class StationarityError(NumericalError):
    def __init__(self, message: str, *, polynomial: str, modulus: float):
        super().__init__(message, hint="All roots of the lag and lead polynomials must lie outside the unit circle.")
        self.polynomial = polynomial
        self.modulus = modulus


class DegeneracyError(NumericalError):
    hint = "The design is rank deficient. A constant or perfectly collinear series cannot be fitted."

    def __init__(self, message: str, *, columns: typing.Sequence[int]):
        super().__init__(f"{message} (dependent columns: {list(columns)})")
        self.columns = list(columns)


class ConvergenceError(NumericalError):
    def __init__(self, message: str, *, best: typing.Any = None):
        super().__init__(message, hint="Try a different starting point or a larger evaluation budget.")
        self.best = best


class UndefinedMomentError(NumericalError):
    hint = "The innovation law has no first moment; pass an empirical mean instead."


class ReplicateFailureError(NumericalError):
    def __init__(self, message: str, *, failed: int, n_reps: int):
        super().__init__(f"{message} ({failed}/{n_reps} replicates failed)")
        self.failed = failed
        self.n_reps = n_reps
