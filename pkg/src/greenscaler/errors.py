"""Exception hierarchy shared by every greenscaler module."""


class GreenScalerError(Exception):
    """Base class for all package errors."""


class ConfigError(GreenScalerError, ValueError):
    """Raised for bad configuration documents. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class MissingKey(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class DomainError(GreenScalerError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OutOfRange(GreenScalerError, ValueError):
    pass


class EmptyInput(GreenScalerError, ValueError):
    pass


class NonMonotonicTime(GreenScalerError, ValueError):
    pass


class InsufficientData(GreenScalerError, ValueError):
    pass


class DegenerateDesign(GreenScalerError, ValueError):
    """Regression design matrix is rank deficient; ``column`` names the culprit."""

    def __init__(self, column: str, message: str = ""):
        self.column = column
        super().__init__(message or f"design matrix is degenerate in column {column!r}")


class EmptyHistory(GreenScalerError, ValueError):
    pass


class InsufficientHistory(GreenScalerError, ValueError):
    pass


class LengthMismatch(GreenScalerError, ValueError):
    pass


class OutOfBounds(GreenScalerError, ValueError):
    pass


class EmptyForecast(GreenScalerError, ValueError):
    pass


class PlanningError(GreenScalerError, ValueError):
    """No candidate sequence survives the search restrictions."""


class InvalidScenario(GreenScalerError, ValueError):
    pass


class MissingSurrogate(GreenScalerError, ValueError):
    pass


class MismatchedScenario(GreenScalerError, ValueError):
    pass
