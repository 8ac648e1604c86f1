"""Exception types shared across the package."""


class SrgLabError(Exception):
    pass


class DimensionMismatchError(SrgLabError, ValueError):
    """Signals or operators with incompatible dt, channel count or length."""


class DomainError(SrgLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class EvaluationError(SrgLabError, ArithmeticError):
    """Operator evaluation produced a non-finite sample."""


class EmptyCloudError(SrgLabError, ValueError):
    """No trajectory pair survived admission, or a cloud argument is empty."""


class IndeterminateDistanceError(SrgLabError, ValueError):
    """A region distance cannot be computed (unbounded pair, point at infinity)."""


class WellPosednessError(SrgLabError, RuntimeError):
    """Per-step fixed-point iteration hit its cap without converging."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DivergenceError(SrgLabError, ArithmeticError):
    """A loop trace overflowed."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(SrgLabError, ValueError):
    """Invalid configuration (unknown keys, bad values, malformed files)."""
