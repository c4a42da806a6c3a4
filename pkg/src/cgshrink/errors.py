"""Exception hierarchy.

``ConfigError`` covers bad inputs and configuration (CLI exit code 2);
``NumericalError`` covers failures inside the numerics (exit code 3).
"""


class ConfigError(ValueError):
    pass


class DimensionError(ConfigError):
    pass


class FormatError(ConfigError):
    pass


class NumericalError(ArithmeticError):
    pass


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, message, pivot=None, iteration=None):
        super().__init__(message)
        self.pivot = pivot
        self.iteration = iteration


class SingularMatrixError(NumericalError):
    pass


class ConsistencyError(NumericalError):
    """Two independent computations of the same quantity disagree."""
