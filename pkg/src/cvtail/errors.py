"""Exception and warning types raised by cvtail."""


class CvTailError(ValueError):
    """Base class for all cvtail errors."""


class InvalidParameterError(CvTailError):
    pass


class UnsupportedAlternativeError(CvTailError):
    pass


class InfiniteVarianceError(CvTailError):
    pass


class InsufficientTailError(CvTailError):
    """Too few exceedances for the requested threshold(s).

    ``max_feasible_m`` is set when the failure comes from a dyadic grid.
    """

    def __init__(self, message, max_feasible_m=None):
        super().__init__(message)
        self.max_feasible_m = max_feasible_m


class DegenerateSampleError(CvTailError):
    pass


class OutOfSupportError(CvTailError):
    pass


class NumericalFailureError(CvTailError, ArithmeticError):
    pass


class ConfigurationError(CvTailError):
    pass


class InputFormatError(CvTailError):
    """Malformed input; ``line`` is the 1-based line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class BoundarySolutionWarning(UserWarning):
    pass


class LargeSampleApproximationWarning(UserWarning):
    pass
