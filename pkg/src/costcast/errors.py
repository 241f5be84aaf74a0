"""Exception types shared across the package."""


class CostcastError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CostcastError):
    """Raised when an input file cannot be parsed or is missing required fields."""


class ValidationError(CostcastError):
    """Raised when parsed data violates a documented constraint.

    The message names the offending field so callers can report it directly.
    """


class InfeasibleError(CostcastError):
    """Raised when an optimization problem has no feasible point.

    ``detail`` carries whatever the caller knows about the cause, e.g. the
    hour at which a dispatch problem binds.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class DivergenceError(CostcastError):
    """Raised when an iterative training run is detected to be diverging.

    ``trace`` holds the recent objective history so the caller can inspect
    what happened.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
