"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """A caller-supplied argument violates a documented precondition."""


class ConfigError(Exception):
    """A config file is missing, malformed, or inconsistent."""


class DivergenceError(RuntimeError):
    """The zero-order iteration blew up.

    Carries the partial trace accumulated before the abort so callers can
    inspect (and serialize) what happened.
    """

    def __init__(self, message, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class DegeneratePairError(RuntimeError):
    """A sampled pair produced a numerically degenerate displacement."""


class AssumptionViolatedError(RuntimeError):
    """The positivity assumption behind the step-size bound does not hold."""
