"""Exception hierarchy shared by all jfsce modules."""


class JfsceError(Exception):
    """Base class for library errors."""


class BoundaryRangeError(JfsceError, ValueError):
    """A frame boundary offset lies outside ``[0, M-1]``."""


class DimensionError(JfsceError, ValueError):
    """An array has the wrong length or shape for the frame geometry."""


class ParameterError(JfsceError, ValueError):
    """A solver or design parameter is invalid."""


class InsufficientSamplesError(JfsceError, ValueError):
    """Not enough received samples to run the requested search."""


class WindowError(JfsceError, ValueError):
    """Not enough context samples to evaluate an equalizer."""


class IllConditionedError(JfsceError, ArithmeticError):
    """A least-squares system is rank deficient."""

    def __init__(self, message, cond=float("inf")):
        super().__init__(message)
        self.cond = cond


class StagnationError(JfsceError, ArithmeticError):
    """A greedy solver stopped making progress."""


class NoBoundaryError(JfsceError, ValueError):
    """A boundary cannot be read off an all-zero channel estimate."""


class ConfigError(JfsceError, ValueError):
    """Experiment configuration is malformed."""
