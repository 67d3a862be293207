"""Exception types shared across the package."""


class GHKError(Exception):
    pass


class DomainError(GHKError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ShapeError(GHKError, ValueError):
    """Functions that should share a grid do not."""


class ParameterError(GHKError, ValueError):
    """Invalid model parameters (e.g. a matrix that is not positive-definite)."""


class BudgetError(GHKError, RuntimeError):
    """Estimated cost exceeds the configured evaluation budget."""


class SamplingError(GHKError, ValueError):
    """Samples do not cover the stencils an algorithm needs."""


class RankError(GHKError, ValueError):
    """A linear fit is rank deficient."""

    def __init__(self, msg, level=None):
        super().__init__(msg if level is None else f"level {level}: {msg}")
        self.level = level


class SampleLookupError(GHKError, KeyError):
    """A requested sample point is not available."""


class ConfigError(GHKError, ValueError):
    """Invalid experiment configuration; message names the offending field."""
