"""Exception hierarchy shared across the package.

Every error raised deliberately by mixorder derives from MixOrderError, so
callers (and the CLI exit-code mapping) can distinguish our failures from
genuine bugs.
"""


class MixOrderError(Exception):
    """Base class for all mixorder errors."""


class DimensionError(MixOrderError):
    """Array shapes or dimensions do not agree."""


class InvariantError(MixOrderError):
    """A domain-type invariant is violated (weights, symmetry, finiteness)."""


class PositiveDefiniteError(MixOrderError):
    """A covariance matrix is not symmetric positive definite."""


class EmptyDataError(MixOrderError):
    """An operation received an empty dataset."""


class InsufficientDataError(MixOrderError):
    """Not enough rows to carry out the requested fit, split, or test."""


class DegenerateFitError(MixOrderError):
    """Every EM restart collapsed (weight underflow or singular covariance)."""


class InvalidStatisticError(MixOrderError):
    """A test statistic is NaN or otherwise unusable."""


class EmptyAggregateError(MixOrderError):
    """Aggregation was requested over an empty collection of e-values."""


class InsufficientComponentsError(MixOrderError):
    """Pairwise overlap is undefined for mixtures with fewer than 2 components."""


class OverlapUnreachableError(MixOrderError):
    """Covariance scaling could not reach the requested overlap level."""

    def __init__(self, message, achieved_low=None, achieved_high=None):
        super().__init__(message)
        self.achieved_low = achieved_low
        self.achieved_high = achieved_high


class ScenarioError(MixOrderError):
    """Too many replicate failures inside one simulation scenario."""


class ParseError(MixOrderError):
    """Malformed input file; carries line/column context when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column
