"""Exception types shared across the toolkit.

Every error raised on a user-facing path derives from ApeQeError so the
CLI can map failures to a single-line diagnostic and a non-zero exit.
"""


class ApeQeError(Exception):
    """Base class for all toolkit errors."""


class ParallelismError(ApeQeError):
    """Parallel corpus files disagree on line counts."""


class CorpusValidationError(ApeQeError):
    """A corpus line or token violates the input contract."""


class FactorParseError(ApeQeError):
    """A factored line is malformed (ragged arity, empty field, ...)."""


class AlignmentError(ApeQeError):
    """Per-word layers do not line up (factor projection, annotations)."""


class MalformedPrefixError(ApeQeError):
    """Subword factor prefixes violate the B-/I- grouping pattern."""


class ShapeError(ApeQeError):
    """A tensor or attention matrix has unexpected dimensions."""


class ConfigurationError(ApeQeError):
    """A stage was invoked with missing or inconsistent configuration."""


class NumericError(ApeQeError):
    """Non-finite values encountered during a numeric computation."""


class IncompatibleEnsembleError(ApeQeError):
    """Ensemble members do not share an output vocabulary."""
