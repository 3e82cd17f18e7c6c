"""Exception types shared across the package."""


class DriftcompError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(DriftcompError, ValueError):
    """A constructor or operation argument violates its documented bounds."""


class DimensionMismatchError(DriftcompError, ValueError):
    """A vector's dimension does not match the structure it is used with."""


class OutOfRangeError(DriftcompError, ValueError):
    """A value lies outside its required range (e.g. base prediction not in [0, 1])."""


class EmptyNeighborhoodError(DriftcompError, LookupError):
    """Every hash array missed: no sample mass near the query.

    Callers performing prediction must fall back to zero compensation.
    """


class EmptyMemoryError(DriftcompError, LookupError):
    """Retrieval was attempted on a memory holding no records."""


class SnapshotFormatError(DriftcompError, ValueError):
    """A snapshot byte stream is malformed or does not match the given bank."""


class SchemaError(DriftcompError, ValueError):
    """A row or file does not conform to the declared feature schema."""


class DegenerateLabelsError(DriftcompError, ValueError):
    """A ranking metric was asked to score labels containing only one class."""


class TrainingDivergedError(DriftcompError, ArithmeticError):
    """Training produced a non-finite loss; carries step diagnostics."""

    def __init__(self, message, step=None, loss=None):
        super().__init__(message)
        self.step = step
        self.loss = loss


class ConfigError(DriftcompError, ValueError):
    """An experiment configuration file or override is invalid."""
