"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`TwinGapError`; the CLI maps these to exit code 1.
"""


class TwinGapError(Exception):
    """Base class for package errors."""


class ConfigurationError(TwinGapError, ValueError):
    """Invalid configuration: unknown window, probability out of range, bad option."""


class DataError(TwinGapError, ValueError):
    """Input data violates the record model."""


class SchemaError(DataError):
    """Input file header does not match the canonical schema."""


class EstimationError(TwinGapError, ValueError):
    """A regression cannot be computed on the supplied sample."""


class RankDeficiencyError(EstimationError):
    """Design matrix is not of full column rank."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class MissingFitError(EstimationError, KeyError):
    """A fit required by the decomposition is absent."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""
