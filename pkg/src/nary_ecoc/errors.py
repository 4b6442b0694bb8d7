"""Exception hierarchy shared by all modules."""


class EcocError(Exception):
    """Base class for every error raised by this package."""


class InvalidParametersError(EcocError, ValueError):
    pass


class GenerationFailureError(EcocError):
    """A valid coding matrix could not be sampled within the retry budget."""


class InvariantViolationError(EcocError, ValueError):
    pass


class MatrixFormatError(EcocError, ValueError):
    pass


class DataFormatError(EcocError, ValueError):
    """Raised by the dataset loaders; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateTaskError(EcocError, ValueError):
    """The learner was given fewer than two distinct groups."""


class UntrainableMatrixError(EcocError):
    """Every column of the coding matrix is degenerate on the training data."""


class UndefinedBoundError(EcocError):
    """The minimum row distance is zero, so the error bound is undefined."""


class DimensionMismatchError(EcocError, ValueError):
    pass
