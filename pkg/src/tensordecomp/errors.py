"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` used by the command line front end.
"""


class TensorDecompError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DimensionError(TensorDecompError, ValueError):
    """Shapes, modes or indices do not conform."""

    exit_code = 2


class ConfigurationError(TensorDecompError, ValueError):
    """Invalid algorithm parameters (rank out of range, bad tolerance, ...)."""

    exit_code = 2


class DataError(TensorDecompError, ValueError):
    """Input data is malformed, non-finite, or violates a model precondition."""

    exit_code = 3


class ParseError(DataError):
    """A tensor or sample file could not be parsed.

    Parameters
    ----------
    message : str
        Human readable description.
    line : int, optional
        1-based line number in the offending file.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RankDeficiencyError(TensorDecompError, ValueError):
    """A matrix has fewer significant singular values than required."""

    exit_code = 2


class IllConditionedError(TensorDecompError, ArithmeticError):
    """The instance is too close to degenerate for a stable answer."""

    exit_code = 4


class ConvergenceError(TensorDecompError, ArithmeticError):
    """An iterative method failed to converge.

    ``partial`` holds whatever results were obtained before failure.
    """

    exit_code = 4

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class StageError(TensorDecompError):
    """Wraps an error raised inside one stage of the mixture pipeline."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        self.partial = getattr(cause, "partial", [])
        super().__init__(f"[{stage}] {cause}")
