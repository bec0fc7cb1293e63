"""Exception hierarchy shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class ParseError(ValidationError):
    """A data file could not be parsed.

    ``line`` is the 1-based line number of the offending row (the header
    is line 1), or ``None`` when the problem is not tied to a row.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientDataError(ValidationError):
    """Not enough rows/samples for the requested operation."""


class FetchError(RuntimeError):
    """Network failure while talking to a remote endpoint. Retriable."""

    retriable = True


class DecodeError(ValueError):
    """A remote payload did not match the expected schema."""


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""
