"""Exception types shared across the package."""


class NotPositiveSemidefiniteError(ValueError):
    """Matrix has a significantly negative eigenvalue where PSD is required."""


class DegenerateInputError(ValueError):
    """Input carries no usable signal (zero co-polar power, all-zero spectrum, ...)."""


class SnapshotFormatError(ValueError):
    """Snapshot container is malformed; message carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(ValueError):
    """Configuration file / parameter problem, with line diagnostics where known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CurveEvaluationError(RuntimeError):
    """A curve returned a non-finite value during crossing search."""

    def __init__(self, message: str, rho: float | None = None):
        if rho is not None:
            message = f"{message} at rho={rho!r}"
        super().__init__(message)
        self.rho = rho
