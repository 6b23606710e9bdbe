"""Exception types shared across the package."""


class PredbenchError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgument(PredbenchError, ValueError):
    pass


class NotFound(PredbenchError, KeyError):
    pass


class DivergedTraining(PredbenchError):
    """Training produced a non-finite loss; carries the offending epoch."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class DuplicateExhaustion(PredbenchError):
    pass


class BuildQualityError(PredbenchError):
    """The generated benchmark failed a generation-time quality check."""


class InsufficientData(PredbenchError):
    pass


class NumericalFailure(PredbenchError):
    pass


class ProtocolFailure(PredbenchError):
    pass


class ConfigError(PredbenchError):
    """Bad configuration; names the offending key (and line when known)."""

    def __init__(self, message: str, key: str = "", line: int | None = None):
        self.key = key
        self.line = line
        detail = message
        if key:
            detail = f"{message} (key: {key})"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
