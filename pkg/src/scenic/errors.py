"""Exception hierarchy shared by every scenic module."""


class ScenicError(Exception):
    """Base class for all errors raised by scenic."""


class ConfigError(ScenicError, ValueError):
    """Unknown game id, bad embedding spec, invalid experiment config."""


class SnapshotError(ScenicError):
    """A snapshot blob is truncated, corrupted or belongs to another game."""


class TraceParseError(ScenicError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(ScenicError, ValueError):
    """Invalid action model or bottleneck model file."""


class TrainingError(ScenicError):
    """The bottleneck network could not be trained."""


class DivergenceError(TrainingError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")


class DimensionError(ScenicError, ValueError):
    pass


class EmptyAccumulatorError(ScenicError, ValueError):
    pass


class ArchiveError(ScenicError):
    def __init__(self, message: str, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class CsvParseError(ScenicError, ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UsageError(ScenicError, ValueError):
    """Caller passed inconsistent arguments (e.g. label count mismatch)."""
