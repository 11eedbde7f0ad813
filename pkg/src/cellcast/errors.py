"""Exception hierarchy shared by every stage of the pipeline."""


class CellcastError(Exception):
    """Base class for errors caused by bad input rather than by a bug."""


class ParseError(CellcastError):
    """A file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ValidationError(ParseError):
    """Input parsed fine but violates a data contract."""


class ImputationError(CellcastError):
    """A missing point has no same hour-of-week value to borrow from."""

    def __init__(self, message, timestamp=None):
        self.timestamp = timestamp
        super().__init__(message)


class DegenerateRowError(CellcastError):
    """A row whose mean is zero, so it cannot be scaled."""


class ModelFormatError(CellcastError):
    """A model file is truncated, has the wrong version or bad dimensions."""


class TrainingError(CellcastError):
    """Training cannot start or has diverged."""
