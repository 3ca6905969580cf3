"""Exception hierarchy shared across the package."""


class QDecompError(Exception):
    """Base class for all errors raised by qdecomp."""


class InvalidTree(QDecompError, ValueError):
    pass


class EmptyQuestion(QDecompError, ValueError):
    pass


class InvalidTemplate(QDecompError, ValueError):
    pass


class MissingVar(InvalidTemplate):
    pass


class MultipleVar(InvalidTemplate):
    pass


class NonNumeric(QDecompError, ValueError):
    pass


class NonSingleton(QDecompError, ValueError):
    pass


class BackendError(QDecompError):
    """A QA backend failed to produce an answer.

    ``question`` is filled in by the interpreter when the error surfaces from
    a sub-question, so callers can tell which call failed.
    """

    def __init__(self, message: str, question: str | None = None):
        super().__init__(message)
        self.question = question

    def __str__(self) -> str:
        base = super().__str__()
        if self.question is not None:
            return f"{base} (question: {self.question!r})"
        return base


class TransportError(BackendError):
    pass


class QuotaError(BackendError):
    pass


class ParseError(QDecompError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyText(QDecompError, ValueError):
    pass


class IndexOutOfRange(QDecompError, IndexError):
    pass


class InvalidProgram(QDecompError, ValueError):
    pass


class BothEmpty(QDecompError, ValueError):
    pass


class InvalidSplit(QDecompError, ValueError):
    pass


class ShapeMismatch(QDecompError, ValueError):
    pass


class InvalidLabel(QDecompError, ValueError):
    pass


class Divergence(QDecompError, FloatingPointError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class UnboundOrderVariable(QDecompError, ValueError):
    pass


class MissingTemplate(QDecompError, KeyError):
    pass


class ConfigError(QDecompError, ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key
