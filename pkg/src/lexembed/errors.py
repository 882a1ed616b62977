"""Exception hierarchy shared by all lexembed modules.

The CLI maps these onto exit codes: parameter/compatibility problems are
usage errors (2), non-finite numerics are numeric failures (3), and
parse/format problems are I/O errors (4).
"""

from __future__ import annotations


class LexembedError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(LexembedError, ValueError):
    """An argument or configuration value violates a precondition."""


class DimensionError(ParameterError):
    """Array shapes or sizes do not match what an operation requires."""


class InputError(ParameterError):
    """A data item (e.g. a too-short script) cannot be processed."""


class CompatibilityError(LexembedError, ValueError):
    """Checkpoint and corpus/model artifacts do not fit together."""


class ParseError(LexembedError, ValueError):
    """Malformed inline error annotation.

    ``offset`` is the character position in the raw text where parsing
    failed (best effort).
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class FormatError(LexembedError, ValueError):
    """Malformed external file (vector file, corpus file, checkpoint).

    ``line`` is the 1-based line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class NumericError(LexembedError, ArithmeticError):
    """A computation produced a non-finite value."""


class TrainingError(NumericError):
    """Training diverged; the message names the epoch and batch."""


class UndefinedMetricError(LexembedError, ValueError):
    """A metric is not defined on the given input (e.g. zero variance)."""


class MissingCorrectionWarning(UserWarning):
    """An error annotation had no correction where one was needed."""
