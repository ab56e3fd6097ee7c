"""Exception types shared across the pipeline.

Every error raised on a data path derives from PipelineError so the CLI
can map any of them to a single nonzero exit code.
"""


class PipelineError(Exception):
    """Base class for all data and computation errors in this package."""


class FormatError(PipelineError):
    """File violates a binary container format (bad magic, zero dimension)."""


class TruncationError(PipelineError):
    """Payload size disagrees with the header of a binary container."""


class IoError(PipelineError):
    """Underlying OS-level read/write failure."""


class ParseError(PipelineError):
    """Malformed manifest or labels line; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RefError(PipelineError):
    """Embedding reference points outside the referenced matrix or at a missing file."""


class EmptyInputError(PipelineError):
    """Operation requires at least one element."""


class NumericError(PipelineError):
    """Non-finite value where finite math is required."""


class DegenerateError(PipelineError):
    """Probability mass vanished where a renormalization is required."""


class ShapeError(PipelineError):
    """Array dimensions disagree with the operation contract."""


class ParamError(PipelineError):
    """Parameter outside its documented range."""


class ProtocolError(PipelineError):
    """Evaluation protocol precondition violated (e.g. subject with one image)."""


class DegenerateLabelsError(PipelineError):
    """Training data contains fewer than two distinct labels."""
