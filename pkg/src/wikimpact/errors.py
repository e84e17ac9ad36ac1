"""Exception types shared across the package."""


class WikimpactError(Exception):
    """Base class for all errors raised by this package."""


class MalformedHeader(WikimpactError):
    """Input does not start with a valid bzip2 stream header."""


class CorruptBlock(WikimpactError):
    """A compressed block failed to decode even after boundary merging."""

    def __init__(self, ordinal: int, message: str = ""):
        self.ordinal = ordinal
        super().__init__(message or f"block {ordinal} failed to decode (CRC or bitstream error)")


class UnterminatedPage(WikimpactError):
    """EOF reached while inside a page record."""


class UnsplittableRecord(WikimpactError):
    """A single page record exceeds the supported size limit."""


class EmptyDirectory(WikimpactError):
    """Directory given to the file merger contains no readable files."""


class MalformedPageXml(WikimpactError):
    """A page record could not be parsed as XML."""


class FilterEvaluationError(WikimpactError):
    """A pre-filter expression could not be evaluated against a record."""


class DivisionByZero(WikimpactError, ZeroDivisionError):
    """Score division hit a zero divisor; carries the offending subject when known."""

    def __init__(self, subject_id=None, message: str = ""):
        self.subject_id = subject_id
        if not message:
            message = "division by zero" if subject_id is None else f"division by zero for subject {subject_id}"
        super().__init__(message)


class EmptyCollection(WikimpactError):
    """min/max aggregation over an empty score collection."""


class InvalidSample(WikimpactError):
    """Benchmark sample with nonpositive sizes or times."""
