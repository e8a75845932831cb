"""Exception hierarchy.

Every error raised on bad input derives from :class:`DataError`; failures of
external encoder/decoder processes derive from :class:`ExternalToolError`.
The CLI maps these two families onto exit codes 2 and 3.
"""

from __future__ import annotations


class VcmError(Exception):
    """Base class for all errors raised by this package."""


class DataError(VcmError):
    """Input data is malformed, inconsistent, or out of range."""


class ParseError(DataError, ValueError):
    """A file could not be parsed; the message carries line/field context."""


class SchemaVersionError(DataError):
    """A file declares a schema identifier this package does not understand."""


class FormatError(DataError, ValueError):
    pass


class IntegrityError(DataError):
    pass


class RangeError(DataError, ValueError):
    pass


class DimensionError(DataError, ValueError):
    pass


class DegenerateDetectionError(DataError, ValueError):
    """A detection box has zero area, so its relative overlap is undefined."""


class CurveValidationError(DataError, ValueError):
    pass


class InsufficientDataError(CurveValidationError):
    pass


class NoOverlapError(DataError, ValueError):
    """Two rate-quality curves share no quality interval."""


class UndefinedReportError(DataError):
    """No class has a ground-truth instance, so weighted AP is undefined."""


class ExternalToolError(VcmError):
    def __init__(self, message: str, stderr: str = "") -> None:
        super().__init__(message)
        self.stderr = stderr


class ProtocolError(ExternalToolError):
    """An external tool exited cleanly but did not produce its expected output."""
