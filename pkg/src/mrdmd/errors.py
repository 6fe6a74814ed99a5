"""Exception types raised across the package."""


class MrdmdError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MrdmdError, ValueError):
    """Input data is malformed (non-finite entries, wrong dimensionality)."""


class ParameterError(MrdmdError, ValueError):
    """A parameter is outside its documented range."""


class WindowTooSmallError(MrdmdError, ValueError):
    """A snapshot window holds too few snapshots for the requested operation."""


class NumericalError(MrdmdError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class RankDeficiencyError(NumericalError):
    """A retained singular value is zero, so the reduced operator is undefined."""


class NodeLookupError(MrdmdError, LookupError):
    """A (level, bin, index) triple does not address an existing mode."""


class FormatError(MrdmdError, ValueError):
    """Base class for file-format errors."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class CsvParseError(FormatError):
    pass
