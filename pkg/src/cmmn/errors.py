"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (bad inputs or
configuration, CLI exit code 1) and :class:`DataIOError` (missing or
malformed files, CLI exit code 2).
"""


class CMMNError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CMMNError, ValueError):
    pass


class DataIOError(CMMNError, OSError):
    pass


# spectral
class SignalTooShort(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class MismatchedGrids(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class ZeroSpectrum(ValidationError):
    pass


# transport
class NotNormalized(ValidationError):
    pass


# filterbank
class DivisionByZero(ValidationError, ZeroDivisionError):
    pass


class NonFinite(ValidationError):
    pass


class SampleRateMismatch(ValidationError):
    pass


# gaussian oracle
class NonPositiveSpectrum(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidLength(ValidationError):
    pass


class FrequencyOutOfRange(ValidationError):
    pass


# pipeline
class GridMismatch(MismatchedGrids):
    pass


class FileMissing(DataIOError, FileNotFoundError):
    pass


class SizeMismatch(DataIOError):
    pass


class ParseError(DataIOError):
    pass
