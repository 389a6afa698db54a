"""Exception hierarchy.

Errors split into two families so the command line can map them onto
distinct exit codes: :class:`DataError` (bad or insufficient input data)
and :class:`ConfigError` (bad parameters).
"""


class DLROCError(Exception):
    """Base class for every error raised by this package."""


class DataError(DLROCError, ValueError):
    pass


class ConfigError(DLROCError, ValueError):
    pass


class NonFiniteInputError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class TooFewColumnsError(DataError):
    pass


class ZeroColumnError(DataError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"column {index} has zero norm")


class ZeroAtomError(DataError):
    pass


class ZeroCodeError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class InsufficientGroupsError(DataError):
    pass


class EmptySplitError(DataError):
    pass


class IndexOutOfRangeError(DataError, IndexError):
    pass


class LengthMismatchError(DataError):
    pass


class LabelOutOfRangeError(DataError):
    pass


class EmptyMeasurementError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing columns: " + ", ".join(self.missing))


class ModelFormatError(DataError):
    pass


class BadExponentError(ConfigError):
    pass


class AlphaOutOfRangeError(ConfigError):
    pass


class BadSpecError(ConfigError):
    pass


class NonFiniteObjectiveError(DLROCError, ArithmeticError):
    pass
