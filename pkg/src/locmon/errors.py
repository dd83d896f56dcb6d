"""Exception hierarchy shared by every module.

``InputError`` subclasses map to CLI exit code 2, ``NumericalError``
subclasses to exit code 3.
"""


class LocmonError(Exception):
    """Base class for all toolkit errors."""


class InputError(LocmonError, ValueError):
    """Bad input data or bad parameters."""


class NumericalError(LocmonError, ArithmeticError):
    """A computation could not be carried out on otherwise valid input."""


class SchemaError(InputError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class RecordError(InputError):
    """A data row failed to parse or validate."""

    def __init__(self, row, column, message):
        super().__init__(f"row {row}, column {column}: {message}")
        self.row = row
        self.column = column
        self.reason = message


class ParameterError(InputError):
    pass


class ShapeError(InputError):
    pass


class DomainError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class RankDeficientError(NumericalError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class DegenerateFitError(NumericalError):
    pass


class UnsupportedModelError(InputError, TypeError):
    pass


class OutOfOrderError(InputError):
    def __init__(self, previous, current):
        super().__init__(f"event at {current} arrived after event at {previous}")
        self.previous = previous
        self.current = current


class DeliveryError(LocmonError):
    def __init__(self, message, attempts, last_status):
        super().__init__(message)
        self.attempts = attempts
        self.last_status = last_status


class PipelineError(LocmonError):
    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats
