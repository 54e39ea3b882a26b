"""Exception hierarchy.

Everything raised on bad user input derives from :class:`ValidationError`, so
the CLI can map it to exit code 1 without a traceback.
"""


class MohpiError(Exception):
    pass


class ValidationError(MohpiError, ValueError):
    pass


# config spaces
class SchemaError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ConditionError(ValidationError):
    pass


class InactiveValueError(ValidationError):
    pass


class OutOfDomainError(ValidationError):
    pass


class OutOfRangeError(ValidationError):
    pass


# datasets
class MissingColumnError(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class NonFiniteObjectiveError(ValidationError):
    pass


class EmptyDatasetError(ValidationError):
    pass


# surrogates
class ShapeMismatchError(ValidationError):
    pass


class DegenerateTargetError(ValidationError):
    pass


# synthetic problems
class UnsupportedBasisError(ValidationError):
    pass


class EmptyGroupError(ValidationError):
    pass


class DegenerateObjectiveWarning(UserWarning):
    """A constant objective column was normalized to all zeros."""
