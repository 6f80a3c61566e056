"""Exception types raised across the package.

Everything derives from :class:`GroupForgeError` so callers (the CLI in
particular) can map failures onto exit codes without string matching.
"""


class GroupForgeError(Exception):
    """Base class for all package errors."""


class InputError(GroupForgeError, ValueError):
    """Bad input data or configuration (CLI exit code 1)."""


class MissingFile(InputError, FileNotFoundError):
    pass


class MalformedRow(InputError):
    def __init__(self, row, message="malformed row"):
        self.row = row
        super().__init__(f"row {row}: {message}")


class MarkOutOfRange(InputError):
    def __init__(self, student, course, value):
        self.student, self.course, self.value = student, course, value
        super().__init__(
            f"mark {value!r} for student {student!r}, course {course!r} "
            "is outside [0, 100]")


class DuplicateId(InputError):
    def __init__(self, ident):
        self.ident = ident
        super().__init__(f"duplicate id {ident!r}")


class NonBinaryValue(InputError):
    def __init__(self, row, column, value):
        self.row, self.column, self.value = row, column, value
        super().__init__(
            f"row {row}, column {column!r}: value {value!r} is not 0 or 1")


class IdMismatch(InputError):
    def __init__(self, ident, message="student id does not match marks file"):
        self.ident = ident
        super().__init__(f"{message}: {ident!r}")


class UnknownAttribute(InputError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown attribute {name!r}")

    def __str__(self):
        return self.args[0]


class ProfileLengthMismatch(InputError):
    pass


class EmptySpec(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class ConfigError(InputError):
    pass


class NotSymmetric(InputError):
    pass


class NoConvergence(GroupForgeError, ArithmeticError):
    pass


class MTooLarge(InputError):
    def __init__(self, M, n):
        self.M, self.n = M, n
        super().__init__(
            f"embedding dimension M={M} must satisfy 1 <= M <= n-1 = {n - 1}")


class WrongDimension(InputError):
    pass


class EmptyGroup(InputError):
    pass


class TooLarge(InputError):
    pass


class InfeasibleProblem(GroupForgeError):
    """No partition satisfies the constraints (CLI exit code 2)."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class TimeoutBudgetExceeded(GroupForgeError):
    """The time budget ran out before any feasible partition was found."""


class ConstraintViolation(GroupForgeError, AssertionError):
    """A solution failed independent re-validation."""
