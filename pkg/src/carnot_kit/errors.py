from __future__ import annotations


class CarnotKitError(Exception):
    """Base class for errors raised by this package."""


class UsageError(CarnotKitError, ValueError):
    """An operation was called outside its domain (wrong algebra, bad argument)."""


class StructureError(CarnotKitError, ValueError):
    """A structure tensor is malformed (index out of range, unknown label)."""


class ConstructorError(CarnotKitError, ValueError):
    """A catalog constructor was asked for an algebra it cannot build."""


class NotAnIdealError(ConstructorError):
    """The span passed to ``quotient`` is not a graded ideal.

    ``witness`` names the bracket or projection that escapes the span.
    """

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness
