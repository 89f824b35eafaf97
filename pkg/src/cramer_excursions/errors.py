"""Exception hierarchy.

Every error carries a machine-readable ``code`` (the class name) and maps to a
CLI exit status through its base class.
"""

from __future__ import annotations


class CramerError(Exception):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class UsageError(CramerError):
    """Bad configuration, unsupported model kind or malformed input."""

    exit_code = 1


class InvalidModel(UsageError):
    pass


class UnsupportedKind(UsageError):
    pass


class UnsupportedModel(UsageError):
    pass


class NumericalError(CramerError):
    exit_code = 2


class NonNegativeMean(NumericalError):
    pass


class DomainBoundary(NumericalError):
    pass


class NotARoot(NumericalError):
    pass


class NoPositiveRoot(NumericalError):
    pass


class ToleranceNotReached(NumericalError):
    pass


class NonPositiveInput(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass


class DegenerateBinning(NumericalError):
    pass


class StatisticalGateError(CramerError):
    exit_code = 3


class ExcessiveCensoring(StatisticalGateError):
    pass


class InsufficientCounts(StatisticalGateError):
    pass


class InsufficientRate(StatisticalGateError):
    pass
