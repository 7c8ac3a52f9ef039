"""Exception types shared across the package.

Every error carries a stable ``code`` string so the CLI can emit
machine-readable error reports.
"""
from __future__ import annotations


class BwshareError(Exception):
    """Base class for all package errors."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class ConfigInvalid(BwshareError):
    code = "ConfigInvalid"


class RankDeficient(BwshareError):
    code = "RankDeficient"


class EmptyRoute(BwshareError):
    code = "EmptyRoute"


class NonPositiveParameter(BwshareError):
    code = "NonPositiveParameter"


class NotCriticallyLoaded(BwshareError):
    code = "NotCriticallyLoaded"


class RatePositivityViolated(BwshareError):
    code = "RatePositivityViolated"


class SolverDiverged(BwshareError):
    code = "SolverDiverged"


class StepTooLarge(BwshareError):
    code = "StepTooLarge"


class NotInCone(BwshareError):
    code = "NotInCone"


class SingularG(BwshareError):
    code = "SingularG"


class DimensionTooLarge(BwshareError):
    code = "DimensionTooLarge"


class TopologyMismatch(BwshareError):
    code = "TopologyMismatch"


class NotApplicable(BwshareError):
    code = "NotApplicable"


class HorizonTooShort(BwshareError):
    code = "HorizonTooShort"


class TooFewBatches(BwshareError):
    code = "TooFewBatches"


class StabilityViolated(BwshareError):
    code = "StabilityViolated"


class NotSubcritical(BwshareError):
    code = "NotSubcritical"


class LcpNotConverged(BwshareError):
    code = "LcpNotConverged"


class EliminationBlowup(BwshareError):
    code = "EliminationBlowup"


class Unbounded(BwshareError):
    code = "Unbounded"
