"""Exception hierarchy shared by all renormkit modules."""

from __future__ import annotations


class RenormkitError(Exception):
    """Base class for every error raised by the package."""


class SpecError(RenormkitError, ValueError):
    """Malformed graph-spec document."""


class DuplicateEdgeError(SpecError):
    pass


class SelfLoopError(SpecError):
    pass


class UnknownVertexError(SpecError):
    pass


class MissingDimensionError(SpecError):
    pass


class InvalidSubgraphError(RenormkitError, ValueError):
    pass


class ContractedEdgeError(RenormkitError, ArithmeticError):
    """An evaluated edge has zero length."""


class ExpansionPointSingularError(RenormkitError, ArithmeticError):
    """An edge contracts at a Taylor expansion point."""


class JetOrderCapError(RenormkitError):
    """Requested jet order exceeds the configured cap."""


class ForestLimitError(RenormkitError):
    """Too many renormalization parts to enumerate forests."""


class InvalidActiveFamilyError(RenormkitError, ValueError):
    pass


class PartitionViolationError(RenormkitError):
    """Saturation classes fail to partition the forest set."""

    def __init__(self, message: str, witnesses=()):
        super().__init__(message)
        self.witnesses = tuple(witnesses)


class ExceptionalConfigurationError(RenormkitError, ValueError):
    """Configuration lies on the large graph diagonal."""


class DeterminismError(RenormkitError, ValueError):
    """A stochastic routine was called without a seed."""
