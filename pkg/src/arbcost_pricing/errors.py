"""
Error vocabulary for the pricing and simulation modules.

Degenerate inputs are reported by raising one of these, never by clamping.
"""


class PricingError(ValueError):
    """Base class for every numerical-module error."""

    exit_code = 4


class InvalidParameter(PricingError):
    """A value type was constructed outside its invariants."""


class StepTooCoarse(PricingError):
    """The time step pushes a branch probability or factor out of range."""


class DegenerateVolatility(PricingError):
    """Two volatilities coincide, so an implied rate explodes."""


class HeterogeneityRequired(PricingError):
    """Two costed views carry identical cost parameters."""


class NoRealRoot(PricingError):
    """An allocation quadratic has a negative discriminant."""


class NonPositiveDrift(PricingError):
    """A drift that must be strictly positive is not."""


class SingularReplication(PricingError):
    """The two-asset replication system at a lattice node is singular."""


class QOutOfRange(PricingError):
    """The one-step state price left (0, 1)."""


class DeltaCostSaturated(PricingError):
    """The delta cost reached 1 and the discount rate diverges."""


class NegativeVarianceAugmentation(PricingError):
    """1 + lambda * gamma cost is negative."""


class GridTooCoarse(PricingError):
    """The finite-difference grid is too small or too narrow."""


class NonFinitePath(PricingError):
    """A coefficient evaluated to NaN or infinity along a simulated path."""


class UsageError(Exception):
    """Bad command line."""

    exit_code = 2


class ValidationError(Exception):
    """A scenario or flag value failed validation before dispatch."""

    exit_code = 3


class StorageError(Exception):
    """Results could not be written to the output directory."""

    exit_code = 5


__all__ = [
    "PricingError",
    "InvalidParameter",
    "StepTooCoarse",
    "DegenerateVolatility",
    "HeterogeneityRequired",
    "NoRealRoot",
    "NonPositiveDrift",
    "SingularReplication",
    "QOutOfRange",
    "DeltaCostSaturated",
    "NegativeVarianceAugmentation",
    "GridTooCoarse",
    "NonFinitePath",
    "UsageError",
    "ValidationError",
    "StorageError",
]
