"""Exception types shared across the package.

Each error class maps onto one failure mode of the pipeline so the CLI can
translate them into distinct exit codes.
"""


class PolymeshError(Exception):
    """Base class for all package errors."""


class InputError(PolymeshError, ValueError):
    """Malformed or out-of-contract input (bad direction, point outside body, ...)."""


class UnboundedBodyError(PolymeshError):
    """A halfspace description admits an unbounded set; not a convex body."""


class FlatnessError(PolymeshError):
    """The body is degenerate (empty interior / lower-dimensional)."""


class NormalizationError(PolymeshError):
    """John-type normalization could not be verified within tolerance."""

    def __init__(self, msg, inner_radius=None, outer_radius=None):
        super().__init__(msg)
        self.inner_radius = inner_radius
        self.outer_radius = outer_radius


class MeshQualityError(PolymeshError):
    """Candidate pool is too sparse for the requested mesh resolution."""


class SeparationError(PolymeshError):
    """Points are too close for the requested polynomial degree."""

    def __init__(self, msg, min_degree=None):
        super().__init__(msg)
        self.min_degree = min_degree


class DegreeBudgetError(PolymeshError):
    """A polynomial construction exceeded its total-degree budget."""

    def __init__(self, msg, achieved_degree=None, budget=None):
        super().__init__(msg)
        self.achieved_degree = achieved_degree
        self.budget = budget


class RangeViolationError(PolymeshError):
    """A Chebyshev node received an argument outside [-1, 1] beyond tolerance,
    indicating a broken range certificate."""


class FingerprintMismatchError(PolymeshError):
    """A certification was requested for a mesh built on a different body."""
