"""Exception types raised by the library."""

from __future__ import annotations


class InvalidEnvironment(ValueError):
    """An environment document or array set violates an invariant."""


class NonAffineCosts(ValueError):
    """An operation that needs affine costs received a non-affine environment."""


class InfeasibleTarget(ValueError):
    """A requested payoff pair cannot be produced by the construction.

    Attributes:
        distance: Euclidean distance from the target to the feasible region,
            when it is meaningful (0.0 when the failure has another cause).
    """

    def __init__(self, message: str, distance: float = 0.0) -> None:
        super().__init__(message)
        self.distance = float(distance)


class DocumentError(ValueError):
    """A structure, profile or tremble document is malformed or inconsistent."""
