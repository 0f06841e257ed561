"""Exception hierarchy shared by every fkmatch module."""

from __future__ import annotations


class FkmatchError(Exception):
    """Base class for all library errors."""


class NumericalError(FkmatchError):
    """A numerical kernel could not produce a trustworthy value."""


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, best_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate


class BlowUpError(NumericalError):
    """An ODE solution left the finite range.

    ``t`` and ``y`` hold the last valid point; ``t_blowup`` is a rough
    estimate of where the solution escapes (may be ``None``).
    """

    def __init__(self, message: str, t: float, y: float, t_blowup: float | None = None):
        super().__init__(message)
        self.t = t
        self.y = y
        self.t_blowup = t_blowup


class NotInvertibleError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass


class ExpressionError(FkmatchError, ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class DomainError(FkmatchError, ValueError):
    """Input outside the declared domain (state space, time range, sign role)."""


class ParameterRegionError(DomainError):
    """Identity parameters outside the region where the identity is claimed."""


class SimulationError(FkmatchError):
    pass


class BudgetExceededError(SimulationError):
    pass
