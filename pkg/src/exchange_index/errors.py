"""Exception hierarchy.  Every error raised on purpose derives from ``ExchangeError``."""


class ExchangeError(Exception):
    pass


class ValidationError(ExchangeError, ValueError):
    """Economy, allocation or price violates its invariants."""


class DomainError(ExchangeError, ValueError):
    """A function was evaluated off the open positive orthant (or at zero income)."""


class NoConvergence(ExchangeError):
    """Damped Newton stalled within its iteration budget."""


class LeftDomain(ExchangeError):
    """A price iterate could not be kept inside the positive orthant."""


class NotRegular(ExchangeError):
    """The equilibrium Jacobian is numerically singular."""


class Infeasible(ExchangeError):
    """The Pareto problem could not be solved for the requested utility levels."""


class NearSingular(ExchangeError):
    """The intersection determinant is too small to be signed reliably."""

    def __init__(self, msg, value=None, threshold=None):
        super().__init__(msg)
        self.value = value
        self.threshold = threshold


class BranchLost(ExchangeError):
    """Continuation left the neighbourhood of the selected equilibrium branch."""


class InvalidTransfer(ExchangeError, ValueError):
    pass


class StepTooLarge(ExchangeError):
    """Integration step leaves the orthant even after repeated halving."""
