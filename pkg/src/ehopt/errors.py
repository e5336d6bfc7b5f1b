"""Exception types shared across the package."""


class EhoptError(Exception):
    """Base class for all package errors."""


class ScenarioInvalid(EhoptError):
    """A scenario violates one of its structural invariants."""


class ParseError(EhoptError):
    """A scenario or experiment document could not be parsed."""


class InfeasibleAction(EhoptError):
    """Transmit was requested with less battery than the packet costs."""


class NotConverged(EhoptError):
    """An iterative solver exhausted its sweep budget."""


class DivergentHorizon(EhoptError):
    """Truncation error is undefined for an undiscounted horizon."""


class TooLarge(EhoptError):
    """Exhaustive enumeration refused an instance above its guard size."""


class NoFeasibleSolution(EhoptError):
    """The offline root relaxation admits no feasible point."""


class SimplexNumericalError(EhoptError):
    """The simplex solution failed its post-solve residual check."""
