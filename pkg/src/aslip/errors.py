"""Exception types raised across the package."""


class AslipError(Exception):
    """Base class for all package errors."""


class InvalidParameters(AslipError, ValueError):
    pass


class SingularState(AslipError, ValueError):
    """Leg length too close to zero for the stance equations."""


class InconsistentTouchdown(AslipError, ValueError):
    pass


class InvalidGrid(AslipError, ValueError):
    pass


class NoEvent(AslipError):
    """The guard does not change sign over the searched interval."""


class InconsistentRetraction(AslipError, ValueError):
    pass


class InfeasibleSolution(AslipError):
    pass


class IntegrationError(AslipError, RuntimeError):
    """The ODE integrator failed; never folded into a simulation status."""


class InvalidPlan(AslipError, ValueError):
    pass


class Fell(AslipError):
    """Degenerate geometry: the body is at or below the ground."""
