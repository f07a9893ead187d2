"""Exception hierarchy shared by all modules."""


class EnergyQrngError(Exception):
    """Base class for every error raised by the package."""


class DomainError(EnergyQrngError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class IllPosedProblemError(EnergyQrngError, ValueError):
    """An optimization problem is malformed (non-symmetric data, bad shapes...)."""


class SolverError(EnergyQrngError):
    """The conic solver stopped without a usable answer.

    ``status`` carries the solver status string so callers can tell numerical
    breakdown apart from a certified infeasibility.
    """

    def __init__(self, message, status=None, solution=None):
        super().__init__(message)
        self.status = status
        self.solution = solution


class InfeasibleBehaviourError(EnergyQrngError):
    """The requested behaviour is not in the constrained quantum set."""


class NotPsdError(EnergyQrngError, ValueError):
    """A matrix that must be positive semidefinite has a negative eigenvalue."""


class InternalConsistencyError(EnergyQrngError, AssertionError):
    """Two routes that must agree produced contradicting answers."""


class DiscretizationError(EnergyQrngError):
    """The target lies outside the hull of the discretized extremal points."""


class DeviceInvariantError(EnergyQrngError):
    """A simulated device produced a round behaviour outside the allowed set."""


class LengthMismatchError(EnergyQrngError, ValueError):
    """Bit strings handed to the extractor do not match its parameters."""


class ConfigError(EnergyQrngError, ValueError):
    """A run configuration failed validation."""
