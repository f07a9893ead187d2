"""Semi-device-independent randomness certification under energy assumptions.

Modules
-------
sdpcore   small dense/sparse interior-point SDP solver
qset      the energy-restricted quantum set of behaviours
entropy   worst-case conditional entropy bounds and the LP upper-bound oracle
certify   trade-off functions and finite-statistics accounting
sim       simulated devices and protocol runs
extract   Toeplitz hashing
bellmap   correspondence with CHSH correlators
cli       command-line front-end
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DeviceInvariantError,
    DiscretizationError,
    DomainError,
    EnergyQrngError,
    IllPosedProblemError,
    InfeasibleBehaviourError,
    InternalConsistencyError,
    LengthMismatchError,
    NotPsdError,
    SolverError,
)
from .qset import Behaviour, EnergyBounds  # noqa: F401
from .entropy import EntropyProblem, InputDistribution, LinearTarget  # noqa: F401
