"""Dictionary between energy-limited prepare-and-measure behaviours and CHSH correlators.

Bob's second observable plays the role of the energy: ``<A_x B_1> = E_x`` and
``<A_x B_2> = 2 w_x - 1``.  Membership in Q transports to membership of the
image in the quantum Bell set (decided by Tsirelson's 4x4 Gram matrix with
two free entries), and the classical set maps onto the two CHSH inequalities
``+-(<A1B1> - <A2B1>) - <A1B2> - <A2B2> <= 2``.  The module serves as an
independent oracle for :mod:`energyqrng.qset`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sdpcore
from .errors import DomainError
from .qset import _as_behaviour, _as_pair

CLASSICAL_BOUND = 2.0
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class BellBehaviour:
    """Correlators in the order ``(A1B1, A1B2, A2B1, A2B2)``."""

    a1b1: float
    a1b2: float
    a2b1: float
    a2b2: float

    def __post_init__(self):
        for name in ("a1b1", "a1b2", "a2b1", "a2b2"):
            v = float(getattr(self, name))
            if not -1.0 <= v <= 1.0:
                raise DomainError(f"correlator {name} = {v} outside [-1, 1]")
            object.__setattr__(self, name, v)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a1b1, self.a1b2, self.a2b1, self.a2b2])


def pm_to_bell(b, w) -> BellBehaviour:
    """Image ``(E_1, 2 w_1 - 1, E_2, 2 w_2 - 1)``; the energy relation is taken with equality."""
    b = _as_behaviour(b)
    w1, w2 = _as_pair(w)
    if w1 > 1.0 or w2 > 1.0:
        raise DomainError("energies must lie in [0, 1]")
    return BellBehaviour(b.e1, 2.0 * w1 - 1.0, b.e2, 2.0 * w2 - 1.0)


def tsirelson_problem(bb: BellBehaviour) -> sdpcore.SdpProblem:
    """Feasibility SDP over ``(u, v)`` for the Gram matrix of ``A1, A2, B1, B2``."""
    g = np.eye(4)
    g[0, 2] = g[2, 0] = bb.a1b1
    g[0, 3] = g[3, 0] = bb.a1b2
    g[1, 2] = g[2, 1] = bb.a2b1
    g[1, 3] = g[3, 1] = bb.a2b2
    eu = np.zeros((4, 4))
    eu[0, 1] = eu[1, 0] = 1.0
    ev = np.zeros((4, 4))
    ev[2, 3] = ev[3, 2] = 1.0
    p = sdpcore.SdpProblem(2)
    p.add_lmi(g, {0: eu, 1: ev})
    return p


def bell_quantum_membership(bb: BellBehaviour, tol: float = 1e-7, opts: sdpcore.SolverOptions | None = None) -> bool:
    """Whether some ``u, v`` make the Tsirelson Gram matrix PSD (up to ``tol``)."""
    return bool(sdpcore.check_feasible(tsirelson_problem(bb), margin=tol, opts=opts))


def energy_relaxed_problem(b, w) -> sdpcore.SdpProblem:
    """Tsirelson SDP over ``(u, v, c_1, c_2)`` with ``<A_x B_1> = E_x`` and ``-1 <= c_x = <A_x B_2> <= 2 w_x - 1``.

    This is the existential form of the correspondence: the energy relation
    is an inequality, and saturating it is not always possible (for
    ``E_x`` near 1 the preparation is pinned close to the ground state).
    """
    bb = pm_to_bell(b, w)
    g = np.eye(4)
    g[0, 2] = g[2, 0] = bb.a1b1
    g[1, 2] = g[2, 1] = bb.a2b1
    terms = {}
    for k, (i, j) in enumerate(((0, 1), (2, 3), (0, 3), (1, 3))):
        m = np.zeros((4, 4))
        m[i, j] = m[j, i] = 1.0
        terms[k] = m
    p = sdpcore.SdpProblem(4)
    p.add_lmi(g, terms)
    p.lower = np.array([-np.inf, -np.inf, -1.0, -1.0])
    p.upper = np.array([np.inf, np.inf, bb.a1b2, bb.a2b2])
    return p


def pm_membership_via_bell(b, w, tol: float = 1e-7, opts: sdpcore.SolverOptions | None = None) -> bool:
    """Membership of ``(b, w)`` in Q decided on the Bell side (existential form)."""
    return bool(sdpcore.check_feasible(energy_relaxed_problem(b, w), margin=tol, opts=opts))


def chsh_values(bb: BellBehaviour) -> tuple[float, float]:
    """``(+(A1B1 - A2B1) - A1B2 - A2B2, -(A1B1 - A2B1) - A1B2 - A2B2)``."""
    d = bb.a1b1 - bb.a2b1
    s = bb.a1b2 + bb.a2b2
    return d - s, -d - s


def bell_classical(bb: BellBehaviour, tol: float = 1e-9) -> bool:
    """Both CHSH combinations at most 2 (up to ``tol``)."""
    return max(chsh_values(bb)) <= CLASSICAL_BOUND + tol
