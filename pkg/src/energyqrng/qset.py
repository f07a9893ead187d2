"""Energy-constrained prepare-and-measure behaviours and the quantum set Q.

A behaviour is the pair of correlators ``E_x = Pr(a=+1|x) - Pr(a=-1|x)`` for
the two inputs, together with bounds ``w_x`` on the mean energy of the two
prepared states (energies in units of the energy observable's gap, so the
vacuum has energy 0 and every state has energy in [0, 1]).

Membership in Q is decided in two independent ways:

* closed form: ``|asin E1 - asin E2| <= 2 (asin sqrt(w1) + asin sqrt(w2))``,
  cross-checked against the equivalent scalar-product inequality;
* SDP: existence of ``u, v, eta1 <= w1, eta2 <= w2`` making the 4x4 Gram matrix
  of the Bloch vectors (n1, n2, m, k) positive semidefinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sdpcore
from .errors import DomainError, InternalConsistencyError, NotPsdError

MAX_AVERAGE = "max-average"
MAX_PEAK = "max-peak"

_UNIT_TOL = 1e-9
# closed-form verdicts are only compared outside this band around the boundary
_CROSS_CHECK_BAND = 1e-6


@dataclass(frozen=True)
class Behaviour:
    """Correlators (E1, E2) of the two inputs."""

    e1: float
    e2: float

    def __post_init__(self):
        for name in ("e1", "e2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or abs(v) > 1.0:
                raise DomainError(f"{name}={v} is not a correlator in [-1, 1]")
            object.__setattr__(self, name, v)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.e1, self.e2])

    @property
    def e_minus(self) -> float:
        """Half difference ``(E1 - E2) / 2``."""
        return 0.5 * (self.e1 - self.e2)


def _as_behaviour(b) -> Behaviour:
    if isinstance(b, Behaviour):
        return b
    e1, e2 = b
    return Behaviour(e1, e2)


def _as_pair(w, name="w") -> tuple[float, float]:
    w1, w2 = (float(v) for v in w)
    for v in (w1, w2):
        if not math.isfinite(v) or v < 0.0:
            raise DomainError(f"{name} must be componentwise nonnegative, got ({w1}, {w2})")
    return w1, w2


@dataclass(frozen=True)
class EnergyBounds:
    """Average and peak energy thresholds.

    Components above 1 are clamped to 1: with a unit gap no state can have a
    larger energy, so larger bounds carry no extra constraint.  After
    clamping ``0 <= avg <= pk <= 1`` must hold componentwise.
    """

    avg: tuple[float, float]
    pk: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        avg = tuple(min(v, 1.0) for v in _as_pair(self.avg, "avg"))
        pk = tuple(min(v, 1.0) for v in _as_pair(self.pk, "pk"))
        if avg[0] > pk[0] or avg[1] > pk[1]:
            raise DomainError(f"average energies {avg} exceed peak energies {pk}")
        object.__setattr__(self, "avg", avg)
        object.__setattr__(self, "pk", pk)

    @classmethod
    def peak_only(cls, pk) -> "EnergyBounds":
        """Only a peak constraint: the average bound is set equal to it."""
        return cls(avg=tuple(pk), pk=tuple(pk))

    @classmethod
    def average_only(cls, avg) -> "EnergyBounds":
        return cls(avg=tuple(avg), pk=(1.0, 1.0))


@dataclass(frozen=True)
class QuantumRepresentation:
    """Bloch data of a qubit realization.

    ``n1``, ``n2`` are the states, ``m`` the measured observable (norm at
    most 1) and ``k`` the direction of the energy observable
    ``O = (1 + k.sigma) / 2``.
    """

    n1: np.ndarray
    n2: np.ndarray
    m: np.ndarray
    k: np.ndarray
    tol: float = 1e-8

    def __post_init__(self):
        for name in ("n1", "n2", "m", "k"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            object.__setattr__(self, name, v)
        for name in ("n1", "n2", "k"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > self.tol:
                raise DomainError(f"{name} is not a unit vector")
        if np.linalg.norm(self.m) > 1.0 + self.tol:
            raise DomainError("measurement vector has norm above 1")


class GramMatrix:
    """4x4 Gram matrix of (n1, n2, m, k) with unit diagonal.

    Layout (0-based): ``[0,1] = u``, ``[0,2] = E1``, ``[1,2] = E2``,
    ``[0,3] = 2 eta1 - 1``, ``[1,3] = 2 eta2 - 1``, ``[2,3] = v``.
    """

    def __init__(self, matrix, tol: float = 1e-9):
        g = np.array(matrix, dtype=float)
        if g.shape != (4, 4):
            raise DomainError("Gram matrix must be 4x4")
        if not np.allclose(g, g.T, atol=tol, rtol=0.0):
            raise DomainError("Gram matrix must be symmetric")
        if np.any(np.abs(np.diag(g) - 1.0) > tol):
            raise DomainError("Gram matrix must have unit diagonal")
        g = 0.5 * (g + g.T)
        np.fill_diagonal(g, 1.0)
        self.matrix = g

    @classmethod
    def from_entries(cls, e1, e2, eta1, eta2, u=0.0, v=0.0) -> "GramMatrix":
        g = np.eye(4)
        for (i, j), val in {
            (0, 1): u,
            (0, 2): e1,
            (1, 2): e2,
            (0, 3): 2.0 * eta1 - 1.0,
            (1, 3): 2.0 * eta2 - 1.0,
            (2, 3): v,
        }.items():
            g[i, j] = g[j, i] = val
        return cls(g)

    @property
    def behaviour(self) -> Behaviour:
        return Behaviour(np.clip(self.matrix[0, 2], -1, 1), np.clip(self.matrix[1, 2], -1, 1))

    @property
    def eta(self) -> tuple[float, float]:
        return (0.5 * (1.0 + self.matrix[0, 3]), 0.5 * (1.0 + self.matrix[1, 3]))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def _closed_form_margins(b: Behaviour, w1: float, w2: float) -> tuple[float, float]:
    w1, w2 = min(w1, 1.0), min(w2, 1.0)
    arc = 2.0 * (math.asin(math.sqrt(w1)) + math.asin(math.sqrt(w2))) - abs(
        math.asin(b.e1) - math.asin(b.e2)
    )
    lhs = 0.5 * (
        math.sqrt(1.0 + b.e1) * math.sqrt(1.0 + b.e2) + math.sqrt(1.0 - b.e1) * math.sqrt(1.0 - b.e2)
    )
    rhs = math.sqrt(1.0 - w1) * math.sqrt(1.0 - w2) - math.sqrt(w1 * w2)
    return arc, lhs - rhs


def closed_form_margin(b, w) -> float:
    """Signed slack of the arcsine inequality (>= 0 inside Q, +inf when w1 + w2 >= 1)."""
    b = _as_behaviour(b)
    w1, w2 = _as_pair(w)
    if w1 + w2 >= 1.0:
        return math.inf
    return _closed_form_margins(b, w1, w2)[0]


def in_quantum_set_closed_form(b, w, tol: float = 1e-9) -> bool:
    """Closed-form membership of behaviour ``b`` at peak energies ``w``.

    Both the arcsine and the scalar-product forms are evaluated.  They must
    agree except inside a narrow band around the boundary, where rounding
    can legitimately split them; a clear contradiction raises
    :class:`InternalConsistencyError`.  The verdict is the arcsine one.

    Raises
    ------
    DomainError
        If ``w`` has a negative component or ``|E_x| > 1``.
    """
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    b = _as_behaviour(b)
    w1, w2 = _as_pair(w)
    if w1 + w2 >= 1.0:
        return True
    arc, scal = _closed_form_margins(b, w1, w2)
    if (arc > _CROSS_CHECK_BAND and scal < -_CROSS_CHECK_BAND) or (
        arc < -_CROSS_CHECK_BAND and scal > _CROSS_CHECK_BAND
    ):
        raise InternalConsistencyError(
            f"arcsine margin {arc:.3e} and scalar margin {scal:.3e} disagree at {b}, w=({w1}, {w2})"
        )
    return arc >= -tol


def gram_feasibility_problem(b, w) -> sdpcore.SdpProblem:
    """SDP in the variables (u, v, eta1, eta2) whose feasibility is membership."""
    b = _as_behaviour(b)
    w1, w2 = _as_pair(w)

    def sym(i, j, val=1.0):
        mat = np.zeros((4, 4))
        mat[i, j] = mat[j, i] = val
        return mat

    const = np.eye(4)
    const[0, 2] = const[2, 0] = b.e1
    const[1, 2] = const[2, 1] = b.e2
    const[0, 3] = const[3, 0] = -1.0
    const[1, 3] = const[3, 1] = -1.0
    p = sdpcore.SdpProblem(4)
    p.add_lmi(const, {0: sym(0, 1), 1: sym(2, 3), 2: sym(0, 3, 2.0), 3: sym(1, 3, 2.0)})
    # eta >= 0 already follows from the unit diagonal
    p.upper = np.array([np.inf, np.inf, min(w1, 1.0), min(w2, 1.0)])
    return p


@dataclass(frozen=True)
class SdpMembership:
    member: bool
    slack: float
    gram: GramMatrix


def sdp_membership(b, w, tol: float = 1e-7, opts: sdpcore.SolverOptions | None = None) -> SdpMembership:
    """Membership through the Gram-matrix SDP, with the witness matrix.

    ``slack`` is the phase-I value (largest shift ``t`` such that the Gram
    matrix minus ``t I`` stays PSD with ``eta_x <= w_x - t``).

    Raises
    ------
    SolverError
        When the solver breaks down (distinct from a certified non-member).
    """
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    b = _as_behaviour(b)
    p = gram_feasibility_problem(b, w)
    res = sdpcore.check_feasible(p, margin=tol, opts=opts)
    u, v, eta1, eta2 = res.x
    gram = GramMatrix.from_entries(b.e1, b.e2, eta1, eta2, u, v)
    return SdpMembership(bool(res), res.slack, gram)


def in_quantum_set_sdp(b, w, tol: float = 1e-7) -> bool:
    """SDP membership verdict; see :func:`sdp_membership`."""
    return sdp_membership(b, w, tol).member


def is_classical(b, w_avg, mode: str = MAX_AVERAGE, tol: float = 1e-9) -> bool:
    """Whether ``b`` admits a deterministic hidden-variable decomposition.

    max-average: ``|E1 - E2| <= 2 (w1 + w2)``.  max-peak (non-trivial zone
    ``w1 + w2 < 1``): ``E1 == E2`` within ``tol``.
    """
    b = _as_behaviour(b)
    w1, w2 = _as_pair(w_avg, "w_avg")
    if mode == MAX_AVERAGE:
        return abs(b.e1 - b.e2) <= 2.0 * (w1 + w2) + tol
    if mode == MAX_PEAK:
        if w1 + w2 >= 1.0:
            # every behaviour is reachable with orthogonal deterministic states
            return True
        return abs(b.e1 - b.e2) <= tol
    raise DomainError(f"unknown mode {mode!r}")


def max_violation(w: float) -> float:
    """Largest quantum ``E_- = (E1 - E2)/2`` at symmetric energy ``w``: ``2 sqrt(w (1 - w))``.

    The formula describes the non-trivial regime ``w <= 1/2``; above it every
    behaviour is in Q and the true maximum is 1.
    """
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise DomainError("w must lie in [0, 1]")
    return 2.0 * math.sqrt(w * (1.0 - w))


def representation_from_gram(g, tol: float = 1e-8) -> QuantumRepresentation:
    """Recover qubit Bloch vectors from a PSD Gram matrix.

    The matrix is factorized through its eigendecomposition (eigenvalues down
    to ``-tol`` are clipped to zero), the four resulting vectors are written
    in an orthonormal basis of span{n1, n2, k}, and m is projected onto that
    span, which leaves every inner product with n1, n2 and k unchanged.

    Raises
    ------
    NotPsdError
        If the smallest eigenvalue is below ``-tol``.
    """
    if not isinstance(g, GramMatrix):
        g = GramMatrix(g)
    lam, vec = np.linalg.eigh(g.matrix)
    if lam[0] < -tol:
        raise NotPsdError(f"Gram matrix has eigenvalue {lam[0]:.3e}")
    lam = np.clip(lam, 0.0, None)
    keep = lam > tol * 1e-3
    vecs = vec[:, keep] * np.sqrt(lam[keep])
    norms = np.linalg.norm(vecs, axis=1)
    vecs = vecs / norms[:, None]
    n1, n2, m, k = vecs

    if vecs.shape[1] <= 3:
        # already at most three-dimensional: embed in R^3 directly
        coords = np.zeros((4, 3))
        coords[:, : vecs.shape[1]] = vecs
        return QuantumRepresentation(*coords)
    # orthonormal basis containing span{n1, n2, k}; the leading left singular
    # vectors cover the span even when it is degenerate
    basis = np.linalg.svd(np.stack([n1, n2, k], axis=1), full_matrices=True)[0][:, :3]
    c_n1, c_n2, c_k = basis.T @ n1, basis.T @ n2, basis.T @ k
    c_m = basis.T @ m
    scale = max(1.0, float(np.linalg.norm(c_m)))
    return QuantumRepresentation(c_n1, c_n2, c_m / scale, c_k)


def behaviour_from_representation(r: QuantumRepresentation) -> tuple[Behaviour, tuple[float, float]]:
    """Forward map: ``E_x = n_x . m`` and ``w_x = (1 + n_x . k) / 2``."""
    e = np.clip([r.n1 @ r.m, r.n2 @ r.m], -1.0, 1.0)
    w = np.clip([(1.0 + r.n1 @ r.k) / 2.0, (1.0 + r.n2 @ r.k) / 2.0], 0.0, 1.0)
    return Behaviour(e[0], e[1]), (float(w[0]), float(w[1]))


def random_unit_vectors(rng: np.random.Generator, size: int) -> np.ndarray:
    v = rng.normal(size=(size, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_behaviours(
    rng: np.random.Generator, size: int, w_pk=(1.0, 1.0), unit_m_fraction: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Draw behaviours of Q with energies at most ``w_pk`` through random qubit realizations.

    Energies are drawn uniformly in ``[0, w_pk]`` (a quarter of the draws sit
    exactly at the peak), the states are placed on the corresponding circle
    of latitude around ``k = z``, and ``m`` is a random unit vector or, for
    the rest, a random vector of the unit ball.  Returns arrays ``E`` and
    ``w`` of shape ``(size, 2)``.
    """
    w_pk = np.minimum(np.asarray(_as_pair(w_pk, "w_pk")), 1.0)
    w = rng.uniform(size=(size, 2)) * w_pk
    at_peak = rng.uniform(size=(size, 2)) < 0.25
    w = np.where(at_peak, w_pk, w)
    cos_t = 2.0 * w - 1.0
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=(size, 2))
    n = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)
    m = random_unit_vectors(rng, size)
    shrink = np.where(rng.uniform(size=size) < unit_m_fraction, 1.0, np.cbrt(rng.uniform(size=size)))
    m = m * shrink[:, None]
    e = np.clip(np.einsum("sxi,si->sx", n, m), -1.0, 1.0)
    return e, np.clip((1.0 + n[..., 2]) / 2.0, 0.0, 1.0)
