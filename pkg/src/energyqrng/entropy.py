"""Worst-case entropy of the output over hidden-variable decompositions.

Given correlators E, energy thresholds (average and peak) and the input
distribution p(x), the adversary may realize E as a mixture of behaviours of
Q whose energies respect the peak bound individually and the average bound
on average.  The worst-case conditional Shannon entropy H* over such
mixtures is bounded from below through its dual:

    maximize   alpha + beta.E + gamma.w_avg
    subject to alpha + beta.E' + gamma.w' <= H(E')  for all (E', w') in Q_pk

with gamma <= 0.  H is replaced by the piecewise-linear minorant built from k
chords of the binary entropy per input, which turns the constraint into k^2
constraints "affine <= 0 on Q_pk", each an LMI through the Gram-matrix
description of Q.  The same machinery with the four exact linear pieces of
the guessing probability gives the min-entropy bound.

Upper bounds come from the primal side: a linear program over a discretized
set of extremal behaviours (:func:`decompose_upper_bound`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import sdpcore
from .errors import DiscretizationError, DomainError, InfeasibleBehaviourError, SolverError
from .qset import (
    Behaviour,
    EnergyBounds,
    _as_behaviour,
    in_quantum_set_closed_form,
    sample_behaviours,
)


_ACCEPT_RESIDUAL = 1e-6


@dataclass(frozen=True)
class InputDistribution:
    p1: float = 0.5
    p2: float = 0.5

    def __post_init__(self):
        p1, p2 = float(self.p1), float(self.p2)
        if not (p1 > 0.0 and p2 > 0.0) or abs(p1 + p2 - 1.0) > 1e-12:
            raise DomainError(f"input distribution ({p1}, {p2}) must be positive and sum to 1")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.p1, self.p2])

    @classmethod
    def uniform(cls) -> "InputDistribution":
        return cls(0.5, 0.5)


@dataclass(frozen=True)
class LinearTarget:
    """Only the value ``c1 E1 + c2 E2 = value`` of the correlators is fixed."""

    c1: float
    c2: float
    value: float

    @property
    def direction(self) -> np.ndarray:
        return np.array([self.c1, self.c2], dtype=float)


@dataclass(frozen=True)
class EntropyProblem:
    """Target (behaviour or linear functional), energies, inputs and chord count.

    ``energy_weights`` replaces the two average-energy constraints by the single
    constraint ``sum_x weights_x w_x <= sum_x weights_x avg_x`` (for instance the
    input-averaged energy).
    """

    target: Behaviour | LinearTarget
    energies: EnergyBounds
    inputs: InputDistribution = field(default_factory=InputDistribution)
    k: int = 16
    energy_weights: tuple[float, float] | None = None

    def __post_init__(self):
        if not isinstance(self.target, LinearTarget):
            object.__setattr__(self, "target", _as_behaviour(self.target))
        if int(self.k) != self.k or self.k < 1:
            raise DomainError("segment count k must be a positive integer")


@dataclass(frozen=True)
class ChordFamily:
    """Lines ``c_i E + d_i`` through consecutive nodes of h_bin on [-1, 1]."""

    slopes: np.ndarray
    intercepts: np.ndarray

    @property
    def k(self) -> int:
        return len(self.slopes)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.k + 1)

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(c), float(d)) for c, d in zip(self.slopes, self.intercepts)]

    def evaluate(self, e) -> np.ndarray:
        """Pointwise minimum of the chord lines."""
        e = np.asarray(e, dtype=float)
        return np.min(np.multiply.outer(e, self.slopes) + self.intercepts, axis=-1)


@dataclass(frozen=True)
class DualCertificate:
    """Affine certificate ``alpha + beta.E + gamma.w`` with ``gamma <= 0``.

    ``value`` is the certified objective at the problem's target.  For
    min-entropy certificates the affine function lower-bounds ``-G(E)``, the
    negated guessing probability, rather than H.
    """

    alpha: float
    beta: tuple[float, float]
    gamma: tuple[float, float]
    value: float = float("nan")
    kind: str = "shannon"

    def affine(self, e, w) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        w = np.asarray(w, dtype=float)
        return self.alpha + e @ np.asarray(self.beta) + w @ np.asarray(self.gamma)


@dataclass(frozen=True)
class DualSolution:
    bound: float
    certificate: DualCertificate
    solver_value: float
    solution: sdpcore.SdpSolution


def binary_entropy(e) -> np.ndarray | float:
    """Entropy in bits of a +-1 outcome with correlator ``e`` (0 log 0 := 0)."""
    e_arr = np.asarray(e, dtype=float)
    if np.any(np.abs(e_arr) > 1.0):
        raise DomainError("correlator outside [-1, 1]")
    out = np.zeros_like(e_arr)
    for a in (1.0, -1.0):
        q = (1.0 + a * e_arr) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            out -= np.where(q > 0.0, q * np.log2(np.where(q > 0.0, q, 1.0)), 0.0)
    return float(out) if np.ndim(e) == 0 else out


def shannon_binary(q: float) -> float:
    """Binary Shannon entropy of a probability ``q``."""
    return float(binary_entropy(1.0 - 2.0 * q))


def conditional_entropy(e, inputs: InputDistribution) -> np.ndarray | float:
    """``H(E) = sum_x p(x) h_bin(E_x)`` for one behaviour or an array (..., 2)."""
    e = np.asarray(e, dtype=float)
    return inputs.p1 * binary_entropy(e[..., 0]) + inputs.p2 * binary_entropy(e[..., 1])


def guessing_probability(e, inputs: InputDistribution) -> np.ndarray | float:
    e = np.asarray(e, dtype=float)
    return inputs.p1 * (1.0 + np.abs(e[..., 0])) / 2.0 + inputs.p2 * (1.0 + np.abs(e[..., 1])) / 2.0


def chords(k: int) -> ChordFamily:
    """k chords of h_bin through the equally spaced nodes ``-1 + 2j/k``."""
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    nodes = np.linspace(-1.0, 1.0, int(k) + 1)
    h = binary_entropy(nodes)
    slopes = np.diff(h) / np.diff(nodes)
    intercepts = h[:-1] - slopes * nodes[:-1]
    return ChordFamily(slopes, intercepts)


# ---------------------------------------------------------------------------
# dual SDP


def _a_matrix(alpha, beta1, beta2) -> np.ndarray:
    """Matrix A with trace pairing ``<A, Gram> = alpha + beta.E``."""
    m = np.zeros((4, 4))
    np.fill_diagonal(m, alpha / 4.0)
    m[0, 2] = m[2, 0] = beta1 / 2.0
    m[1, 2] = m[2, 1] = beta2 / 2.0
    return m


def _c_matrix(g1, g2) -> np.ndarray:
    """Matrix C with ``<C, Gram> = gamma.eta``."""
    m = np.zeros((4, 4))
    np.fill_diagonal(m, (g1 + g2) / 8.0)
    m[0, 3] = m[3, 0] = g1 / 4.0
    m[1, 3] = m[3, 1] = g2 / 4.0
    return m


def _e_matrix(i) -> np.ndarray:
    m = np.zeros((4, 4))
    m[i, i] = 1.0
    return m


_A_ALPHA = _a_matrix(1.0, 0.0, 0.0)
_A_BETA = (_a_matrix(0.0, 1.0, 0.0), _a_matrix(0.0, 0.0, 1.0))
_C_GAMMA = (_c_matrix(1.0, 0.0), _c_matrix(0.0, 1.0))
_E_DELTA = tuple(_e_matrix(i) for i in range(4))


def _shannon_pieces(cf: ChordFamily, inputs: InputDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Offsets r and slopes r_vec of the k^2 affine pieces of H_k."""
    i1, i2 = np.meshgrid(np.arange(cf.k), np.arange(cf.k), indexing="ij")
    i1, i2 = i1.ravel(), i2.ravel()
    r = inputs.p1 * cf.intercepts[i1] + inputs.p2 * cf.intercepts[i2]
    rv = np.stack([inputs.p1 * cf.slopes[i1], inputs.p2 * cf.slopes[i2]], axis=1)
    return r, rv


def _guessing_pieces(inputs: InputDistribution) -> tuple[np.ndarray, np.ndarray]:
    """The four pieces of ``-G``: ``-(sum_x p(x)(1 + a_x E_x)/2)``."""
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    r = -np.full(4, 0.5)
    rv = -0.5 * signs * inputs.vector
    return r, rv


@dataclass
class _DualLayout:
    """Variable positions of the dual SDP and the face the Gram matrices live on."""

    beta_map: np.ndarray  # beta = beta_map @ theta
    gamma_map: np.ndarray  # gamma = gamma_map @ g
    pk_free: np.ndarray  # inputs whose per-piece peak multiplier is a variable
    face: np.ndarray  # Gram = face @ reduced @ face.T
    nv: int = 0

    @property
    def n_theta(self) -> int:
        return self.beta_map.shape[1]

    @property
    def n_g(self) -> int:
        return self.gamma_map.shape[1]

    @property
    def theta(self) -> slice:
        return slice(1, 1 + self.n_theta)

    @property
    def g(self) -> slice:
        return slice(1 + self.n_theta, 1 + self.n_theta + self.n_g)

    @property
    def n_global(self) -> int:
        return 1 + self.n_theta + self.n_g

    @property
    def dim(self) -> int:
        return self.face.shape[1]

    @property
    def per_piece(self) -> int:
        return int(self.pk_free.sum()) + self.dim

    def reduce(self, m: np.ndarray) -> np.ndarray:
        return self.face.T @ m @ self.face


def _face(pk: np.ndarray) -> np.ndarray:
    """Basis map for Gram matrices with ``n_x = -k`` whenever ``pk_x == 0``.

    A zero peak energy pins ``eta_x = 0`` and leaves the Gram set without
    interior; working on the face restores strict feasibility, so the
    multiplier of that peak bound (which would run off to -inf) disappears.
    """
    keep = [x for x in range(2) if pk[x] > 0.0] + [2, 3]
    v = np.zeros((4, len(keep)))
    for col, row in enumerate(keep):
        v[row, col] = 1.0
    for x in range(2):
        if pk[x] <= 0.0:
            v[x, -1] = -1.0
    return v


def _build_dual(prob: EntropyProblem, r: np.ndarray, rv: np.ndarray) -> tuple[sdpcore.SdpProblem, _DualLayout]:
    """Dual SDP (as a minimization of the negated objective) for pieces (r, rv)."""
    en = prob.energies
    pk = np.asarray(en.pk)
    avg = np.asarray(en.avg)
    if isinstance(prob.target, LinearTarget):
        beta_map = prob.target.direction.reshape(2, 1)
        obj_theta = np.array([prob.target.value])
    else:
        beta_map = np.eye(2)
        obj_theta = prob.target.vector
    live = pk > 0.0
    if prob.energy_weights is not None:
        wts = np.asarray(prob.energy_weights, dtype=float)
        if np.any(wts < 0) or not np.any(wts > 0):
            raise DomainError("energy weights must be nonnegative and not all zero")
        # energies pinned to zero contribute nothing to the weighted average
        wts = np.where(live, wts, 0.0)
        gamma_map = wts.reshape(2, 1) if np.any(wts > 0) else np.zeros((2, 0))
    else:
        gamma_map = np.eye(2)[:, live]
    obj_g = gamma_map.T @ avg
    # a peak bound of 1 is implied by the unit diagonal, one of 0 by the face
    pk_free = (pk < 1.0) & live
    lay = _DualLayout(beta_map, gamma_map, pk_free, _face(pk))
    npieces = len(r)
    lay.nv = lay.n_global + npieces * lay.per_piece
    d = lay.dim

    objective = np.zeros(lay.nv)
    objective[0] = -1.0
    objective[lay.theta] = -obj_theta
    objective[lay.g] = -obj_g
    p = sdpcore.SdpProblem(lay.nv, objective=objective)

    # global coefficient matrices of  -(A(alpha, beta) + C(gamma)), on the face
    glob = [-_A_ALPHA]
    glob += [-(beta_map[0, j] * _A_BETA[0] + beta_map[1, j] * _A_BETA[1]) for j in range(lay.n_theta)]
    glob += [-(gamma_map[0, j] * _C_GAMMA[0] + gamma_map[1, j] * _C_GAMMA[1]) for j in range(lay.n_g)]
    local = [-_C_GAMMA[x] for x in range(2) if pk_free[x]]
    coeffs = np.array([lay.reduce(m) for m in glob + local] + [-np.diag(row) for row in np.eye(d)])
    gidx = np.arange(lay.n_global)
    pk_terms = pk[pk_free]
    n_gp = len(pk_terms)
    upper = np.full(lay.nv, np.inf)
    upper[lay.g] = 0.0
    for j in range(npieces):
        base = lay.n_global + j * lay.per_piece
        lidx = np.arange(base, base + lay.per_piece)
        # -(A(alpha - r, beta - rv) + C(gamma + gamma')) - diag(delta) >= 0
        const = lay.reduce(_a_matrix(r[j], rv[j, 0], rv[j, 1]))
        p.blocks.append(sdpcore.LmiBlock(const, np.concatenate([gidx, lidx]), coeffs))
        # sum(delta) + gamma'.pk >= 0
        p.linear.append(
            sdpcore.LinearConstraint(lidx, np.concatenate([pk_terms, np.ones(d)]), ">=", 0.0)
        )
        upper[base : base + n_gp] = 0.0
    p.upper = upper
    return p, lay


def _certificate_from(x, lay: _DualLayout) -> tuple[float, np.ndarray, np.ndarray]:
    alpha = float(x[0])
    beta = lay.beta_map @ x[lay.theta]
    gamma = lay.gamma_map @ x[lay.g]
    return alpha, beta, gamma


def _repair(x, lay: _DualLayout, prob: EntropyProblem, r, rv) -> float:
    """Smallest alpha decrease making the rounded solver point exactly feasible.

    Each piece's block must be negative semidefinite and its scalar row
    nonnegative.  Lowering alpha by ``4 eps`` moves the block by
    ``-eps face^T face``, at least ``-eps I``; a scalar shortfall ``s`` is
    absorbed by raising each of the ``d`` deltas by ``s/d``, which costs
    ``4 s / d`` more in alpha.  Sign constraints are enforced by clipping
    before the eigenvalue check.
    """
    pk = np.asarray(prob.energies.pk)[lay.pk_free]
    alpha, beta, gamma = _certificate_from(x, lay)
    gamma = np.minimum(gamma, 0.0)
    base_mat = _a_matrix(alpha, beta[0], beta[1]) + _c_matrix(gamma[0], gamma[1])
    d = lay.dim
    npieces = len(r)
    loc = x[lay.n_global :].reshape(npieces, lay.per_piece)
    n_gp = int(lay.pk_free.sum())
    gp = np.zeros((npieces, 2))
    gp[:, lay.pk_free] = np.minimum(loc[:, :n_gp], 0.0)
    delta = loc[:, n_gp:]
    full = (
        base_mat[None]
        - np.array([_a_matrix(rj, *rvj) for rj, rvj in zip(r, rv)])
        + np.array([_c_matrix(*g) for g in gp])
    )
    mats = np.einsum("ia,nij,jb->nab", lay.face, full, lay.face)
    mats[:, np.arange(d), np.arange(d)] += delta
    lam_max = np.maximum(np.linalg.eigvalsh(mats)[:, -1], 0.0)
    short = np.maximum(0.0, -(delta.sum(axis=1) + gp[:, lay.pk_free] @ pk))
    return float(np.max(4.0 * (lam_max + short / d), initial=0.0))


def _solve_dual(prob: EntropyProblem, r, rv, kind: str, opts=None) -> DualSolution:
    p, lay = _build_dual(prob, r, rv)
    sol = sdpcore.solve(p, opts)
    if sol.status == sdpcore.UNBOUNDED:
        raise InfeasibleBehaviourError(
            "target is not reachable with the average energies (dual unbounded)"
        )
    if sol.status == sdpcore.INFEASIBLE:
        # cannot happen for well-formed data: alpha -> -inf is always feasible
        raise SolverError("dual entropy SDP reported infeasible", status=sol.status, solution=sol)
    # the repaired certificate is valid whatever the solver status; a stalled
    # but nearly optimal iterate only costs a little tightness
    near = max(sol.primal_residual, sol.dual_residual, sol.gap) <= _ACCEPT_RESIDUAL
    if sol.status != sdpcore.OPTIMAL and not (sol.status == sdpcore.NUMERICAL_FAILURE and near):
        raise SolverError(f"dual entropy SDP failed: {sol.status}", status=sol.status, solution=sol)
    shift = _repair(sol.x, lay, prob, r, rv)
    alpha, beta, gamma = _certificate_from(sol.x, lay)
    gamma = np.minimum(gamma, 0.0)
    alpha -= shift
    target = prob.target
    if isinstance(target, LinearTarget):
        theta = sol.x[lay.theta]
        value = alpha + float(theta[0]) * target.value
    else:
        value = alpha + float(beta @ target.vector)
    value += float(gamma @ np.asarray(prob.energies.avg))
    cert = DualCertificate(alpha, (float(beta[0]), float(beta[1])), (float(gamma[0]), float(gamma[1])), value, kind)
    return DualSolution(value, cert, -sol.objective, sol)


def _check_target(prob: EntropyProblem):
    if isinstance(prob.target, Behaviour) and not in_quantum_set_closed_form(prob.target, prob.energies.pk):
        raise InfeasibleBehaviourError(f"{prob.target} is not in Q at peak energies {prob.energies.pk}")


def entropy_dual(prob: EntropyProblem, opts: sdpcore.SolverOptions | None = None) -> DualSolution:
    """Full result of the chord dual, including the raw solver output."""
    _check_target(prob)
    r, rv = _shannon_pieces(chords(prob.k), prob.inputs)
    return _solve_dual(prob, r, rv, "shannon", opts)


def entropy_lower_bound(prob: EntropyProblem, opts: sdpcore.SolverOptions | None = None) -> tuple[float, DualCertificate]:
    """Certified lower bound H_k* on the worst-case conditional entropy.

    The returned value is that of the repaired certificate, so it never
    exceeds what the certificate proves even if the solver's last iterate
    violates a constraint by rounding.

    Raises
    ------
    InfeasibleBehaviourError
        If the target is outside Q at the peak energies, or unreachable with
        the average energies.
    SolverError
        If the SDP solve breaks down.
    """
    res = entropy_dual(prob, opts)
    return res.bound, res.certificate


def min_entropy_bound(prob: EntropyProblem, opts: sdpcore.SolverOptions | None = None) -> tuple[float, DualCertificate]:
    """Lower bound ``-log2 G*`` on the worst-case min-entropy (``prob.k`` is ignored).

    The guessing probability is the exact maximum of four affine pieces, so a
    single SDP with four blocks is exact.  The certificate lower-bounds
    ``-G``; its value is ``-G*``.
    """
    _check_target(prob)
    r, rv = _guessing_pieces(prob.inputs)
    res = _solve_dual(prob, r, rv, "guessing", opts)
    g_star = min(1.0, max(-res.bound, 0.5))
    return max(0.0, -math.log2(g_star)), res.certificate


def verify_certificate(
    cert: DualCertificate,
    chord_family: ChordFamily | None,
    energies: EnergyBounds,
    inputs: InputDistribution,
    samples: int = 100_000,
    seed: int = 0,
    slack: float = 1e-9,
) -> bool:
    """Spot-check ``alpha + beta.E + gamma.w <= H(E) + slack`` on random members of Q_pk.

    Behaviours come from random qubit realizations with energies at most the
    peak bound (:func:`energyqrng.qset.sample_behaviours`).  When a chord
    family is given, the stronger bound by its piecewise-linear minorant
    ``H_k`` is checked instead, which is what the chord SDP enforces.  Min-
    entropy certificates are checked against ``-G(E)``.
    """
    rng = np.random.default_rng(seed)
    done = 0
    batch = 50_000
    pk = np.asarray(energies.pk)
    while done < samples:
        size = min(batch, samples - done)
        e, w = sample_behaviours(rng, size, energies.pk)
        keep = np.all(w <= pk + 1e-15, axis=1)
        e, w = e[keep], w[keep]
        if cert.kind == "guessing":
            bound = -guessing_probability(e, inputs)
        elif chord_family is not None:
            bound = inputs.p1 * chord_family.evaluate(e[:, 0]) + inputs.p2 * chord_family.evaluate(e[:, 1])
        else:
            bound = conditional_entropy(e, inputs)
        if np.any(cert.affine(e, w) > bound + slack):
            return False
        done += size
    return True


# ---------------------------------------------------------------------------
# primal oracle


@dataclass(frozen=True)
class SupportPoint:
    weight: float
    behaviour: Behaviour
    energies: tuple[float, float]


def _energy_levels(pk: float, avg: float, count: int) -> np.ndarray:
    if pk <= 0.0:
        return np.zeros(1)
    base = np.linspace(0.0, pk, count)
    return np.unique(np.concatenate([base, [avg, pk]]))


def extremal_candidates(energies: EnergyBounds, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Discretized extremal behaviours of Q_pk, roughly ``grid`` of them.

    For an energy pair ``w`` the allowed correlators form the band
    ``|asin E1 - asin E2| <= T(w) = 2 (asin sqrt(w1) + asin sqrt(w2))``; its
    extremal points are the two boundary arcs ``asin E1 - asin E2 = +-T``
    plus the deterministic corners.  Energies run over a grid in
    ``[0, pk]`` that contains the average thresholds exactly.
    """
    pk = np.asarray(energies.pk)
    avg = np.asarray(energies.avg)
    n_lv = max(2, int(round(grid ** (1.0 / 3.0))) + 1)
    lv1 = _energy_levels(pk[0], avg[0], n_lv)
    lv2 = _energy_levels(pk[1], avg[1], n_lv)
    w1, w2 = (a.ravel() for a in np.meshgrid(lv1, lv2, indexing="ij"))
    n_pos = max(2, grid // (2 * len(w1)))
    pts = []
    ens = []
    half = np.pi / 2.0
    big_t = 2.0 * (np.arcsin(np.sqrt(w1)) + np.arcsin(np.sqrt(w2)))
    s = np.linspace(0.0, 1.0, n_pos)
    for t, a, b in zip(big_t, w1, w2):
        corners = [(1.0, 1.0), (-1.0, -1.0)]
        if t >= np.pi - 1e-15:
            corners += [(1.0, -1.0), (-1.0, 1.0)]
            arc = np.empty((0, 2))
        else:
            # theta1 - theta2 = +T, theta1 in [-pi/2 + T, pi/2]; mirrored for -T
            th1 = -half + t + s * (np.pi - t)
            plus = np.stack([np.sin(th1), np.sin(th1 - t)], axis=1)
            arc = np.concatenate([plus, plus[:, ::-1]])
        block = np.concatenate([np.array(corners), arc])
        pts.append(block)
        ens.append(np.tile([a, b], (len(block), 1)))
    return np.concatenate(pts), np.concatenate(ens)


def decompose_upper_bound(
    b, energies: EnergyBounds, inputs: InputDistribution, grid: int = 10_000
) -> tuple[float, list[SupportPoint]]:
    """Upper bound on H* from the best decomposition over discretized extremal points.

    Solves the linear program ``min sum_l q_l H(E_l)`` over weights ``q >= 0``
    with ``sum q = 1``, ``sum q E_l = E`` and ``sum q w_l <= avg``.  A basic
    optimal solution has at most five nonzero weights (one per row).

    Raises
    ------
    DiscretizationError
        If the target is outside the hull of the candidate points.
    """
    b = _as_behaviour(b)
    pts, ens = extremal_candidates(energies, grid)
    cost = conditional_entropy(pts, inputs)
    a_eq = np.vstack([np.ones(len(pts)), pts.T])
    b_eq = np.array([1.0, b.e1, b.e2])
    a_ub = ens.T
    b_ub = np.asarray(energies.avg)
    res = scipy.optimize.linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 2:
        raise DiscretizationError(f"{b} is outside the discretized hull (grid {grid})")
    if res.status != 0:
        raise SolverError(f"LP oracle failed: {res.message}", status=res.status)
    support = [
        SupportPoint(float(q), Behaviour(*np.clip(pts[i], -1, 1)), (float(ens[i, 0]), float(ens[i, 1])))
        for i, q in enumerate(res.x)
        if q > 1e-12
    ]
    return float(res.fun), support


def ook_entropy_analytic(inputs: InputDistribution, e2: float, wpk2: float) -> float:
    """Closed form for on-off keying: ``p_X(1) (1 + E2) / (2 w) * h(w)``.

    ``h(w)`` is the binary Shannon entropy of the probability ``w`` (that is
    ``binary_entropy(1 - 2 w)``), and the prefactor is the probability of the
    *first* input.  The decomposition behind it mixes ``(-1, -1)`` and
    ``(-1, -1 + 2 w)``, whose entropy lives entirely on input 2, so for
    non-uniform inputs the derivable prefactor is ``p_X(2)``;
    :func:`decompose_upper_bound` reproduces that variant.  The two coincide
    for uniform inputs.

    Raises
    ------
    DomainError
        Unless ``0 < wpk2 <= 1`` and ``-1 <= e2 <= -1 + 2 wpk2``.
    """
    wpk2 = float(wpk2)
    e2 = float(e2)
    if not 0.0 < wpk2 <= 1.0:
        raise DomainError("wpk2 must lie in (0, 1]")
    if not -1.0 <= e2 <= -1.0 + 2.0 * wpk2 + 1e-15:
        raise DomainError("e2 must lie in [-1, -1 + 2 wpk2]")
    return inputs.p1 * (1.0 + e2) / (2.0 * wpk2) * shannon_binary(wpk2)
