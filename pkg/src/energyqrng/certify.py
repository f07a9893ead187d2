"""Trade-off functions and finite-statistics accounting.

A trade-off function (TF) is an affine lower bound ``alpha + beta.E +
gamma.w <= H(E)`` valid on the peak-energy-restricted quantum set, with
``gamma <= 0``.  It is evaluated on a transcript through the per-round
estimator ``xi(a, x) = (alpha_x + a beta_x) / p(x)``; the martingale
argument then gives, with probability at least ``1 - eps_w - eps_t``,

    -(1/n) log2 mu(a^n | x^n, lambda) >= <xi> + gamma.w_avg - t.

Everything in this module is base-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.optimize

from .entropy import (
    DualCertificate,
    EntropyProblem,
    InputDistribution,
    entropy_lower_bound,
)
from .errors import DomainError
from .qset import Behaviour, EnergyBounds, _as_behaviour

OUTPUT_ALPHABET = 2
LOG2E = math.log2(math.e)

# cross term of the second-moment bound: the sign derived in the proof
# (default), the sign printed with the final statement, or the larger one
LEMMA = "lemma"
THEOREM = "theorem"
CONSERVATIVE = "max"
V_VARIANTS = (LEMMA, THEOREM, CONSERVATIVE)

SPLIT_HALF = "half"
SPLIT_OPTIMAL = "optimal"


@dataclass(frozen=True)
class TradeoffFunction:
    """``(alpha_1, alpha_2), (beta_1, beta_2), (gamma_1, gamma_2)`` with ``gamma <= 0``.

    Derived quantities (estimator table, extremes, variance bound) are cached.
    """

    alpha_split: tuple[float, float]
    beta: tuple[float, float]
    gamma: tuple[float, float]
    inputs: InputDistribution = field(default_factory=InputDistribution)

    def __post_init__(self):
        for name in ("alpha_split", "beta", "gamma"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 2 or not all(math.isfinite(c) for c in v):
                raise DomainError(f"{name} must be a pair of finite reals")
            object.__setattr__(self, name, v)
        if max(self.gamma) > 0.0:
            raise DomainError(f"gamma must be componentwise <= 0, got {self.gamma}")

    @property
    def alpha(self) -> float:
        return self.alpha_split[0] + self.alpha_split[1]

    @property
    def gamma_bar(self) -> float:
        return self.gamma[0] + self.gamma[1]

    @cached_property
    def xi_table(self) -> np.ndarray:
        """``xi[x, j]`` for input ``x+1`` and outcome ``a = (+1, -1)[j]``."""
        al = np.asarray(self.alpha_split)
        be = np.asarray(self.beta)
        p = self.inputs.vector
        return np.stack([(al + be) / p, (al - be) / p], axis=1)

    @property
    def xi_plus(self) -> float:
        return float(self.xi_table.max())

    @property
    def xi_minus(self) -> float:
        return float(self.xi_table.min())

    def value(self, e, w) -> float:
        """``alpha + beta.E + gamma.w``."""
        e = _as_behaviour(e).vector
        return self.alpha + float(np.dot(self.beta, e)) + float(np.dot(self.gamma, w))

    def certificate(self) -> DualCertificate:
        return DualCertificate(self.alpha, self.beta, self.gamma)

    def to_dict(self) -> dict:
        return {
            "alpha": list(self.alpha_split),
            "beta": list(self.beta),
            "gamma": list(self.gamma),
            "inputs": [self.inputs.p1, self.inputs.p2],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TradeoffFunction":
        return cls(tuple(d["alpha"]), tuple(d["beta"]), tuple(d["gamma"]), InputDistribution(*d["inputs"]))


def split_alpha(alpha: float, beta, inputs: InputDistribution, how: str = SPLIT_HALF) -> tuple[float, float]:
    """Distribute ``alpha`` over the two inputs.

    ``"half"`` gives ``alpha / 2`` each; ``"optimal"`` minimizes the spread
    ``xi+ - xi-`` of the estimator by a small linear program.
    """
    if how == SPLIT_HALF:
        return alpha / 2.0, alpha / 2.0
    if how != SPLIT_OPTIMAL:
        raise DomainError(f"unknown alpha split {how!r}")
    p = inputs.vector
    beta = np.asarray(beta, dtype=float)
    # variables (a1, hi, lo); xi(a, x) = (alpha_x + a beta_x) / p_x with alpha_2 = alpha - a1
    rows, rhs = [], []
    for x in range(2):
        sx = 1.0 if x == 0 else -1.0
        off = 0.0 if x == 0 else alpha
        for a in (1.0, -1.0):
            const = (off + a * beta[x]) / p[x]
            coef = sx / p[x]
            rows.append([coef, -1.0, 0.0])  # xi <= hi
            rhs.append(-const)
            rows.append([-coef, 0.0, 1.0])  # lo <= xi
            rhs.append(const)
    res = scipy.optimize.linprog(
        [0.0, 1.0, -1.0], A_ub=rows, b_ub=rhs, bounds=[(None, None)] * 3, method="highs"
    )
    if res.status != 0:
        return alpha / 2.0, alpha / 2.0
    a1 = float(res.x[0])
    return a1, alpha - a1


def make_tradeoff_function(
    expected,
    energies: EnergyBounds,
    inputs: InputDistribution | None = None,
    k: int = 16,
    split: str = SPLIT_HALF,
    opts=None,
    energy_weights: tuple[float, float] | None = None,
) -> TradeoffFunction:
    """TF optimized for ``expected``: the certificate of the chord dual there.

    Its value at ``(expected, energies.avg)`` equals the certified H_k*.
    ``energy_weights`` selects a single weighted average-energy constraint
    (see :class:`energyqrng.entropy.EntropyProblem`); the resulting gamma is
    proportional to the weights.

    Raises
    ------
    InfeasibleBehaviourError, SolverError
        From the entropy computation.
    """
    inputs = inputs or InputDistribution()
    b = _as_behaviour(expected)
    _, cert = entropy_lower_bound(EntropyProblem(b, energies, inputs, k, energy_weights), opts)
    return tradeoff_from_certificate(cert, inputs, split)


def tradeoff_from_certificate(cert: DualCertificate, inputs: InputDistribution, split: str = SPLIT_HALF) -> TradeoffFunction:
    gamma = tuple(min(g, 0.0) for g in cert.gamma)
    return TradeoffFunction(split_alpha(cert.alpha, cert.beta, inputs, split), cert.beta, gamma, inputs)


def estimator(tf: TradeoffFunction, a: int, x: int) -> float:
    """``xi(a, x) = (alpha_x + a beta_x) / p(x)`` for ``a = +-1`` and ``x in {1, 2}``."""
    if a not in (1, -1) or x not in (1, 2):
        raise DomainError("need a in {+1, -1} and x in {1, 2}")
    return float(tf.xi_table[x - 1, 0 if a == 1 else 1])


def estimator_values(tf: TradeoffFunction, a, x) -> np.ndarray:
    """Vectorized :func:`estimator` for arrays of outcomes (+-1) and inputs (1, 2)."""
    a = np.asarray(a)
    x = np.asarray(x)
    return tf.xi_table[x - 1, (a < 0).astype(np.intp)]


def variance_bound(tf: TradeoffFunction, variant: str = LEMMA) -> tuple[float, float, float]:
    """Second-moment bound ``V`` and the estimator extremes ``(xi+, xi-)``.

    ``V = max((xi+ + g)^2, (xi- + g)^2) + 2 c + (4 |A| / e^2) log2(e)^2`` with
    ``g = gamma_1 + gamma_2`` and cross term ``c = max(-log2|A| (xi- + g), 0)``
    (``variant="lemma"``), ``max(log2|A| (xi- + g), 0)`` (``"theorem"``) or
    the larger of both (``"max"``).
    """
    xp, xm, g = tf.xi_plus, tf.xi_minus, tf.gamma_bar
    log_a = math.log2(OUTPUT_ALPHABET)
    lemma = max(-log_a * (xm + g), 0.0)
    theorem = max(log_a * (xm + g), 0.0)
    if variant == LEMMA:
        cross = lemma
    elif variant == THEOREM:
        cross = theorem
    elif variant == CONSERVATIVE:
        cross = max(lemma, theorem)
    else:
        raise DomainError(f"unknown variance variant {variant!r}")
    v = max((xp + g) ** 2, (xm + g) ** 2) + 2.0 * cross + 4.0 * OUTPUT_ALPHABET / math.e**2 * LOG2E**2
    return v, xp, xm


def error_term(v: float, xi_plus: float, n: int, eps_t: float) -> float:
    """``t = sqrt(2 V log2(1/eps_t) / n) + (xi+ / 3) log2(1/eps_t) / n``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 0.0 < eps_t <= 1.0:
        raise DomainError("eps_t must lie in (0, 1)")
    if v < 0:
        raise DomainError("V must be nonnegative")
    lg = math.log2(1.0 / eps_t)
    return math.sqrt(2.0 * v) * math.sqrt(lg / n) + xi_plus / 3.0 * lg / n


def surprisal_rate(mean_xi: float, tf: TradeoffFunction, energies: EnergyBounds, t: float) -> float:
    """Certified per-round surprisal ``<xi> + gamma.w_avg - t``."""
    return float(mean_xi) + float(np.dot(tf.gamma, energies.avg)) - float(t)


def min_entropy_budget(n: int, r: float, t: float, eps_m: float) -> float:
    """``sigma_h = n (r - t) - log2(1/eps_m)``; nonpositive means nothing to extract.

    Raises
    ------
    DomainError
        If ``r - t > 1`` (more than one bit per binary output) or ``eps_m``
        is outside (0, 1].
    """
    if r - t > 1.0:
        raise DomainError(f"r - t = {r - t} exceeds one bit per round")
    if not 0.0 < eps_m <= 1.0:
        raise DomainError("eps_m must lie in (0, 1]")
    return n * (r - t) - math.log2(1.0 / eps_m)


@dataclass(frozen=True)
class Soundness:
    total: float
    conditional: float | None = None


def soundness_epsilon(eps_t: float, eps_m: float, eps_ext: float, eps_omega: float, kappa: float | None = None) -> Soundness:
    """Total soundness ``eps_t + eps_m + eps_Ext + eps_w``.

    With a pass probability ``kappa`` the conditional distance bound
    ``eps_Ext + (eps_w + eps_t + eps_m) / kappa`` is reported as well.
    ``eps_w = 0`` is accepted (no average-energy fluctuation allowance).
    """
    for name, v in (("eps_t", eps_t), ("eps_m", eps_m), ("eps_ext", eps_ext)):
        if not 0.0 < v < 1.0:
            raise DomainError(f"{name} must lie in (0, 1)")
    if not 0.0 <= eps_omega < 1.0:
        raise DomainError("eps_omega must lie in [0, 1)")
    total = eps_t + eps_m + eps_ext + eps_omega
    cond = None
    if kappa is not None:
        if not 0.0 < kappa <= 1.0:
            raise DomainError("kappa must lie in (0, 1]")
        cond = eps_ext + (eps_omega + eps_t + eps_m) / kappa
    return Soundness(total, cond)


def single_round_moments(tf: TradeoffFunction, e, w) -> tuple[float, float, float]:
    """Exact ``(E[T], E[T^2], max T)`` for one round with behaviour ``e`` and energies ``w``.

    ``T = xi(A, X) + gamma.w + log2 p(A|X)``; outcomes of zero probability
    do not contribute.
    """
    e = _as_behaviour(e).vector
    w = np.asarray(w, dtype=float)
    shift = float(np.dot(tf.gamma, w))
    m1 = m2 = 0.0
    hi = -math.inf
    for x in range(2):
        for j, a in enumerate((1.0, -1.0)):
            q = (1.0 + a * e[x]) / 2.0
            if q <= 0.0:
                continue
            tv = tf.xi_table[x, j] + shift + math.log2(q)
            px = tf.inputs.vector[x] * q
            m1 += px * tv
            m2 += px * tv * tv
            hi = max(hi, tv)
    return m1, m2, hi


@dataclass(frozen=True)
class ProtocolConfig:
    """Arguments of the spot-checking protocol.

    ``threshold`` is compared with ``<xi> + gamma.w_avg``; ``sigma`` is the
    extractor output length (see :func:`energyqrng.extract.plan`).
    """

    n: int
    energies: EnergyBounds
    tf: TradeoffFunction
    threshold: float
    eps_t: float = 1e-6
    eps_m: float = 1e-6
    eps_ext: float = 1e-6
    eps_omega: float = 1e-6
    sigma: int | None = None
    variant: str = LEMMA

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer")
        soundness_epsilon(self.eps_t, self.eps_m, self.eps_ext, self.eps_omega)
        if self.threshold - self.t > 1.0:
            raise DomainError("threshold - t must not exceed 1")
        if self.sigma is not None and self.sigma > max(self.sigma_h, 0.0):
            raise DomainError(f"output length {self.sigma} exceeds the min-entropy bound {self.sigma_h:.1f}")

    @property
    def inputs(self) -> InputDistribution:
        return self.tf.inputs

    @cached_property
    def variance(self) -> float:
        return variance_bound(self.tf, self.variant)[0]

    @cached_property
    def t(self) -> float:
        return error_term(self.variance, self.tf.xi_plus, self.n, self.eps_t)

    @property
    def sigma_h(self) -> float:
        return min_entropy_budget(self.n, self.threshold, self.t, self.eps_m)

    @property
    def epsilon(self) -> float:
        return soundness_epsilon(self.eps_t, self.eps_m, self.eps_ext, self.eps_omega).total

    def passes(self, mean_xi: float) -> bool:
        return mean_xi + float(np.dot(self.tf.gamma, self.energies.avg)) >= self.threshold


def default_threshold(tf: TradeoffFunction, expected, energies: EnergyBounds, n: int, eps_t: float, variant: str = LEMMA) -> float:
    """``TF(expected, w_avg) - 2 t``: honest devices pass with high probability."""
    v, xp, _ = variance_bound(tf, variant)
    t = error_term(v, xp, n, eps_t)
    return tf.value(expected, energies.avg) - 2.0 * t


__all__ = [
    "TradeoffFunction",
    "ProtocolConfig",
    "Soundness",
    "make_tradeoff_function",
    "tradeoff_from_certificate",
    "split_alpha",
    "estimator",
    "estimator_values",
    "variance_bound",
    "error_term",
    "surprisal_rate",
    "min_entropy_budget",
    "soundness_epsilon",
    "single_round_moments",
    "default_threshold",
]
