"""Simulated devices and end-to-end runs of the spot-checking protocol.

Devices expose their true per-round behaviours and energies; only the
simulation uses them (for the energy ledger, the invariant checks and the
Monte Carlo surprisal).  The certification itself sees inputs and outputs
only.

Randomness: one ``numpy.random.SeedSequence`` per run, spawned into
independent streams for the inputs, the device and the extractor seed, so a
run is reproducible from ``(device, config, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.special

from . import extract
from .certify import ProtocolConfig, TradeoffFunction, estimator_values
from .entropy import InputDistribution
from .errors import DeviceInvariantError, DomainError
from .qset import Behaviour, EnergyBounds, _as_behaviour, in_quantum_set_closed_form

IID_ENSEMBLE = "iid-ensemble"
BPSK = "bpsk"
OOK = "ook"
ADAPTIVE = "adaptive"

_ENERGY_SLACK = 1e-12


def bpsk_behaviour(xi: float, eta: float) -> tuple[Behaviour, float]:
    """Correlators ``(erf(eta xi), -erf(eta xi))`` and mean photon number ``xi^2 / 2``."""
    if xi < 0 or not 0.0 <= eta <= 1.0:
        raise DomainError("need xi >= 0 and eta in [0, 1]")
    e = float(scipy.special.erf(eta * xi))
    return Behaviour(e, -e), xi * xi / 2.0


def ook_behaviour(xi: float, eta: float) -> tuple[Behaviour, EnergyBounds]:
    """Correlators ``(-1, 1 - 2 exp(-eta xi^2 / 2))`` and peak energies ``(0, xi^2 / 2)``.

    The peak energy is capped at 1, the largest meaningful value.
    """
    if xi < 0 or not 0.0 <= eta <= 1.0:
        raise DomainError("need xi >= 0 and eta in [0, 1]")
    e2 = 1.0 - 2.0 * math.exp(-eta * xi * xi / 2.0)
    pk = (0.0, min(1.0, xi * xi / 2.0))
    return Behaviour(-1.0, e2), EnergyBounds(pk, pk)


class DeviceModel:
    """Base class; subclasses set ``kind``."""

    kind: str = ""

    @property
    def iid(self) -> bool:
        return True


@dataclass(frozen=True)
class IidEnsemble(DeviceModel):
    """Each round draws ``lambda`` with probability ``weights[lambda]`` independently.

    ``compliant_with`` optionally declares energy bounds that every ``omega^lambda``
    meets at peak and the ensemble meets on average; checked on construction.
    """

    weights: tuple[float, ...]
    behaviours: tuple[tuple[float, float], ...]
    energies: tuple[tuple[float, float], ...]
    compliant_with: EnergyBounds | None = None
    kind: str = field(default=IID_ENSEMBLE, init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        e = np.asarray(self.behaviours, dtype=float).reshape(-1, 2)
        om = np.asarray(self.energies, dtype=float).reshape(-1, 2)
        if not (len(w) == len(e) == len(om)) or len(w) == 0:
            raise DomainError("weights, behaviours and energies must have equal nonzero length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be a probability vector")
        if np.any(np.abs(e) > 1.0) or np.any(om < 0) or np.any(om > 1.0):
            raise DomainError("correlators must lie in [-1, 1] and energies in [0, 1]")
        for b, o in zip(e, om):
            if not in_quantum_set_closed_form(Behaviour(*b), tuple(o)):
                raise DeviceInvariantError(f"hidden-variable behaviour {tuple(b)} is not in Q at energies {tuple(o)}")
        if self.compliant_with is not None:
            bounds = self.compliant_with
            if np.any(om > np.asarray(bounds.pk) + _ENERGY_SLACK):
                raise DeviceInvariantError("an energy exceeds the declared peak bound")
            if np.any(w @ om > np.asarray(bounds.avg) + _ENERGY_SLACK):
                raise DeviceInvariantError("mean energy exceeds the declared average bound")
        object.__setattr__(self, "_w", w / w.sum())
        object.__setattr__(self, "_e", e)
        object.__setattr__(self, "_om", om)

    @property
    def table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._w, self._e, self._om

    def mean_behaviour(self) -> Behaviour:
        return Behaviour(*(self._w @ self._e))

    def mean_energy(self) -> np.ndarray:
        return self._w @ self._om


def _single(b: Behaviour, w) -> IidEnsemble:
    return IidEnsemble((1.0,), (tuple(b.vector),), (tuple(w),))


@dataclass(frozen=True)
class Bpsk(DeviceModel):
    """Honest binary phase-shift keying with homodyne detection.

    Every round prepares ``|+-xi>`` (energy ``xi^2 / 2`` for both inputs); the
    protocol's average-energy threshold is ``(1 + delta) xi^2 / 2`` on the
    input-averaged energy, with no peak bound.
    """

    xi: float
    eta: float
    delta: float = 0.0
    kind: str = field(default=BPSK, init=False)

    def __post_init__(self):
        if self.delta < 0:
            raise DomainError("energy margin delta must be nonnegative")
        bpsk_behaviour(self.xi, self.eta)

    @property
    def expected(self) -> Behaviour:
        return bpsk_behaviour(self.xi, self.eta)[0]

    @property
    def round_energy(self) -> tuple[float, float]:
        w = min(1.0, self.xi**2 / 2.0)
        return (w, w)

    def energy_bounds(self) -> EnergyBounds:
        w = min(1.0, (1.0 + self.delta) * self.xi**2 / 2.0)
        return EnergyBounds((w, w), (1.0, 1.0))

    def ensemble(self) -> IidEnsemble:
        return _single(self.expected, self.round_energy)


@dataclass(frozen=True)
class Ook(DeviceModel):
    """Honest on-off keying: vacuum for input 1, ``|xi>`` and a click detector for input 2."""

    xi: float
    eta: float
    kind: str = field(default=OOK, init=False)

    def __post_init__(self):
        ook_behaviour(self.xi, self.eta)

    @property
    def expected(self) -> Behaviour:
        return ook_behaviour(self.xi, self.eta)[0]

    def energy_bounds(self) -> EnergyBounds:
        return ook_behaviour(self.xi, self.eta)[1]

    def ensemble(self) -> IidEnsemble:
        return _single(self.expected, self.energy_bounds().pk)


AdaptiveRule = Callable[[Sequence[int], Sequence[int], int], tuple]


@dataclass(frozen=True)
class Adaptive(DeviceModel):
    """History-dependent adversary.

    ``rule(a_history, x_history, lam)`` returns ``(behaviour, energies)`` for the
    next round; it must be deterministic.  Randomized strategies are written
    by folding the randomness into ``lam``.
    """

    rule: AdaptiveRule
    lam: int = 0
    kind: str = field(default=ADAPTIVE, init=False)

    @property
    def iid(self) -> bool:
        return False


def as_ensemble(dev: DeviceModel) -> IidEnsemble:
    if isinstance(dev, IidEnsemble):
        return dev
    if isinstance(dev, (Bpsk, Ook)):
        return dev.ensemble()
    raise DomainError(f"{dev.kind} devices are not i.i.d.")


@dataclass
class ProtocolTranscript:
    """Everything a run produced.  ``x`` holds 1/2, ``a`` holds +-1."""

    x: np.ndarray
    a: np.ndarray
    mean_xi: float
    energies: np.ndarray
    decision: str
    key: np.ndarray | None
    seed: int
    extractor: extract.ExtractorParams | None = None
    extractor_seed: np.ndarray | None = None
    threshold: float = float("nan")
    t: float = float("nan")
    sigma_h: float = float("nan")

    @property
    def passed(self) -> bool:
        return self.decision == "pass"

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def output_bits(self) -> np.ndarray:
        """Raw outputs as bits, ``a = +1`` mapping to 1."""
        return (self.a > 0).astype(np.uint8)

    def certified_rate(self, tf: TradeoffFunction, energies: EnergyBounds) -> float:
        return self.mean_xi + float(np.dot(tf.gamma, energies.avg)) - self.t


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def sample_inputs(rng: np.random.Generator, n: int, inputs: InputDistribution) -> np.ndarray:
    return np.where(rng.random(n) < inputs.p1, 1, 2).astype(np.int8)


def _check_energies(om: np.ndarray, bounds: EnergyBounds):
    if np.any(om > np.asarray(bounds.pk) + _ENERGY_SLACK):
        raise DeviceInvariantError(f"round energies {om.max(axis=0)} exceed the peak bound {bounds.pk}")


def _simulate_iid(dev: IidEnsemble, x: np.ndarray, rng: np.random.Generator):
    w, e, om = dev.table
    lam = rng.choice(len(w), size=len(x), p=w) if len(w) > 1 else np.zeros(len(x), dtype=np.intp)
    ex = e[lam, x - 1]
    a = np.where(rng.random(len(x)) < (1.0 + ex) / 2.0, 1, -1).astype(np.int8)
    return a, om[lam], lam


def _simulate_adaptive(dev: Adaptive, x: np.ndarray, rng: np.random.Generator, bounds: EnergyBounds):
    n = len(x)
    a = np.zeros(n, dtype=np.int8)
    om = np.zeros((n, 2))
    probs = np.zeros(n)
    u = rng.random(n)
    for i in range(n):
        b, w = dev.rule(a[:i], x[:i], dev.lam)
        b = _as_behaviour(b)
        w = np.asarray(w, dtype=float)
        if np.any(w > np.asarray(bounds.pk) + _ENERGY_SLACK) or not in_quantum_set_closed_form(b, tuple(w)):
            raise DeviceInvariantError(f"round {i}: behaviour {b} with energies {tuple(w)} is outside Q at the peak bound")
        p_plus = (1.0 + b.vector[x[i] - 1]) / 2.0
        a[i] = 1 if u[i] < p_plus else -1
        probs[i] = p_plus if a[i] == 1 else 1.0 - p_plus
        om[i] = w
    return a, om, probs


def run_protocol(dev: DeviceModel, cfg: ProtocolConfig, seed: int) -> ProtocolTranscript:
    """Simulate ``cfg.n`` rounds, test the threshold and extract on a pass.

    The key length is ``cfg.sigma`` if set, otherwise the longest allowed by
    :func:`energyqrng.extract.plan` for the configured min-entropy budget.

    Raises
    ------
    DeviceInvariantError
        If a round's behaviour leaves Q at the peak energies.
    """
    n = cfg.n
    rx, rdev, rseed = _streams(seed, 3)
    x = sample_inputs(rx, n, cfg.inputs)
    if dev.iid:
        ens = as_ensemble(dev)
        _check_energies(ens.table[2], cfg.energies)
        a, om, _ = _simulate_iid(ens, x, rdev)
    else:
        a, om, _ = _simulate_adaptive(dev, x, rdev, cfg.energies)
    mean_xi = math.fsum(estimator_values(cfg.tf, a, x)) / n
    passed = cfg.passes(mean_xi)
    tr = ProtocolTranscript(
        x=x, a=a, mean_xi=mean_xi, energies=om, decision="pass" if passed else "abort", key=None,
        seed=int(seed), threshold=cfg.threshold, t=cfg.t, sigma_h=cfg.sigma_h,
    )
    if passed:
        if cfg.sigma is None:
            params = extract.plan(n, cfg.sigma_h, cfg.eps_ext)
        else:
            params = extract.ExtractorParams(n, n + cfg.sigma - 1 if cfg.sigma else 0, cfg.sigma_h, cfg.sigma, cfg.eps_ext)
        s = rseed.integers(0, 2, params.l, dtype=np.uint8)
        tr.key = extract.toeplitz_extract(tr.output_bits, s, params)
        tr.extractor = params
        tr.extractor_seed = s
    return tr


@dataclass(frozen=True)
class MonteCarloResult:
    trials: int
    violations: int
    energy_violations: int

    @property
    def frequency(self) -> float:
        return self.violations / self.trials

    def allowance(self, eps: float, sigmas: float = 3.0) -> float:
        """``eps`` plus ``sigmas`` binomial standard errors."""
        return eps + sigmas * math.sqrt(eps * (1.0 - eps) / self.trials)


def monte_carlo_theorem3(dev: DeviceModel, cfg: ProtocolConfig, trials: int, seed: int = 0) -> MonteCarloResult:
    """Frequency with which the true surprisal falls below ``<xi> + gamma.w_avg - t``.

    The surprisal ``-(1/n) log2 mu(a^n | x^n, lambda)`` uses the device's
    actual per-round probabilities given the hidden variables.  For i.i.d.
    devices each trial is summarized by the multinomial counts of
    ``(lambda, x, a)``, which is exact and fast; adaptive devices are run
    round by round.  Trials whose realized mean energy exceeds the average
    bound are counted separately (``energy_violations``).
    """
    n = cfg.n
    tf = cfg.tf
    shift = float(np.dot(tf.gamma, cfg.energies.avg))
    avg = np.asarray(cfg.energies.avg)
    bad = bad_energy = 0
    if dev.iid:
        ens = as_ensemble(dev)
        _check_energies(ens.table[2], cfg.energies)
        w, e, om = ens.table
        p = cfg.inputs.vector
        # cell order: (lambda, x, outcome +1 / -1)
        pa = np.stack([(1.0 + e) / 2.0, (1.0 - e) / 2.0], axis=-1)
        cell = w[:, None, None] * p[None, :, None] * pa
        with np.errstate(divide="ignore"):
            logp = np.where(pa > 0.0, np.log2(np.where(pa > 0.0, pa, 1.0)), 0.0)
        xi = np.broadcast_to(tf.xi_table[None], pa.shape)
        rng = _streams(seed, 1)[0]
        counts = rng.multinomial(n, cell.ravel(), size=trials).reshape(trials, *cell.shape)
        surprisal = -np.einsum("tlxa,lxa->t", counts, logp) / n
        mean_xi = np.einsum("tlxa,lxa->t", counts, xi) / n
        energy = np.einsum("tl,lk->tk", counts.sum(axis=(2, 3)), om) / n
        bad = int(np.sum(surprisal < mean_xi + shift - cfg.t))
        bad_energy = int(np.sum(np.any(energy > avg + _ENERGY_SLACK, axis=1)))
    else:
        streams = np.random.SeedSequence(seed).spawn(trials)
        for ss in streams:
            rx, rdev = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(2))
            x = sample_inputs(rx, n, cfg.inputs)
            a, om, probs = _simulate_adaptive(dev, x, rdev, cfg.energies)
            surprisal = -float(np.sum(np.log2(probs))) / n
            mean_xi = math.fsum(estimator_values(tf, a, x)) / n
            bad += surprisal < mean_xi + shift - cfg.t
            bad_energy += bool(np.any(om.mean(axis=0) > avg + _ENERGY_SLACK))
    return MonteCarloResult(trials, int(bad), int(bad_energy))
