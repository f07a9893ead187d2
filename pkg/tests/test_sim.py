import math

import numpy as np
import pytest
import scipy.stats

from energyqrng import certify, sim
from energyqrng.certify import ProtocolConfig, TradeoffFunction
from energyqrng.entropy import InputDistribution
from energyqrng.errors import DeviceInvariantError
from energyqrng.qset import Behaviour, EnergyBounds, in_quantum_set_closed_form


def test_bpsk_examples():
    b, n = sim.bpsk_behaviour(0.0, 0.9)
    assert b.vector == pytest.approx([0, 0]) and n == 0.0
    b, _ = sim.bpsk_behaviour(2.0, 0.0)
    assert b.vector == pytest.approx([0, 0])
    b, n = sim.bpsk_behaviour(0.5, 1.0)
    # erf(0.5) to 1e-12
    assert b.e1 == pytest.approx(0.5204998778130465, abs=1e-12)
    assert b.e2 == pytest.approx(-0.5204998778130465, abs=1e-12)
    assert n == pytest.approx(0.125)


def test_ook_examples():
    b, eb = sim.ook_behaviour(0.0, 1.0)
    assert b.vector == pytest.approx([-1, -1])
    assert eb.pk == (0.0, 0.0)
    b, eb = sim.ook_behaviour(math.sqrt(0.2), 1.0)
    assert b.e2 == pytest.approx(1 - 2 * math.exp(-0.1), abs=1e-12)
    assert b.e2 == pytest.approx(-0.8097, abs=1e-4)


def test_ook_in_q(rng):
    for xi, eta in zip(rng.uniform(0, math.sqrt(2), 200), rng.uniform(0, 1, 200)):
        b, eb = sim.ook_behaviour(xi, eta)
        assert in_quantum_set_closed_form(b, eb.pk)


def _bpsk_setup(n=10**5, xi=0.5, eta=1.0, delta=0.01, k=16, eps_t=1e-6, eps_omega=1e-6):
    dev = sim.Bpsk(xi, eta, delta)
    eb = dev.energy_bounds()
    inputs = InputDistribution()
    tf = certify.make_tradeoff_function(dev.expected, eb, inputs, k=k, energy_weights=(0.5, 0.5))
    r = certify.default_threshold(tf, dev.expected, eb, n, eps_t)
    return dev, ProtocolConfig(n, eb, tf, r, eps_t=eps_t, eps_omega=eps_omega)


@pytest.fixture(scope="module")
def bpsk():
    return _bpsk_setup()


def test_run_deterministic(bpsk):
    dev, cfg = bpsk
    a = sim.run_protocol(dev, cfg, 11)
    b = sim.run_protocol(dev, cfg, 11)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.a, b.a)
    assert a.mean_xi == b.mean_xi
    c = sim.run_protocol(dev, cfg, 12)
    assert not np.array_equal(a.a, c.a)


def test_transcript_consistency(bpsk):
    dev, cfg = bpsk
    tr = sim.run_protocol(dev, cfg, 5)
    recomputed = math.fsum(certify.estimator(cfg.tf, int(a), int(x)) for a, x in zip(tr.a, tr.x)) / tr.n
    assert tr.mean_xi == recomputed
    assert tr.passed == (tr.mean_xi + float(np.dot(cfg.tf.gamma, cfg.energies.avg)) >= cfg.threshold)
    assert (tr.key is not None) == tr.passed


def test_honest_bpsk_passes(bpsk):
    dev, cfg = bpsk
    passes = sum(sim.run_protocol(dev, cfg, s).passed for s in range(20))
    assert passes >= 19


def test_deterministic_device_aborts():
    dev, cfg = _bpsk_setup(n=10**6)
    det = sim.IidEnsemble((1.0,), ((1.0, 1.0),), ((0.0, 0.0),))
    tr = sim.run_protocol(det, cfg, 0)
    assert not tr.passed
    assert tr.key is None


def test_input_sampling_chi_square(rng):
    inputs = InputDistribution(0.3, 0.7)
    x = sim.sample_inputs(rng, 10**6, inputs)
    counts = np.bincount(x, minlength=3)[1:]
    p = scipy.stats.chisquare(counts, 10**6 * inputs.vector).pvalue
    assert p > 1e-6


def test_ensemble_invariants():
    with pytest.raises(DeviceInvariantError):
        sim.IidEnsemble((1.0,), ((1.0, -1.0),), ((0.0, 0.0),))
    with pytest.raises(DeviceInvariantError):
        sim.IidEnsemble((1.0,), ((1.0, -1.0),), ((0.5, 0.5),), compliant_with=EnergyBounds((0.3, 0.3)))


def test_energy_ledger_within_average():
    eb = EnergyBounds((0.3, 0.3))
    dev = sim.IidEnsemble(
        (0.3, 0.3, 0.2, 0.2),
        ((1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, -1.0)),
        ((0.0, 1.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)),
        compliant_with=eb,
    )
    assert dev.mean_energy() == pytest.approx([0.3, 0.3])
    tf = TradeoffFunction((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    cfg = ProtocolConfig(2000, eb, tf, -1.0)
    tr = sim.run_protocol(dev, cfg, 1)
    assert tr.energies.shape == (2000, 2)
    assert np.all(tr.energies <= 1.0)


def test_adaptive_device_and_invariant():
    eb = EnergyBounds((0.3, 0.3), (0.3, 0.3))
    tf = TradeoffFunction((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    cfg = ProtocolConfig(200, eb, tf, -1.0)

    def honest(a_hist, x_hist, lam):
        # alternate between two members of Q depending on the last outcome
        if len(a_hist) and a_hist[-1] > 0:
            return (0.5, -0.5), (0.3, 0.3)
        return (0.2, 0.2), (0.1, 0.1)

    tr = sim.run_protocol(sim.Adaptive(honest), cfg, 3)
    assert tr.n == 200

    def cheat(a_hist, x_hist, lam):
        return (1.0, -1.0), (0.3, 0.3)

    with pytest.raises(DeviceInvariantError):
        sim.run_protocol(sim.Adaptive(cheat), cfg, 3)


def test_monte_carlo_zero_tf_never_violated():
    eb = EnergyBounds((0.3, 0.3))
    tf = TradeoffFunction((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    cfg = ProtocolConfig(1000, eb, tf, -1.0, eps_t=0.01, eps_omega=0.0)
    dev = sim.IidEnsemble((1.0,), ((0.5, -0.5),), ((0.3, 0.3),))
    res = sim.monte_carlo_theorem3(dev, cfg, 500)
    assert res.violations == 0


def test_monte_carlo_honest_small():
    dev, cfg = _bpsk_setup(n=10**4, eps_t=0.01, eps_omega=0.0)
    res = sim.monte_carlo_theorem3(dev, cfg, 2000, seed=1)
    assert res.frequency <= res.allowance(0.01)


def test_monte_carlo_adversarial_ensemble():
    # hidden variables saturating the average energy with extremal behaviours
    dev, cfg = _bpsk_setup(n=10**4, eps_t=0.01, eps_omega=0.0)
    w = cfg.energies.avg[0]
    adv = sim.IidEnsemble(
        (0.5, 0.5),
        ((0.86, -0.86), (0.0, 0.0)),
        ((0.25, 0.25), (2 * w - 0.25, 2 * w - 0.25)),
    )
    res = sim.monte_carlo_theorem3(adv, cfg, 2000, seed=2)
    assert res.frequency <= res.allowance(0.01)


def test_monte_carlo_adaptive_path():
    eb = EnergyBounds((0.3, 0.3), (0.3, 0.3))
    tf = TradeoffFunction((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    cfg = ProtocolConfig(50, eb, tf, -1.0, eps_t=0.01, eps_omega=0.0)
    dev = sim.Adaptive(lambda a, x, lam: ((0.5, -0.5), (0.3, 0.3)))
    res = sim.monte_carlo_theorem3(dev, cfg, 20)
    assert res.trials == 20 and res.violations == 0
