import math

import numpy as np
import pytest

from energyqrng import certify, entropy, qset
from energyqrng.certify import ProtocolConfig, TradeoffFunction
from energyqrng.entropy import EntropyProblem, InputDistribution, LinearTarget
from energyqrng.errors import DomainError
from energyqrng.qset import Behaviour, EnergyBounds

UNIFORM = InputDistribution()
FIG3 = EnergyBounds((0.3, 0.3))


def example_tf():
    return TradeoffFunction((0.25, 0.25), (0.5, -0.5), (0.0, 0.0), UNIFORM)


def test_estimator_examples():
    tf = example_tf()
    assert certify.estimator(tf, 1, 1) == pytest.approx(1.5)
    assert certify.estimator(tf, -1, 2) == pytest.approx(1.5)
    assert certify.estimator(tf, -1, 1) == pytest.approx(-0.5)
    with pytest.raises(DomainError):
        certify.estimator(tf, 0, 1)


def test_estimator_vectorized_matches_scalar():
    tf = TradeoffFunction((0.1, -0.3), (0.7, 0.2), (-1.0, -0.5), InputDistribution(0.3, 0.7))
    a = np.array([1, -1, 1, -1])
    x = np.array([1, 1, 2, 2])
    expect = [certify.estimator(tf, int(ai), int(xi)) for ai, xi in zip(a, x)]
    assert certify.estimator_values(tf, a, x) == pytest.approx(expect)


def test_estimator_unbiased_exact():
    tf = TradeoffFunction((0.1, -0.3), (0.7, 0.2), (-1.0, -0.5), InputDistribution(0.3, 0.7))
    e = np.array([0.4, -0.2])
    mean = sum(
        tf.inputs.vector[x] * (1 + a * e[x]) / 2 * certify.estimator(tf, a, x + 1) for x in range(2) for a in (1, -1)
    )
    assert mean == pytest.approx(tf.alpha + float(np.dot(tf.beta, e)))


def test_estimator_unbiased_monte_carlo(rng):
    tf = example_tf()
    e = np.array([0.6, -0.3])
    n = 1_000_000
    x = np.where(rng.random(n) < 0.5, 1, 2)
    a = np.where(rng.random(n) < (1 + e[x - 1]) / 2, 1, -1)
    xi = certify.estimator_values(tf, a, x)
    target = tf.alpha + float(np.dot(tf.beta, e))
    assert abs(xi.mean() - target) <= 4 * xi.std() / math.sqrt(n)


def test_gamma_sign_enforced():
    with pytest.raises(DomainError):
        TradeoffFunction((0, 0), (0, 0), (0.1, 0.0))


def test_variance_zero_tf():
    tf = TradeoffFunction((0, 0), (0, 0), (0, 0))
    v, xp, xm = certify.variance_bound(tf)
    assert xp == xm == 0.0
    assert v == pytest.approx(8 / math.e**2 * certify.LOG2E**2, abs=1e-12)
    assert v == pytest.approx(2.2535, abs=1e-4)


def test_variance_variants_ordering():
    tf = TradeoffFunction((0.2, 0.2), (0.6, -0.6), (-1.0, -1.0))
    lemma = certify.variance_bound(tf, certify.LEMMA)[0]
    theorem = certify.variance_bound(tf, certify.THEOREM)[0]
    both = certify.variance_bound(tf, certify.CONSERVATIVE)[0]
    assert both == pytest.approx(max(lemma, theorem))
    with pytest.raises(DomainError):
        certify.variance_bound(tf, "other")


def test_error_term_examples():
    t = certify.error_term(1.0, 1.0, 10**6, 1e-6)
    assert t == pytest.approx(6.32e-3, abs=5e-5)
    assert certify.error_term(1.0, 1.0, 10**6, 1.0) == 0.0
    ratio = certify.error_term(2.0, 1.0, 4 * 10**8, 1e-6) / certify.error_term(2.0, 1.0, 10**8, 1e-6)
    assert ratio == pytest.approx(0.5, abs=1e-3)


def test_surprisal_rate_examples():
    tf0 = TradeoffFunction((0, 0), (0, 0), (0, 0))
    assert certify.surprisal_rate(0.5, tf0, EnergyBounds((0.1, 0.1)), 0.01) == pytest.approx(0.49)
    tf1 = TradeoffFunction((0, 0), (0, 0), (-1, -1))
    assert certify.surprisal_rate(0.5, tf1, EnergyBounds((0.1, 0.1)), 0.0) == pytest.approx(0.3)


def test_min_entropy_budget_examples():
    assert certify.min_entropy_budget(10**6, 0.2, 0.0063, 1e-6) == pytest.approx(1.9368e5, rel=1e-4)
    assert certify.min_entropy_budget(1000, 0.2, 0.05, 1.0) == pytest.approx(150.0)
    assert certify.min_entropy_budget(1000, 0.1, 0.1, 1e-6) == pytest.approx(-math.log2(1e6))
    with pytest.raises(DomainError):
        certify.min_entropy_budget(10, 1.5, 0.1, 1e-6)


def test_soundness():
    s = certify.soundness_epsilon(1e-6, 1e-6, 1e-6, 1e-6)
    assert s.total == pytest.approx(4e-6)
    s1 = certify.soundness_epsilon(1e-6, 1e-6, 1e-6, 1e-6, kappa=1.0)
    assert s1.conditional == pytest.approx(s1.total)
    s2 = certify.soundness_epsilon(1e-6, 1e-6, 1e-6, 1e-6, kappa=0.5)
    assert s2.conditional - 1e-6 == pytest.approx(2 * (s1.conditional - 1e-6))
    assert certify.soundness_epsilon(1e-6, 1e-6, 1e-6, 0.0).total == pytest.approx(3e-6)
    with pytest.raises(DomainError):
        certify.soundness_epsilon(0.0, 1e-6, 1e-6, 1e-6)


def test_tradeoff_value_matches_entropy():
    # the TF is designed on the behaviour (0.8, -0.8) of the E- = 0.8 family
    b = Behaviour(0.8, -0.8)
    tf = certify.make_tradeoff_function(b, FIG3, UNIFORM, k=16)
    h, _ = entropy.entropy_lower_bound(EntropyProblem(b, FIG3, UNIFORM, 16))
    assert tf.value(b, FIG3.avg) == pytest.approx(h, abs=1e-8)
    assert entropy.verify_certificate(tf.certificate(), entropy.chords(16), FIG3, UNIFORM, samples=50_000)


def test_functional_e_minus_value():
    h_fun, cert = entropy.entropy_lower_bound(EntropyProblem(LinearTarget(0.5, -0.5, 0.8), FIG3, UNIFORM, 16))
    tf = certify.tradeoff_from_certificate(cert, UNIFORM)
    assert tf.value((0.8, -0.8), FIG3.avg) == pytest.approx(h_fun, abs=1e-8)


def test_classical_tf_value_zero():
    b = Behaviour(0.5, -0.5)
    tf = certify.make_tradeoff_function(b, FIG3, UNIFORM, k=8)
    assert tf.value(b, FIG3.avg) == pytest.approx(0.0, abs=1e-6)


def test_optimal_split_reduces_spread():
    b = Behaviour(0.8, -0.6)
    inputs = InputDistribution(0.3, 0.7)
    half = certify.make_tradeoff_function(b, FIG3, inputs, k=8)
    best = certify.make_tradeoff_function(b, FIG3, inputs, k=8, split=certify.SPLIT_OPTIMAL)
    assert best.alpha == pytest.approx(half.alpha)
    assert best.xi_plus - best.xi_minus <= half.xi_plus - half.xi_minus + 1e-12


def test_serialization_round_trip():
    tf = TradeoffFunction((0.1, -0.3), (0.7, 0.2), (-1.0, -0.5), InputDistribution(0.3, 0.7))
    assert TradeoffFunction.from_dict(tf.to_dict()) == tf


def test_single_round_lemmas(rng):
    tf = certify.make_tradeoff_function(Behaviour(0.8, -0.8), FIG3, UNIFORM, k=16)
    v, xp, _ = certify.variance_bound(tf)
    e, w = qset.sample_behaviours(rng, 300, (1.0, 1.0))
    for ei, wi in zip(e, w):
        m1, m2, hi = certify.single_round_moments(tf, ei, wi)
        assert m1 <= 1e-9
        assert m2 <= v
        assert hi <= xp + 1e-12


def test_single_round_identity():
    # E[T] = TF(E, w) - H(E)
    tf = TradeoffFunction((0.1, -0.3), (0.7, 0.2), (-1.0, -0.5), InputDistribution(0.3, 0.7))
    e, w = (0.4, -0.2), (0.2, 0.1)
    m1, _, _ = certify.single_round_moments(tf, e, w)
    h = entropy.conditional_entropy(np.array(e), tf.inputs)
    assert m1 == pytest.approx(tf.value(e, w) - h, abs=1e-12)


def test_protocol_config_invariants():
    tf = example_tf()
    eb = EnergyBounds((0.3, 0.3))
    pc = ProtocolConfig(10**6, eb, tf, 0.2)
    assert pc.t == pytest.approx(certify.error_term(pc.variance, tf.xi_plus, 10**6, 1e-6))
    assert pc.sigma_h == pytest.approx(certify.min_entropy_budget(10**6, 0.2, pc.t, 1e-6))
    assert pc.epsilon == pytest.approx(4e-6)
    with pytest.raises(DomainError):
        ProtocolConfig(10**6, eb, tf, 1.5)
    with pytest.raises(DomainError):
        ProtocolConfig(10**6, eb, tf, 0.2, eps_t=0.0)
    with pytest.raises(DomainError):
        ProtocolConfig(10**6, eb, tf, 0.2, sigma=10**6)


def test_default_threshold():
    b = Behaviour(0.8, -0.8)
    tf = certify.make_tradeoff_function(b, FIG3, UNIFORM, k=8)
    r = certify.default_threshold(tf, b, FIG3, 10**6, 1e-6)
    pc = ProtocolConfig(10**6, FIG3, tf, r)
    assert r == pytest.approx(tf.value(b, FIG3.avg) - 2 * pc.t)
