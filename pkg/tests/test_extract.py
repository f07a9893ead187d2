import itertools

import numpy as np
import pytest

from energyqrng import extract
from energyqrng.errors import DomainError, LengthMismatchError


def test_plan_examples():
    p = extract.plan(1000, 100, 2.0**-20)
    assert p.sigma == 60
    assert p.l == 1000 + 59
    assert extract.plan(1000, 10, 2.0**-20).sigma == 0
    assert extract.plan(1000, 10, 2.0**-20).l == 0
    assert extract.plan(10**6, 100, 2.0**-20).l == 10**6 + 59


def test_plan_negative_budget_and_clamp():
    assert extract.plan(100, -500.0, 1e-6).sigma == 0
    assert extract.plan(10, 1000.0, 0.5).sigma == 10


def test_params_validation():
    with pytest.raises(DomainError):
        extract.ExtractorParams(10, 10 + 5 - 1, 6.0, 5, 0.5)
    with pytest.raises(DomainError):
        extract.ExtractorParams(10, 3, 100.0, 5, 0.5)


def test_small_examples():
    p = extract.ExtractorParams(2, 2, 10.0, 1, 0.5)
    for a in itertools.product((0, 1), repeat=2):
        assert extract.toeplitz_extract(a, [1, 0], p).tolist() == [a[0]]
    p = extract.ExtractorParams(8, 10, 100.0, 3, 0.5)
    assert not extract.toeplitz_extract(np.zeros(8), np.ones(10), p).any()


def test_length_mismatch():
    p = extract.ExtractorParams(8, 10, 100.0, 3, 0.5)
    with pytest.raises(LengthMismatchError):
        extract.toeplitz_extract(np.zeros(7), np.zeros(10), p)
    with pytest.raises(LengthMismatchError):
        extract.toeplitz_extract(np.zeros(8), np.zeros(9), p)


def _oracle(a, s, sigma, n):
    t = [[s[sigma - 1 - i + j] for j in range(n)] for i in range(sigma)]
    return [sum(t[i][j] * a[j] for j in range(n)) % 2 for i in range(sigma)]


def test_exhaustive_oracle(rng):
    n, sigma = 8, 3
    p = extract.ExtractorParams(n, n + sigma - 1, 100.0, sigma, 0.5)
    for _ in range(10):
        s = rng.integers(0, 2, n + sigma - 1)
        for a in itertools.product((0, 1), repeat=n):
            assert extract.toeplitz_extract(a, s, p).tolist() == _oracle(a, s, sigma, n)


def test_toeplitz_structure(rng):
    s = rng.integers(0, 2, 12)
    t = extract.toeplitz_matrix(s, 4, 9)
    assert t.shape == (4, 9)
    for i in range(1, 4):
        assert np.array_equal(t[i, 1:], t[i - 1, :-1])
    assert t[0].tolist() == s[3:].tolist()


def test_linearity(rng):
    n, sigma = 200, 40
    p = extract.ExtractorParams(n, n + sigma - 1, 1000.0, sigma, 0.5)
    s = rng.integers(0, 2, p.l)
    for _ in range(20):
        a, b = rng.integers(0, 2, (2, n))
        lhs = extract.toeplitz_extract(a ^ b, s, p)
        rhs = extract.toeplitz_extract(a, s, p) ^ extract.toeplitz_extract(b, s, p)
        assert np.array_equal(lhs, rhs)


@pytest.mark.parametrize("n, sigma", [(6, 3), (10, 2), (5, 4)])
def test_collision_rate_exact(n, sigma, rng):
    p = extract.ExtractorParams(n, n + sigma - 1, 100.0, sigma, 0.5)
    seeds = list(itertools.product((0, 1), repeat=p.l))
    for _ in range(3):
        a, b = rng.integers(0, 2, (2, n))
        if np.array_equal(a, b):
            b[0] ^= 1
        hits = sum(np.array_equal(extract.toeplitz_extract(a, s, p), extract.toeplitz_extract(b, s, p)) for s in seeds)
        assert hits * 2**sigma == len(seeds)


def test_fft_path_matches_direct(rng):
    n, sigma = 5000, 300
    p = extract.ExtractorParams(n, n + sigma - 1, 10**4, sigma, 0.5)
    a = rng.integers(0, 2, n)
    s = rng.integers(0, 2, p.l)
    direct = extract.toeplitz_matrix(s, sigma, n).astype(np.int64) @ a % 2
    assert np.array_equal(extract.toeplitz_extract(a, s, p), direct)
    blocked = extract._correlate_blocked(s.astype(np.uint8), a.astype(np.uint8), sigma)
    assert np.array_equal(blocked[::-1] % 2, direct)


def test_hex_round_trip(rng):
    bits = rng.integers(0, 2, 37).astype(np.uint8)
    text = extract.to_hex(bits)
    assert len(text) == 10
    assert np.array_equal(extract.from_hex(text, 37), bits)
    assert extract.to_hex([1, 0, 0, 0, 0, 0, 0, 0]) == "80"
    with pytest.raises(LengthMismatchError):
        extract.from_hex("ff", 9)
