"""Toeplitz-hashing strong extractor and its parameter accounting.

The sigma x n Toeplitz matrix is read from an l = n + sigma - 1 bit seed
along its diagonals::

    T[i, j] = s[sigma - 1 - i + j]

so the first row is ``s[sigma-1], s[sigma], ..., s[n+sigma-2]`` and the first
column, read bottom-to-top, is ``s[0], ..., s[sigma-1]``.  The key is
``K = T a`` over GF(2).  Serialized bit strings are most-significant-bit
first within each byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LengthMismatchError


@dataclass(frozen=True)
class ExtractorParams:
    n: int
    l: int
    sigma_h: float
    sigma: int
    eps_ext: float

    def __post_init__(self):
        if self.sigma < 0 or self.n < 0:
            raise DomainError("lengths must be nonnegative")
        if self.sigma > 0 and self.sigma > self.sigma_h - 2.0 * math.log2(1.0 / self.eps_ext) + 1e-9:
            raise DomainError(
                f"output length {self.sigma} exceeds sigma_h - 2 log2(1/eps) = "
                f"{self.sigma_h - 2.0 * math.log2(1.0 / self.eps_ext):.3f}"
            )
        expected = self.n + self.sigma - 1 if self.sigma > 0 else 0
        if self.l != expected:
            raise DomainError(f"seed length must be {expected} for a {self.sigma}x{self.n} Toeplitz matrix")


def plan(n: int, sigma_h: float, eps_ext: float) -> ExtractorParams:
    """Longest output allowed by the leftover hash lemma: ``floor(sigma_h - 2 log2(1/eps))``.

    A negative min-entropy budget simply yields an empty output.
    """
    if not 0.0 < eps_ext < 1.0:
        raise DomainError("eps_ext must lie in (0, 1)")
    if n < 0:
        raise DomainError("n must be nonnegative")
    sigma = max(0, math.floor(sigma_h - 2.0 * math.log2(1.0 / eps_ext) + 1e-9))
    sigma = min(sigma, n)
    return ExtractorParams(n, n + sigma - 1 if sigma > 0 else 0, sigma_h, sigma, eps_ext)


def toeplitz_matrix(s, sigma: int, n: int) -> np.ndarray:
    """Dense 0/1 matrix ``T[i, j] = s[sigma - 1 - i + j]`` (for tests and small sizes)."""
    s = _bits(s)
    if len(s) != (n + sigma - 1 if sigma > 0 else 0):
        raise LengthMismatchError(f"seed has {len(s)} bits, need {n + sigma - 1}")
    i = np.arange(sigma)[:, None]
    j = np.arange(n)[None, :]
    return s[sigma - 1 - i + j] if sigma > 0 else np.zeros((0, n), dtype=np.uint8)


_DIRECT_LIMIT = 1 << 16


def toeplitz_extract(a, s, p: ExtractorParams) -> np.ndarray:
    """Key bits ``K = T(s) a mod 2`` of length ``p.sigma``.

    ``K[i] = sum_j s[sigma - 1 - i + j] a[j]``, a correlation of ``s`` with
    ``a``.  Large inputs use an FFT; its integer result is checked against
    rounding and recomputed blockwise if the check fails.

    Raises
    ------
    LengthMismatchError
        If ``a`` or ``s`` does not have the lengths in ``p``.
    """
    a = _bits(a)
    s = _bits(s)
    if len(a) != p.n:
        raise LengthMismatchError(f"input has {len(a)} bits, parameters say {p.n}")
    if len(s) != p.l:
        raise LengthMismatchError(f"seed has {len(s)} bits, parameters say {p.l}")
    sigma = p.sigma
    if sigma == 0:
        return np.zeros(0, dtype=np.uint8)
    if p.n * sigma <= _DIRECT_LIMIT:
        return (toeplitz_matrix(s, sigma, p.n).astype(np.int64) @ a.astype(np.int64) % 2).astype(np.uint8)
    corr = _correlate(s, a)  # corr[m] = sum_j s[m + j] a[j], m = 0..sigma-1
    return (corr[sigma - 1 :: -1] % 2).astype(np.uint8)


def _correlate(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    n = len(a)
    m = len(s) - n + 1
    size = 1 << int(np.ceil(np.log2(len(s) + n)))
    fs = np.fft.rfft(s.astype(np.float64), size)
    fa = np.fft.rfft(a[::-1].astype(np.float64), size)
    full = np.fft.irfft(fs * fa, size)
    # full[n - 1 + m] = sum_j s[m + j] a[j]
    vals = full[n - 1 : n - 1 + m]
    out = np.rint(vals)
    if np.max(np.abs(vals - out), initial=0.0) < 0.25:
        return out.astype(np.int64)
    return _correlate_blocked(s, a, m)


def _correlate_blocked(s, a, m, block: int = 4096) -> np.ndarray:
    out = np.zeros(m, dtype=np.int64)
    a = a.astype(np.int64)
    n = len(a)
    for start in range(0, m, block):
        stop = min(m, start + block)
        win = np.lib.stride_tricks.sliding_window_view(s[start : stop + n - 1].astype(np.int64), n)
        out[start:stop] = win @ a
    return out


def _bits(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise DomainError("bit strings must contain only 0 and 1")
    return arr


def to_hex(bits) -> str:
    """MSB-first packing; the last byte is zero-padded on the right."""
    return np.packbits(_bits(bits)).tobytes().hex()


def from_hex(text: str, length: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    bits = np.unpackbits(raw)
    if length > len(bits):
        raise LengthMismatchError(f"hex string holds {len(bits)} bits, asked for {length}")
    return bits[:length]
