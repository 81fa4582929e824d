"""Negacyclic number-theoretic transform, one table set per prime.

Iterative Cooley-Tukey forward / Gentleman-Sande inverse over
Z_q[X]/(X^N + 1) with the 2N-th root powers stored in bit-reversed
order.  Butterflies run as whole-level numpy operations; every twiddle
carries its Shoup companion so no product leaves 64 bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modmath import (U64, bit_reverse, mulmod_shoup, primitive_root_2n,
                      shoup)


@dataclass(frozen=True)
class PrimeNtt:
    """Precomputed transform tables for a single (ring_dim, q) pair."""

    q: int
    ring_dim: int
    q_u64: np.uint64
    w: np.ndarray        # 2N-th root powers, bit-reversed exponent order
    w_sh: np.ndarray
    n_inv: np.uint64
    n_inv_sh: np.uint64


def make_prime_ntt(ring_dim: int, q: int) -> PrimeNtt:
    logn = ring_dim.bit_length() - 1
    h = primitive_root_2n(ring_dim, q)
    w = np.empty(ring_dim, dtype=U64)
    w_sh = np.empty(ring_dim, dtype=U64)
    for i in range(ring_dim):
        wi = pow(h, bit_reverse(i, logn), q)
        w[i] = wi
        w_sh[i] = shoup(wi, q)
    n_inv = pow(ring_dim, -1, q)
    return PrimeNtt(q, ring_dim, U64(q), w, w_sh, U64(n_inv),
                    U64(shoup(n_inv, q)))


def ntt_forward(values: np.ndarray, tab: PrimeNtt) -> np.ndarray:
    """Coefficient order in, bit-reversed evaluation order out."""
    q = tab.q_u64
    a = values.copy()
    half = tab.ring_dim // 2
    blocks = 1
    while half >= 1:
        view = a.reshape(blocks, 2 * half)
        lo = view[:, :half]
        hi = view[:, half:]
        z = tab.w[blocks:2 * blocks, None]
        z_sh = tab.w_sh[blocks:2 * blocks, None]
        y = mulmod_shoup(hi, z, z_sh, q)
        view[:, half:] = np.where(lo >= y, lo - y, lo + q - y)
        view[:, :half] = np.where(lo + y >= q, lo + y - q, lo + y)
        half //= 2
        blocks *= 2
    return a


def ntt_inverse(values: np.ndarray, tab: PrimeNtt) -> np.ndarray:
    """Inverse of ntt_forward, including the 1/N factor."""
    q = tab.q_u64
    a = values.copy()
    half = 1
    blocks = tab.ring_dim // 2
    while blocks >= 1:
        view = a.reshape(blocks, 2 * half)
        lo = view[:, :half].copy()
        hi = view[:, half:]
        # matching twiddles run top-down within the level: w[2B-1-b]
        z = tab.w[blocks:2 * blocks][::-1, None]
        z_sh = tab.w_sh[blocks:2 * blocks][::-1, None]
        s = lo + hi
        view[:, :half] = np.where(s >= q, s - q, s)
        d = np.where(hi >= lo, hi - lo, hi + q - lo)
        view[:, half:] = mulmod_shoup(d, z, z_sh, q)
        half *= 2
        blocks //= 2
    return mulmod_shoup(a, tab.n_inv, tab.n_inv_sh, q)
