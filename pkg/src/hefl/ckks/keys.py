"""RLWE key material: ternary secret, noisy public-key pair.

Key generation is a pure function of (params, seed); the same seed
reproduces bit-identical keys.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context import NTT, CkksContext, RnsPoly
from .modmath import U64

# stream tags keep the keygen / encryption RNG draws disjoint per seed
KEYGEN_STREAM = 0x6B6579
ENCRYPT_STREAM = 0x656E63


def shoup_rows(rows: np.ndarray, chain: tuple[int, ...]) -> np.ndarray:
    """Shoup companion words for a (levels, N) residue matrix."""
    out = np.empty_like(rows)
    for i, q in enumerate(chain[:rows.shape[0]]):
        out[i] = ((rows[i].astype(object) << 64) // q).astype(U64)
    return out


@dataclass
class SecretKey:
    """Ternary secret with its NTT image and Shoup words for decryption."""

    s_ternary: np.ndarray          # int64 coefficients in {-1, 0, 1}
    s_ntt: np.ndarray              # uint64, (level_count, ring_dim)
    s_sh: np.ndarray


@dataclass
class PublicKey:
    """(b, a) with b = -a*s + e, both stored in the NTT domain."""

    b_ntt: np.ndarray
    b_sh: np.ndarray
    a_ntt: np.ndarray
    a_sh: np.ndarray


def keygen(ctx: CkksContext, seed: int) -> tuple[SecretKey, PublicKey]:
    params = ctx.params
    rng = np.random.default_rng(np.random.SeedSequence((KEYGEN_STREAM, seed)))
    top = params.top_level

    s = ctx.sample_ternary(rng)
    e = ctx.sample_gaussian(rng)
    a = ctx.sample_uniform_ntt(rng, top)

    s_ntt = ctx.to_ntt(ctx.lift_signed(s, top)).residues
    s_sh = shoup_rows(s_ntt, params.modulus_chain)

    a_s = ctx.mul_fixed(a, s_ntt, s_sh)
    e_ntt = ctx.to_ntt(ctx.lift_signed(e, top))
    b = ctx.add(ctx.negate(a_s), e_ntt)

    pk = PublicKey(b.residues, shoup_rows(b.residues, params.modulus_chain),
                   a.residues, shoup_rows(a.residues, params.modulus_chain))
    return SecretKey(s, s_ntt, s_sh), pk


def secret_poly(sk: SecretKey) -> RnsPoly:
    return RnsPoly(sk.s_ntt, NTT)
