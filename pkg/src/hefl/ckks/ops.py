"""Leveled homomorphic operations: encrypt, add, scalar multiply, rescale.

Ciphertext polynomials live in the NTT domain so additions and the
supported products are pointwise.  Levels index the modulus chain;
the base prime (index 0) is reserved decryption headroom, so rescaling
stops once only the base and one more prime remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DecryptionIntegrityError, DepthExhaustedError, UsageError
from .context import COEFF, NTT, SIGMA, CkksContext, RnsPoly
from .encoding import Plaintext, encode_scalar_residues
from .keys import ENCRYPT_STREAM, PublicKey, SecretKey
from .modmath import U64, mulmod_shoup
from .ntt import ntt_forward, ntt_inverse


@dataclass
class Ciphertext:
    """RLWE pair (c0, c1) with scale/level bookkeeping.

    noise_bits tracks log2 of the estimated worst-case noise coefficient
    and value_bits bounds log2 of the largest slot magnitude; together
    they feed the headroom diagnostic and the decrypt integrity check.
    """

    c0: RnsPoly
    c1: RnsPoly
    level: int
    scale: float
    noise_bits: float
    value_bits: float

    @property
    def slot_count(self) -> int:
        return self.c0.residues.shape[1] // 2


def _fresh_noise_bits(ring_dim: int) -> float:
    # e0 + v*e_pk + e1*s, ternary weights: variance sigma^2 * (1 + 4N/3)
    return math.log2(6 * SIGMA * math.sqrt(1 + 4 * ring_dim / 3))


def _rescale_added_bits(ring_dim: int) -> float:
    # rounding residue r0 + r1*s with |r| <= 1/2 per coefficient
    return math.log2(3 * math.sqrt(1 + 2 * ring_dim / 3))


def noise_budget_estimate(ct: Ciphertext, ctx: CkksContext) -> float:
    """Bits of headroom left between message-plus-noise and Q/2.

    Diagnostic: the message term uses the tracked slot-magnitude bound
    (coefficients of the canonical embedding stay within the slot peak),
    and is non-increasing along the supported homomorphic pipeline.
    """
    q_bits = math.log2(ctx.level_modulus[ct.level]) - 1
    occupied = np.logaddexp2(math.log2(ct.scale) + max(ct.value_bits, 0.0),
                             ct.noise_bits)
    return float(q_bits - occupied)


def encrypt(pt: Plaintext, pk: PublicKey, ctx: CkksContext,
            seed: int | tuple[int, ...]) -> Ciphertext:
    params = ctx.params
    if pt.level != params.top_level:
        raise UsageError("fresh encryptions start at the top of the chain")
    if pt.poly.domain != COEFF:
        raise UsageError("plaintext polynomial must be in coefficient form")
    entropy = seed if isinstance(seed, tuple) else (seed,)
    rng = np.random.default_rng(
        np.random.SeedSequence((ENCRYPT_STREAM, *entropy)))
    top = params.top_level

    v = ctx.to_ntt(ctx.lift_signed(ctx.sample_ternary(rng), top))
    e0 = ctx.to_ntt(ctx.lift_signed(ctx.sample_gaussian(rng), top))
    e1 = ctx.to_ntt(ctx.lift_signed(ctx.sample_gaussian(rng), top))
    m = ctx.to_ntt(pt.poly)

    rows = slice(0, top + 1)
    c0 = ctx.add(ctx.add(ctx.mul_fixed(v, pk.b_ntt[rows], pk.b_sh[rows]), e0), m)
    c1 = ctx.add(ctx.mul_fixed(v, pk.a_ntt[rows], pk.a_sh[rows]), e1)
    return Ciphertext(c0, c1, top, pt.scale,
                      _fresh_noise_bits(params.ring_dim), pt.value_bits)


def decrypt(ct: Ciphertext, sk: SecretKey, ctx: CkksContext) -> Plaintext:
    if noise_budget_estimate(ct, ctx) <= 0:
        raise DecryptionIntegrityError(
            "estimated noise reaches the modulus; refusing to decode")
    rows = slice(0, ct.level + 1)
    c1_s = ctx.mul_fixed(ct.c1, sk.s_ntt[rows], sk.s_sh[rows])
    raw = ctx.to_coeff(ctx.add(ct.c0, c1_s))
    return Plaintext(raw, ct.scale, ct.level, ct.slot_count, ct.value_bits)


def he_add(a: Ciphertext, b: Ciphertext, ctx: CkksContext) -> Ciphertext:
    if a.level != b.level:
        raise UsageError(f"level mismatch: {a.level} vs {b.level}")
    if a.scale != b.scale:
        raise UsageError(f"scale mismatch: {a.scale} vs {b.scale}")
    noise = float(np.logaddexp2(a.noise_bits, b.noise_bits))
    value = float(np.logaddexp2(a.value_bits, b.value_bits))
    return Ciphertext(ctx.add(a.c0, b.c0), ctx.add(a.c1, b.c1),
                      a.level, a.scale, noise, value)


def he_mul_scalar(ct: Ciphertext, scalar: float, ctx: CkksContext) -> Ciphertext:
    if not math.isfinite(scalar):
        raise UsageError("scalar must be finite")
    if ct.level < 1:
        raise DepthExhaustedError(
            "no level remaining for a plaintext product")
    res, sh, magnitude = encode_scalar_residues(scalar, ctx, ct.level)
    c0 = ctx.mul_scalar_residues(ct.c0, res, sh)
    c1 = ctx.mul_scalar_residues(ct.c1, res, sh)
    noise = ct.noise_bits + math.log2(max(magnitude, 1.0))
    value = ct.value_bits + (math.log2(magnitude / ctx.params.scale)
                             if magnitude else 0.0)
    return Ciphertext(c0, c1, ct.level, ct.scale * ctx.params.scale,
                      noise, value)


def rescale(ct: Ciphertext, ctx: CkksContext) -> Ciphertext:
    """Drop the top prime and divide the scale by it (round to nearest)."""
    lvl = ct.level
    if lvl < 2:
        raise DepthExhaustedError(
            "modulus chain exhausted: only the reserved base prime would remain")
    params = ctx.params
    q_top = params.modulus_chain[lvl]
    inv = ctx.rescale_inv[lvl]
    inv_sh = ctx.rescale_inv_sh[lvl]

    def drop(comp: RnsPoly) -> RnsPoly:
        last = ntt_inverse(comp.residues[lvl], ctx.ntt_tables[lvl])
        signed = last.astype(np.int64)
        signed = np.where(last > U64(q_top // 2), signed - q_top, signed)
        rows = np.empty((lvl, params.ring_dim), dtype=U64)
        for i in range(lvl):
            q_i = params.modulus_chain[i]
            corr = ntt_forward(np.mod(signed, q_i).astype(U64),
                               ctx.ntt_tables[i])
            diff = comp.residues[i] + (U64(q_i) - corr)
            diff = np.where(diff >= U64(q_i), diff - U64(q_i), diff)
            rows[i] = mulmod_shoup(diff, inv[i], inv_sh[i], U64(q_i))
        return RnsPoly(rows, NTT)

    noise = float(np.logaddexp2(ct.noise_bits - math.log2(q_top),
                                _rescale_added_bits(params.ring_dim)))
    return Ciphertext(drop(ct.c0), drop(ct.c1), lvl - 1,
                      ct.scale / q_top, noise, ct.value_bits)
