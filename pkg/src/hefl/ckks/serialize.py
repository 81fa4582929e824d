"""Binary container for ciphertexts and keys.

Layout (little endian):

    offset  field
    0       magic "HEFL"
    4       format version (u16)
    6       payload kind (u8): 1 ciphertext, 2 public key, 3 secret key
    7       params fingerprint (16 bytes, hash of N/chain/scale)
    23      level (u8)
    24      scale (f64)
    32      noise estimate bits (f64)
    40      slot magnitude bound bits (f64)
    48      polynomial count (u8)
    49      domain (u8): 0 coefficient, 1 NTT
    50      poly_count * (level+1) * ring_dim residues (u64 each)

Deserialization validates against the caller's parameter set and
reports the byte offset of the first inconsistent field.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ParseError
from .context import COEFF, NTT, CkksContext, RnsPoly
from .keys import PublicKey, SecretKey, shoup_rows
from .modmath import U64
from .ops import Ciphertext

MAGIC = b"HEFL"
FORMAT_VERSION = 1

KIND_CIPHERTEXT = 1
KIND_PUBLIC_KEY = 2
KIND_SECRET_KEY = 3

_HEADER = struct.Struct("<4sHB16sBdddBB")
_DOMAIN_CODES = {COEFF: 0, NTT: 1}
_DOMAIN_NAMES = {0: COEFF, 1: NTT}


def _pack(kind: int, ctx: CkksContext, level: int, scale: float,
          noise_bits: float, value_bits: float, polys: list[np.ndarray],
          domain: str) -> bytes:
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, kind, ctx.params.fingerprint(),
                        level, scale, noise_bits, value_bits, len(polys),
                        _DOMAIN_CODES[domain])
    body = b"".join(np.ascontiguousarray(p, dtype="<u8").tobytes()
                    for p in polys)
    return head + body


def _unpack(data: bytes, ctx: CkksContext, expected_kind: int,
            ) -> tuple[int, float, float, float, list[np.ndarray], str]:
    if len(data) < _HEADER.size:
        raise ParseError("truncated header", offset=len(data))
    (magic, version, kind, fp, level, scale, noise_bits, value_bits, count,
     domain_code) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version}", offset=4)
    if kind != expected_kind:
        raise ParseError(f"payload kind {kind}, expected {expected_kind}",
                         offset=6)
    if fp != ctx.params.fingerprint():
        raise ParseError("params fingerprint mismatch", offset=7)
    if level > ctx.params.top_level:
        raise ParseError(f"level {level} outside the modulus chain", offset=23)
    if domain_code not in _DOMAIN_NAMES:
        raise ParseError(f"unknown domain code {domain_code}", offset=49)
    n = ctx.params.ring_dim
    expected = _HEADER.size + count * (level + 1) * n * 8
    if len(data) != expected:
        raise ParseError(
            f"payload length {len(data)}, expected {expected}",
            offset=min(len(data), expected))
    polys = []
    pos = _HEADER.size
    for _ in range(count):
        rows = np.frombuffer(data, dtype="<u8", count=(level + 1) * n,
                             offset=pos).reshape(level + 1, n).astype(U64)
        for i, row in enumerate(rows):
            if int(row.max(initial=0)) >= ctx.params.modulus_chain[i]:
                raise ParseError(f"residue out of range for prime {i}",
                                 offset=pos)
        polys.append(rows)
        pos += (level + 1) * n * 8
    return (level, scale, noise_bits, value_bits, polys,
            _DOMAIN_NAMES[domain_code])


def serialize_ciphertext(ct: Ciphertext, ctx: CkksContext) -> bytes:
    return _pack(KIND_CIPHERTEXT, ctx, ct.level, ct.scale, ct.noise_bits,
                 ct.value_bits, [ct.c0.residues, ct.c1.residues],
                 ct.c0.domain)


def deserialize_ciphertext(data: bytes, ctx: CkksContext) -> Ciphertext:
    level, scale, noise_bits, value_bits, polys, domain = _unpack(
        data, ctx, KIND_CIPHERTEXT)
    if len(polys) != 2:
        raise ParseError(f"ciphertext carries {len(polys)} polys", offset=48)
    if scale <= 0:
        raise ParseError("non-positive scale", offset=24)
    return Ciphertext(RnsPoly(polys[0], domain), RnsPoly(polys[1], domain),
                      level, scale, noise_bits, value_bits)


def serialize_public_key(pk: PublicKey, ctx: CkksContext) -> bytes:
    return _pack(KIND_PUBLIC_KEY, ctx, ctx.params.top_level, 0.0, 0.0, 0.0,
                 [pk.b_ntt, pk.a_ntt], NTT)


def deserialize_public_key(data: bytes, ctx: CkksContext) -> PublicKey:
    level, _, _, _, polys, domain = _unpack(data, ctx, KIND_PUBLIC_KEY)
    if len(polys) != 2 or level != ctx.params.top_level or domain != NTT:
        raise ParseError("malformed public key payload", offset=23)
    b, a = polys
    chain = ctx.params.modulus_chain
    return PublicKey(b, shoup_rows(b, chain), a, shoup_rows(a, chain))


def serialize_secret_key(sk: SecretKey, ctx: CkksContext) -> bytes:
    coeff = ctx.lift_signed(sk.s_ternary, ctx.params.top_level)
    return _pack(KIND_SECRET_KEY, ctx, ctx.params.top_level, 0.0, 0.0, 0.0,
                 [coeff.residues], COEFF)


def deserialize_secret_key(data: bytes, ctx: CkksContext) -> SecretKey:
    level, _, _, _, polys, domain = _unpack(data, ctx, KIND_SECRET_KEY)
    if len(polys) != 1 or level != ctx.params.top_level or domain != COEFF:
        raise ParseError("malformed secret key payload", offset=23)
    rows = polys[0]
    q0 = ctx.params.modulus_chain[0]
    signed = rows[0].astype(np.int64)
    ternary = np.where(rows[0] > U64(q0 // 2), signed - q0, signed)
    if not np.isin(ternary, (-1, 0, 1)).all():
        raise ParseError("secret key coefficients are not ternary",
                         offset=_HEADER.size)
    s_ntt = ctx.to_ntt(RnsPoly(rows, COEFF)).residues
    return SecretKey(ternary, s_ntt, shoup_rows(s_ntt, ctx.params.modulus_chain))
