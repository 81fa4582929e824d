"""Leveled CKKS core: RNS representation, per-prime NTT, batch encoding."""

from .context import COEFF, NTT, CkksContext, RnsPoly, get_context
from .encoding import Plaintext, decode, encode
from .keys import PublicKey, SecretKey, keygen
from .ops import (Ciphertext, decrypt, encrypt, he_add, he_mul_scalar,
                  noise_budget_estimate, rescale)
from .params import CkksParams, get_profile, profile_names
from .serialize import (deserialize_ciphertext, deserialize_public_key,
                        deserialize_secret_key, serialize_ciphertext,
                        serialize_public_key, serialize_secret_key)

__all__ = [
    "COEFF", "NTT", "CkksContext", "RnsPoly", "get_context",
    "Plaintext", "decode", "encode",
    "PublicKey", "SecretKey", "keygen",
    "Ciphertext", "decrypt", "encrypt", "he_add", "he_mul_scalar",
    "noise_budget_estimate", "rescale",
    "CkksParams", "get_profile", "profile_names",
    "deserialize_ciphertext", "deserialize_public_key",
    "deserialize_secret_key", "serialize_ciphertext",
    "serialize_public_key", "serialize_secret_key",
]
