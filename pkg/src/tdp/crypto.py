"""Hash suite, authenticated symmetric cipher and seeded scalar sampling."""
from __future__ import annotations

import hashlib
import random
import struct

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .ec import CurveGroup

KEY_BYTES = 16  # AES-128
NONCE_BYTES = 12


class AuthFailure(Exception):
    """Ciphertext was tampered with or decrypted under the wrong key."""


def scalar_random(group: CurveGroup, rng: random.Random) -> int:
    """Uniform scalar in [1, q)."""
    return 1 + rng.randrange(group.order - 1)


def lp(data: bytes) -> bytes:
    """Length-prefix a variable-length field (2-byte big-endian length)."""
    if len(data) > 0xFFFF:
        raise ValueError("field too long")
    return struct.pack(">H", len(data)) + data


def encode_id(device_id: str) -> bytes:
    return lp(device_id.encode("utf-8"))


def encode_real(value: float) -> bytes:
    """Big-endian IEEE-754 double; hashing reals through this keeps them bit-exact."""
    return struct.pack(">d", float(value))


class HashSuite:
    """h0, h1, h2 from SHA-256 with one-byte domain prefixes 0x00, 0x01, 0x02."""

    def __init__(self, order: int):
        self.order = order

    def _digest(self, prefix: int, data: bytes) -> bytes:
        return hashlib.sha256(bytes([prefix]) + data).digest()

    def h0(self, data: bytes) -> int:
        return int.from_bytes(self._digest(0, data), "big") % self.order

    def h1(self, data: bytes) -> bytes:
        return self._digest(1, data)[:KEY_BYTES]

    def h2(self, data: bytes) -> int:
        return int.from_bytes(self._digest(2, data), "big") % self.order


def enc(key: bytes, plaintext: bytes, rng: random.Random, aad: bytes | None = None) -> bytes:
    """AES-128-GCM with a random nonce prepended to the ciphertext."""
    if len(key) != KEY_BYTES:
        raise ValueError(f"key must be {KEY_BYTES} bytes")
    nonce = rng.randbytes(NONCE_BYTES)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)


def dec(key: bytes, ciphertext: bytes, aad: bytes | None = None) -> bytes:
    if len(key) != KEY_BYTES:
        raise ValueError(f"key must be {KEY_BYTES} bytes")
    if len(ciphertext) < NONCE_BYTES + 16:
        raise AuthFailure("ciphertext too short")
    try:
        return AESGCM(key).decrypt(ciphertext[:NONCE_BYTES], ciphertext[NONCE_BYTES:], aad)
    except InvalidTag as exc:
        raise AuthFailure("authentication tag mismatch") from exc
