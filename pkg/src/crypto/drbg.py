#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Deterministic, named random streams derived from a single scenario seed."""

import hashlib

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from crypto.encoding import encode_fields
from literals import DRBG_TAG

SEED_BITS = 64


class DeterministicRandom:
    """Versioned deterministic generator (`veilsum/drbg/v1`).

    The stream is the ChaCha20 keystream under a key derived from the seed and a label path.
    `fork` derives an independent child from the key and a label without consuming the parent
    stream, so the randomness one entity sees never depends on what other entities drew.
    """

    def __init__(self, seed: int, label: str = "root"):
        if not 0 <= seed < 2**SEED_BITS:
            raise ValueError(f"seed must be a {SEED_BITS}-bit nonnegative integer")

        self.label = label
        self._key = hashlib.sha256(
            DRBG_TAG + encode_fields(seed.to_bytes(8, "big"), label.encode())
        ).digest()
        self._reset()

    def _reset(self) -> None:
        cipher = Cipher(algorithms.ChaCha20(self._key, bytes(16)), mode=None)
        self._stream = cipher.encryptor()

    def fork(self, *labels: str | bytes) -> "DeterministicRandom":
        """Returns a child stream named by `labels` below this stream's label."""
        parts = [label if isinstance(label, bytes) else label.encode() for label in labels]
        child = object.__new__(DeterministicRandom)
        child.label = "/".join(
            [self.label] + [label if isinstance(label, str) else label.hex() for label in labels]
        )
        child._key = hashlib.sha256(DRBG_TAG + encode_fields(self._key, *parts)).digest()
        child._reset()
        return child

    def token_bytes(self, n: int) -> bytes:
        """Next `n` bytes of the stream."""
        return self._stream.update(bytes(n))

    def randbits(self, k: int) -> int:
        """Uniform integer in [0, 2^k)."""
        if k <= 0:
            return 0
        nbytes = (k + 7) // 8
        return int.from_bytes(self.token_bytes(nbytes), "big") >> (8 * nbytes - k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("upper bound must be positive")
        k = n.bit_length()
        while True:
            candidate = self.randbits(k)
            if candidate < n:
                return candidate

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + self.randbelow(hi - lo + 1)
