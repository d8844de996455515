#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Additively homomorphic public-key encryption (Paillier, g = n + 1).

Plaintexts live in [0, n) and addition wraps modulo n: callers that sum amounts must keep the
total below `HEPublicKey.modulus_n`.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce

from Crypto.Util.number import getPrime, isPrime
from phe import paillier
from tenacity import retry, retry_if_exception_type, stop_after_attempt

from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError, decode_fields, decode_int, encode_fields, encode_int
from literals import FINGERPRINT_SIZE, HE_FINGERPRINT_TAG, MIN_HE_BITS, MIN_PRODUCTION_HE_BITS

logger = logging.getLogger(__name__)

PUBLIC_KEY_LABEL = b"paillier"


class HEError(Exception):
    """Base exception for homomorphic encryption failures."""


class InvalidKeySizeError(HEError):
    """Raised when a key size or prime pair cannot produce a valid key."""


class DegenerateKeyError(HEError):
    """Raised internally when a sampled prime pair must be resampled."""


class PlaintextRangeError(HEError):
    """Raised when a plaintext is outside [0, n)."""


class KeyMismatchError(HEError):
    """Raised when a ciphertext's key fingerprint does not match the key in use."""


class MalformedCiphertextError(HEError):
    """Raised when a ciphertext value is not a unit modulo n^2."""


class EmptyAggregateError(HEError):
    """Raised when summing an empty list of ciphertexts."""


def _fingerprint(modulus_n: int) -> bytes:
    encoded = encode_fields(PUBLIC_KEY_LABEL, encode_int(modulus_n))
    return hashlib.sha256(HE_FINGERPRINT_TAG + encoded).digest()[:FINGERPRINT_SIZE]


@dataclass(frozen=True)
class HEPublicKey:
    """Paillier public key; `fingerprint` binds ciphertexts to it."""

    modulus_n: int
    bit_length: int
    fingerprint: bytes

    @classmethod
    def from_modulus(cls, modulus_n: int) -> "HEPublicKey":
        """Builds the public key for modulus `n`."""
        return cls(
            modulus_n=modulus_n,
            bit_length=modulus_n.bit_length(),
            fingerprint=_fingerprint(modulus_n),
        )

    @property
    def n_squared(self) -> int:
        """The ciphertext modulus."""
        return self.modulus_n * self.modulus_n

    @property
    def production(self) -> bool:
        """False for reduced test-size keys."""
        return self.bit_length >= MIN_PRODUCTION_HE_BITS

    def encode(self) -> bytes:
        """Canonical encoding used in transcripts."""
        return encode_fields(PUBLIC_KEY_LABEL, encode_int(self.modulus_n))

    @classmethod
    def decode(cls, data: bytes) -> "HEPublicKey":
        """Inverse of `encode`."""
        label, modulus = decode_fields(data, 2)
        if label != PUBLIC_KEY_LABEL:
            raise EncodingError("not a Paillier public key")
        return cls.from_modulus(decode_int(modulus))


@dataclass(frozen=True)
class HEPrivateKey:
    """Paillier private key: λ = lcm(p-1, q-1) and μ = L(g^λ mod n²)^-1 mod n."""

    lambda_: int
    mu: int
    modulus_n: int
    prime_p: int = field(repr=False)
    prime_q: int = field(repr=False)

    @property
    def public_key(self) -> HEPublicKey:
        """The matching public key."""
        return HEPublicKey.from_modulus(self.modulus_n)

    @property
    def fingerprint(self) -> bytes:
        """Fingerprint of the matching public key."""
        return _fingerprint(self.modulus_n)


@dataclass(frozen=True)
class HECiphertext:
    """A ciphertext in [1, n²) tagged with the fingerprint of its key."""

    value: int
    key_fingerprint: bytes

    def encode(self) -> bytes:
        """Canonical encoding: fingerprint then value."""
        return encode_fields(self.key_fingerprint, encode_int(self.value))

    @classmethod
    def decode(cls, data: bytes) -> "HECiphertext":
        """Inverse of `encode`."""
        fingerprint, value = decode_fields(data, 2)
        if len(fingerprint) != FINGERPRINT_SIZE:
            raise EncodingError("ciphertext fingerprint has the wrong size")
        return cls(value=decode_int(value), key_fingerprint=fingerprint)


@lru_cache(maxsize=32)
def _phe_public(modulus_n: int) -> paillier.PaillierPublicKey:
    return paillier.PaillierPublicKey(modulus_n)


@lru_cache(maxsize=32)
def _phe_private(modulus_n: int, prime_p: int, prime_q: int) -> paillier.PaillierPrivateKey:
    return paillier.PaillierPrivateKey(_phe_public(modulus_n), prime_p, prime_q)


def he_keypair_from_primes(p: int, q: int) -> tuple[HEPublicKey, HEPrivateKey]:
    """Builds a matched key pair from two distinct odd primes."""
    if p == q or p % 2 == 0 or q % 2 == 0 or not (isPrime(p) and isPrime(q)):
        raise InvalidKeySizeError("key needs two distinct odd primes")

    n = p * q
    if math.gcd(n, (p - 1) * (q - 1)) != 1:
        raise InvalidKeySizeError("gcd(n, φ(n)) must be 1")

    lambda_ = math.lcm(p - 1, q - 1)
    n_squared = n * n
    mu = pow((pow(n + 1, lambda_, n_squared) - 1) // n, -1, n)

    private_key = HEPrivateKey(lambda_=lambda_, mu=mu, modulus_n=n, prime_p=p, prime_q=q)
    return HEPublicKey.from_modulus(n), private_key


def is_production_key(public_key: HEPublicKey) -> bool:
    """False below 2048 bits; such keys are for tests only."""
    return public_key.production


@retry(
    retry=retry_if_exception_type(DegenerateKeyError),
    stop=stop_after_attempt(256),
    reraise=True,
)
def _sample_prime_pair(bit_length: int, rng: DeterministicRandom) -> tuple[int, int]:
    half = bit_length // 2
    p = getPrime(half, randfunc=rng.token_bytes)
    q = getPrime(half, randfunc=rng.token_bytes)
    if p == q or (p * q).bit_length() != bit_length:
        raise DegenerateKeyError(f"resampling {bit_length}-bit modulus")

    return p, q


def he_keygen(bit_length: int, rng: DeterministicRandom) -> tuple[HEPublicKey, HEPrivateKey]:
    """Deterministic key generation: same `rng` state, same key pair.

    Args:
        bit_length: bits of the modulus n; even and at least 16
        rng: the randomness source

    Raises:
        InvalidKeySizeError: for odd or too-small bit lengths
    """
    if bit_length < MIN_HE_BITS or bit_length % 2:
        raise InvalidKeySizeError(f"bit length must be even and >= {MIN_HE_BITS}")

    p, q = _sample_prime_pair(bit_length, rng)
    public_key, private_key = he_keypair_from_primes(p, q)
    if not is_production_key(public_key):
        logger.debug(f"generated non-production {bit_length}-bit HE key")

    return public_key, private_key


def _sample_randomizer(public_key: HEPublicKey, rng: DeterministicRandom) -> int:
    while True:
        r = rng.randbelow(public_key.modulus_n)
        if r > 0 and math.gcd(r, public_key.modulus_n) == 1:
            return r


def encrypt_with_randomizer(public_key: HEPublicKey, m: int, r: int) -> HECiphertext:
    """c = (1+n)^m · r^n mod n² for an explicit unit r."""
    if not isinstance(m, int) or isinstance(m, bool):
        raise PlaintextRangeError("plaintext must be an integer")
    if not 0 <= m < public_key.modulus_n:
        raise PlaintextRangeError(
            f"plaintext outside [0, n) for a {public_key.bit_length}-bit key"
        )
    if math.gcd(r, public_key.modulus_n) != 1:
        raise HEError("randomizer must be a unit modulo n")

    value = _phe_public(public_key.modulus_n).raw_encrypt(m, r_value=r)
    return HECiphertext(value=int(value), key_fingerprint=public_key.fingerprint)


def he_encrypt(public_key: HEPublicKey, m: int, rng: DeterministicRandom) -> HECiphertext:
    """Randomized encryption of `m` under `public_key`."""
    if not isinstance(m, int) or not 0 <= m < public_key.modulus_n:
        raise PlaintextRangeError(
            f"plaintext outside [0, n) for a {public_key.bit_length}-bit key"
        )

    return encrypt_with_randomizer(public_key, m, _sample_randomizer(public_key, rng))


def he_decrypt(private_key: HEPrivateKey, ciphertext: HECiphertext) -> int:
    """Returns L(c^λ mod n²)·μ mod n.

    Raises:
        KeyMismatchError: when the ciphertext was produced under another key
        MalformedCiphertextError: when the value is not a unit modulo n²
    """
    if ciphertext.key_fingerprint != private_key.fingerprint:
        raise KeyMismatchError("ciphertext was not produced under this key")

    n = private_key.modulus_n
    if not 0 < ciphertext.value < n * n or math.gcd(ciphertext.value, n) != 1:
        raise MalformedCiphertextError("ciphertext value is not a unit modulo n²")

    phe_key = _phe_private(n, private_key.prime_p, private_key.prime_q)
    return int(phe_key.raw_decrypt(ciphertext.value))


def he_add(public_key: HEPublicKey, c1: HECiphertext, c2: HECiphertext) -> HECiphertext:
    """Ciphertext of (m1 + m2) mod n."""
    for ciphertext in (c1, c2):
        if ciphertext.key_fingerprint != public_key.fingerprint:
            raise KeyMismatchError("ciphertext fingerprint does not match the public key")

    return HECiphertext(
        value=(c1.value * c2.value) % public_key.n_squared,
        key_fingerprint=public_key.fingerprint,
    )


def he_add_many(public_key: HEPublicKey, ciphertexts: list[HECiphertext]) -> HECiphertext:
    """Left fold of `he_add`; a single ciphertext is returned unchanged."""
    if not ciphertexts:
        raise EmptyAggregateError("nothing to aggregate")

    for ciphertext in ciphertexts:
        if ciphertext.key_fingerprint != public_key.fingerprint:
            raise KeyMismatchError("ciphertext fingerprint does not match the public key")

    return reduce(lambda acc, c: he_add(public_key, acc, c), ciphertexts)
