#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError
from crypto.he import (
    EmptyAggregateError,
    HECiphertext,
    HEPublicKey,
    InvalidKeySizeError,
    KeyMismatchError,
    MalformedCiphertextError,
    PlaintextRangeError,
    encrypt_with_randomizer,
    he_add,
    he_add_many,
    he_decrypt,
    he_encrypt,
    he_keygen,
    he_keypair_from_primes,
    is_production_key,
)

logger = logging.getLogger(__name__)


def test_toy_key_arithmetic(toy_keys) -> None:
    # Given
    public_key, private_key = toy_keys

    # Then
    assert public_key.modulus_n == 35
    assert private_key.lambda_ == 12
    assert (private_key.prime_p, private_key.prime_q) == (5, 7)
    assert not is_production_key(public_key)


@pytest.mark.parametrize(
    "p,q", [(5, 5), (4, 7), (9, 7), (3, 7)], ids=["equal", "even", "composite", "gcd"]
)
def test_keypair_from_primes_rejects(p: int, q: int) -> None:
    with pytest.raises(InvalidKeySizeError):
        he_keypair_from_primes(p, q)


@pytest.mark.parametrize("bits", [15, 8, 33], ids=["odd", "too-small", "odd-large"])
def test_keygen_rejects_bit_length(bits: int) -> None:
    with pytest.raises(InvalidKeySizeError):
        he_keygen(bits, DeterministicRandom(1))


def test_keygen_deterministic() -> None:
    # When
    first = he_keygen(128, DeterministicRandom(5, "he"))
    second = he_keygen(128, DeterministicRandom(5, "he"))
    other = he_keygen(128, DeterministicRandom(6, "he"))

    # Then
    assert first == second
    assert first[0] != other[0]
    assert first[0].bit_length == 128
    assert first[1].prime_p != first[1].prime_q


@pytest.mark.parametrize(
    "modulus,expected", [(2**2047 + 1, True), (2**2046 + 1, False)], ids=["2048", "2047"]
)
def test_is_production_key(modulus: int, expected: bool) -> None:
    assert is_production_key(HEPublicKey.from_modulus(modulus)) is expected


def test_unit_ciphertext(toy_keys) -> None:
    # Given
    public_key, private_key = toy_keys

    # When
    ciphertext = encrypt_with_randomizer(public_key, 0, 1)

    # Then
    assert ciphertext.value == 1
    assert he_decrypt(private_key, ciphertext) == 0


def test_toy_roundtrip_every_plaintext(toy_keys) -> None:
    # Given
    public_key, private_key = toy_keys
    rng = DeterministicRandom(3)

    # Then
    for m in range(public_key.modulus_n):
        assert he_decrypt(private_key, he_encrypt(public_key, m, rng)) == m


def test_toy_wraparound(toy_keys) -> None:
    # Given
    public_key, private_key = toy_keys
    rng = DeterministicRandom(4)

    # When
    total = he_add(public_key, he_encrypt(public_key, 34, rng), he_encrypt(public_key, 2, rng))

    # Then
    assert he_decrypt(private_key, total) == 1


@pytest.mark.parametrize(
    "m", [-1, 35, 36, 1.5, True], ids=["negative", "n", "above-n", "float", "bool"]
)
def test_encrypt_rejects_plaintext(toy_keys, m) -> None:
    with pytest.raises(PlaintextRangeError):
        he_encrypt(toy_keys[0], m, DeterministicRandom(1))


def test_encryption_is_randomized(he_keys) -> None:
    # Given
    public_key, _ = he_keys
    rng = DeterministicRandom(8)

    # When
    values = {he_encrypt(public_key, 5, rng).value for _ in range(100)}

    # Then
    assert len(values) == 100


def test_boundary_plaintexts(he_keys) -> None:
    # Given
    public_key, private_key = he_keys
    rng = DeterministicRandom(9)

    # Then
    for m in (0, 1, public_key.modulus_n - 1):
        assert he_decrypt(private_key, he_encrypt(public_key, m, rng)) == m


@settings(max_examples=50, deadline=None)
@given(a=st.integers(min_value=0, max_value=2**64), b=st.integers(min_value=0, max_value=2**64))
def test_addition_matches_plaintext_sum(he_keys, a: int, b: int) -> None:
    # Given
    public_key, private_key = he_keys
    rng = DeterministicRandom(a % 2**63, "add")

    # When
    total = he_add(public_key, he_encrypt(public_key, a, rng), he_encrypt(public_key, b, rng))

    # Then
    assert he_decrypt(private_key, total) == (a + b) % public_key.modulus_n


def test_add_zero_is_identity(he_keys) -> None:
    public_key, private_key = he_keys
    rng = DeterministicRandom(10)
    total = he_add(public_key, he_encrypt(public_key, 42, rng), he_encrypt(public_key, 0, rng))
    assert he_decrypt(private_key, total) == 42


def test_add_many(he_keys) -> None:
    # Given
    public_key, private_key = he_keys
    rng = DeterministicRandom(11)
    ciphertexts = [he_encrypt(public_key, m, rng) for m in (10, 20, 30)]
    zeros = [he_encrypt(public_key, 0, rng) for _ in range(5)]

    # Then
    assert he_decrypt(private_key, he_add_many(public_key, ciphertexts)) == 60
    assert he_decrypt(private_key, he_add_many(public_key, zeros)) == 0
    assert he_add_many(public_key, ciphertexts[:1]) == ciphertexts[0]


def test_add_many_empty(he_keys) -> None:
    with pytest.raises(EmptyAggregateError):
        he_add_many(he_keys[0], [])


def test_key_mismatch(he_keys, toy_keys) -> None:
    # Given
    public_key, private_key = he_keys
    toy_public, toy_private = toy_keys
    foreign = he_encrypt(toy_public, 3, DeterministicRandom(12))
    own = he_encrypt(public_key, 3, DeterministicRandom(12))

    # Then
    with pytest.raises(KeyMismatchError):
        he_decrypt(private_key, foreign)
    with pytest.raises(KeyMismatchError):
        he_add(public_key, own, foreign)
    with pytest.raises(KeyMismatchError):
        he_add_many(public_key, [own, foreign])


@pytest.mark.parametrize(
    "value", [0, 35 * 35, 5, 7 * 3], ids=["zero", "n-squared", "p", "q-multiple"]
)
def test_decrypt_malformed(toy_keys, value: int) -> None:
    # Given
    public_key, private_key = toy_keys
    ciphertext = HECiphertext(value=value, key_fingerprint=public_key.fingerprint)

    # Then
    with pytest.raises(MalformedCiphertextError):
        he_decrypt(private_key, ciphertext)


def test_unit_ciphertext_decrypts_to_zero_under_any_key(he_keys, toy_keys) -> None:
    for public_key, private_key in (he_keys, toy_keys):
        ciphertext = HECiphertext(value=1, key_fingerprint=public_key.fingerprint)
        assert he_decrypt(private_key, ciphertext) == 0


def test_public_key_encoding(he_keys) -> None:
    # Given
    public_key, private_key = he_keys

    # When
    decoded = HEPublicKey.decode(public_key.encode())

    # Then
    assert decoded == public_key
    assert private_key.public_key == public_key
    assert private_key.fingerprint == public_key.fingerprint
    with pytest.raises(EncodingError):
        HECiphertext.decode(public_key.encode())


@pytest.mark.slow
def test_full_size_roundtrip_sweep() -> None:
    # Given
    public_key, private_key = he_keygen(1024, DeterministicRandom(13, "he"))
    rng = DeterministicRandom(14)

    # Then
    for _ in range(1000):
        a = rng.randbelow(public_key.modulus_n)
        b = rng.randbelow(public_key.modulus_n)
        ca, cb = he_encrypt(public_key, a, rng), he_encrypt(public_key, b, rng)
        assert he_decrypt(private_key, ca) == a
        total = he_add(public_key, ca, cb)
        assert he_decrypt(private_key, total) == (a + b) % public_key.modulus_n
