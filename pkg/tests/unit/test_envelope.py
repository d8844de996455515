#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

import pytest

from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError
from crypto.envelope import (
    CorruptEnvelopeError,
    SealedEnvelope,
    Signature,
    WrongRecipientError,
    address_of,
    env_keygen,
    open_envelope,
    seal,
    sign,
    verify,
)
from literals import ADDRESS_SIZE


def test_keygen_deterministic() -> None:
    first = env_keygen("test", DeterministicRandom(1, "entity"))
    second = env_keygen("test", DeterministicRandom(1, "entity"))
    assert first == second


def test_keygen_unknown_profile() -> None:
    with pytest.raises(ValueError):
        env_keygen("tiny", DeterministicRandom(1))  # pyright: ignore[reportArgumentType]


def test_keys_repr_hides_private_material(alice_keys) -> None:
    assert alice_keys.enc_private.hex() not in repr(alice_keys)
    assert address_of(alice_keys.sig_public).hex in repr(alice_keys)


@pytest.mark.parametrize("size", [0, 1024, 1 << 20], ids=["empty", "1KiB", "1MiB"])
def test_seal_open_roundtrip(alice_keys, size: int) -> None:
    # Given
    payload = DeterministicRandom(2).token_bytes(size)

    # When
    envelope = seal(alice_keys.enc_public, payload, DeterministicRandom(3))
    decoded = SealedEnvelope.decode(envelope.encode())

    # Then
    assert open_envelope(alice_keys.enc_private, decoded) == payload


def test_seal_is_randomized(alice_keys) -> None:
    rng = DeterministicRandom(4)
    envelopes = {seal(alice_keys.enc_public, b"same", rng).encode() for _ in range(100)}
    assert len(envelopes) == 100


def test_open_wrong_recipient(alice_keys, bob_keys) -> None:
    envelope = seal(alice_keys.enc_public, b"for alice", DeterministicRandom(5))
    with pytest.raises(WrongRecipientError):
        open_envelope(bob_keys.enc_private, envelope)


@pytest.mark.parametrize("field", ["body", "nonce", "encapsulated_key"])
def test_flipped_byte_is_corrupt(alice_keys, field: str) -> None:
    # Given
    envelope = seal(alice_keys.enc_public, b"payload", DeterministicRandom(6))
    raw = bytearray(getattr(envelope, field))
    raw[0] ^= 0x01
    tampered = SealedEnvelope(**(vars(envelope) | {field: bytes(raw)}))

    # Then
    with pytest.raises(CorruptEnvelopeError):
        open_envelope(alice_keys.enc_private, tampered)


def test_envelope_decode_rejects_bad_sizes(alice_keys) -> None:
    envelope = seal(alice_keys.enc_public, b"x", DeterministicRandom(7))
    short = SealedEnvelope(
        encapsulated_key=envelope.encapsulated_key[:-1],
        nonce=envelope.nonce,
        body=envelope.body,
        recipient_fingerprint=envelope.recipient_fingerprint,
    )
    with pytest.raises(EncodingError):
        SealedEnvelope.decode(short.encode())


def test_sign_verify(alice_keys, bob_keys) -> None:
    # Given
    signature = sign(alice_keys.sig_private, b"hello")
    flipped = bytes([b"hello"[0] ^ 0x01]) + b"ello"

    # Then
    assert verify(alice_keys.sig_public, b"hello", signature)
    assert not verify(alice_keys.sig_public, flipped, signature)
    assert not verify(bob_keys.sig_public, b"hello", signature)
    assert not verify(alice_keys.sig_public, b"hello", Signature(b"\x00" * 10))


def test_address(alice_keys, bob_keys) -> None:
    assert address_of(alice_keys.sig_public) == address_of(alice_keys.sig_public)
    assert address_of(alice_keys.sig_public) != address_of(bob_keys.sig_public)
    assert len(address_of(alice_keys.sig_public).value) == ADDRESS_SIZE


@pytest.mark.slow
def test_address_collision_sweep() -> None:
    root = DeterministicRandom(8)
    addresses = {
        address_of(env_keygen("test", root.fork(str(i))).sig_public) for i in range(1000)
    }
    assert len(addresses) == 1000


@pytest.mark.slow
def test_random_signatures_never_verify(alice_keys) -> None:
    """1000 random message and signature pairs, plus a genuine signature moved to each message."""
    rng = DeterministicRandom(9, "forgery")
    genuine = sign(alice_keys.sig_private, b"genuine")

    for i in range(1000):
        # Given
        message = rng.token_bytes(rng.randint(1, 64))
        forged = Signature(rng.token_bytes(64))

        # Then
        assert not verify(alice_keys.sig_public, message, forged), i
        if message != b"genuine":
            assert not verify(alice_keys.sig_public, message, genuine), i
