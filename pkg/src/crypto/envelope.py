#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Hybrid public-key sealing, signatures and address derivation."""

import hashlib
import logging
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError, decode_fields, encode_fields
from literals import (
    ADDRESS_SIZE,
    ADDRESS_TAG,
    AEAD_NONCE_SIZE,
    ENV_FINGERPRINT_TAG,
    ENV_KDF_INFO,
    FINGERPRINT_SIZE,
    PROFILES,
    X25519_KEY_SIZE,
    Profile,
)

logger = logging.getLogger(__name__)

ENC_KEY_LABEL = b"x25519"
SIG_KEY_LABEL = b"ed25519"
SIGNATURE_SIZE = 64


class EnvelopeError(Exception):
    """Base exception for sealing and signature failures."""


class WrongRecipientError(EnvelopeError):
    """Raised when an envelope is opened with a key it was not sealed to."""


class CorruptEnvelopeError(EnvelopeError):
    """Raised when an envelope fails authentication."""


@dataclass(frozen=True)
class EntityKeys:
    """Raw key material of one protocol entity."""

    enc_public: bytes
    enc_private: bytes
    sig_public: bytes
    sig_private: bytes

    def __repr__(self) -> str:
        return f"EntityKeys(address={address_of(self.sig_public).hex})"


@dataclass(frozen=True)
class Address:
    """20-byte on-chain identifier derived from a signature public key."""

    value: bytes

    @property
    def hex(self) -> str:
        """Hex rendering used in transcripts and reports."""
        return self.value.hex()

    def __str__(self) -> str:
        return self.hex


@dataclass(frozen=True)
class Signature:
    """An Ed25519 signature value."""

    value: bytes


@dataclass(frozen=True)
class SealedEnvelope:
    """Ephemeral X25519 public key, AEAD nonce and body, and the recipient's key fingerprint."""

    encapsulated_key: bytes
    nonce: bytes
    body: bytes
    recipient_fingerprint: bytes

    def encode(self) -> bytes:
        """Fixed field order: key, nonce, body, fingerprint."""
        return encode_fields(
            self.encapsulated_key, self.nonce, self.body, self.recipient_fingerprint
        )

    @classmethod
    def decode(cls, data: bytes) -> "SealedEnvelope":
        """Inverse of `encode`; rejects fields of the wrong size."""
        encapsulated_key, nonce, body, fingerprint = decode_fields(data, 4)
        if (
            len(encapsulated_key) != X25519_KEY_SIZE
            or len(nonce) != AEAD_NONCE_SIZE
            or len(fingerprint) != FINGERPRINT_SIZE
        ):
            raise EncodingError("envelope field has the wrong size")

        return cls(
            encapsulated_key=encapsulated_key,
            nonce=nonce,
            body=body,
            recipient_fingerprint=fingerprint,
        )


def encode_enc_public(enc_public: bytes) -> bytes:
    """Canonical encoding of an encryption public key."""
    return encode_fields(ENC_KEY_LABEL, enc_public)


def encode_sig_public(sig_public: bytes) -> bytes:
    """Canonical encoding of a signature public key."""
    return encode_fields(SIG_KEY_LABEL, sig_public)


def enc_fingerprint(enc_public: bytes) -> bytes:
    """16-byte fingerprint of an encryption public key."""
    digest = hashlib.sha256(ENV_FINGERPRINT_TAG + encode_enc_public(enc_public)).digest()
    return digest[:FINGERPRINT_SIZE]


def check_public_keys(enc_public: bytes, sig_public: bytes) -> None:
    """Raises ValueError unless both are well-formed X25519 and Ed25519 public keys."""
    X25519PublicKey.from_public_bytes(enc_public)
    Ed25519PublicKey.from_public_bytes(sig_public)


def env_keygen(profile: Profile, rng: DeterministicRandom) -> EntityKeys:
    """Derives independent encryption and signature key pairs from `rng`.

    Args:
        profile: run profile; both profiles use the same curve keys
        rng: the entity's randomness stream

    Raises:
        ValueError: for unknown profiles
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile}")

    enc_key = X25519PrivateKey.from_private_bytes(rng.fork("enc").token_bytes(X25519_KEY_SIZE))
    sig_key = Ed25519PrivateKey.from_private_bytes(rng.fork("sig").token_bytes(32))

    return EntityKeys(
        enc_public=enc_key.public_key().public_bytes_raw(),
        enc_private=enc_key.private_bytes_raw(),
        sig_public=sig_key.public_key().public_bytes_raw(),
        sig_private=sig_key.private_bytes_raw(),
    )


def _derive_key(shared: bytes, encapsulated_key: bytes, enc_public: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=None,
        info=ENV_KDF_INFO + encapsulated_key + enc_public,
    ).derive(shared)


def seal(enc_public: bytes, payload: bytes, rng: DeterministicRandom) -> SealedEnvelope:
    """Seals `payload` so that only the holder of the matching private key can open it."""
    ephemeral = X25519PrivateKey.from_private_bytes(rng.token_bytes(X25519_KEY_SIZE))
    encapsulated_key = ephemeral.public_key().public_bytes_raw()
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(enc_public))

    fingerprint = enc_fingerprint(enc_public)
    nonce = rng.token_bytes(AEAD_NONCE_SIZE)
    body = AESGCM(_derive_key(shared, encapsulated_key, enc_public)).encrypt(
        nonce, payload, encode_fields(encapsulated_key, fingerprint)
    )

    return SealedEnvelope(
        encapsulated_key=encapsulated_key,
        nonce=nonce,
        body=body,
        recipient_fingerprint=fingerprint,
    )


def open_envelope(enc_private: bytes, envelope: SealedEnvelope) -> bytes:
    """Returns the sealed payload.

    Raises:
        WrongRecipientError: when `envelope` was sealed to another key
        CorruptEnvelopeError: when any envelope byte was altered
    """
    private_key = X25519PrivateKey.from_private_bytes(enc_private)
    enc_public = private_key.public_key().public_bytes_raw()
    if envelope.recipient_fingerprint != enc_fingerprint(enc_public):
        raise WrongRecipientError("envelope is sealed to a different key")

    try:
        shared = private_key.exchange(X25519PublicKey.from_public_bytes(envelope.encapsulated_key))
        key = _derive_key(shared, envelope.encapsulated_key, enc_public)
        return AESGCM(key).decrypt(
            envelope.nonce,
            envelope.body,
            encode_fields(envelope.encapsulated_key, envelope.recipient_fingerprint),
        )
    except (InvalidTag, ValueError) as e:
        raise CorruptEnvelopeError("envelope failed authentication") from e


def sign(sig_private: bytes, message: bytes) -> Signature:
    """Signs `message`."""
    return Signature(Ed25519PrivateKey.from_private_bytes(sig_private).sign(message))


def verify(sig_public: bytes, message: bytes, signature: Signature) -> bool:
    """True iff `signature` is valid for `message` under `sig_public`; never raises."""
    try:
        Ed25519PublicKey.from_public_bytes(sig_public).verify(signature.value, message)
    except (InvalidSignature, ValueError, TypeError) as e:
        logger.debug(f"signature rejected: {type(e).__name__}")
        return False

    return True


def address_of(sig_public: bytes) -> Address:
    """Truncated SHA-256 of the canonical signature key encoding."""
    digest = hashlib.sha256(ADDRESS_TAG + encode_sig_public(sig_public)).digest()
    return Address(digest[:ADDRESS_SIZE])
