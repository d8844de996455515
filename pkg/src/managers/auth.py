#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Manager for the trusted-source challenge-response authentication."""

import logging
from dataclasses import dataclass

from core.actor import ProtocolError
from core.models import AuthChallenge, AuthResponse
from crypto.drbg import DeterministicRandom
from crypto.encoding import encode_fields, encode_str
from crypto.envelope import EntityKeys, seal, sign, verify
from literals import CHALLENGE_TAG, NONCE_SIZE

logger = logging.getLogger(__name__)


class MaliciousUserDetectedError(ProtocolError):
    """Raised when a challenge response does not verify against the registered owner."""


@dataclass(frozen=True)
class IssuedChallenge:
    """A challenge a source remembers until the response arrives."""

    session_id: bytes
    account_id: str
    nonce: bytes
    caddr_token: bytes


def challenge_message(nonce: bytes, session_id: bytes, source_id: str) -> bytes:
    """The signed message: nonce, session id and source id under a fixed tag."""
    return CHALLENGE_TAG + encode_fields(nonce, session_id, encode_str(source_id))


class AuthManager:
    """Issues and checks challenges that prove control of a registered account's keys.

    The response reveals the nonce alongside the signature, so any reader of the ledger can
    re-check the signature offline against the registered owner's public key.
    """

    def __init__(self, source_id: str):
        self.source_id = source_id

    def issue(
        self,
        session_id: bytes,
        account_id: str,
        owner_enc_public: bytes,
        caddr_token: bytes,
        rng: DeterministicRandom,
    ) -> tuple[IssuedChallenge, AuthChallenge]:
        """Creates a fresh nonce sealed to the account owner's encryption key."""
        nonce = rng.token_bytes(NONCE_SIZE)
        sealed = seal(owner_enc_public, nonce, rng)
        issued = IssuedChallenge(
            session_id=session_id, account_id=account_id, nonce=nonce, caddr_token=caddr_token
        )
        return issued, AuthChallenge(source_id=self.source_id, sealed_nonce=sealed.encode())

    def check(
        self, issued: IssuedChallenge, response: AuthResponse, owner_sig_public: bytes
    ) -> None:
        """Verifies a response against the remembered nonce and the registered key.

        Raises:
            MaliciousUserDetectedError: when the nonce or the signature does not match
        """
        if response.nonce != issued.nonce:
            raise MaliciousUserDetectedError("response nonce does not match the challenge")

        message = challenge_message(response.nonce, issued.session_id, self.source_id)
        if not verify(owner_sig_public, message, response.signature):
            raise MaliciousUserDetectedError("response signature does not verify")


def answer_challenge(
    account_keys: EntityKeys,
    nonce: bytes,
    session_id: bytes,
    source_id: str,
) -> AuthResponse:
    """Signs an opened nonce with the account's signature key."""
    signature = sign(account_keys.sig_private, challenge_message(nonce, session_id, source_id))
    return AuthResponse(source_id=source_id, nonce=nonce, signature=signature)


def verify_response_offline(
    response: AuthResponse, session_id: bytes, owner_sig_public: bytes
) -> bool:
    """Signature check available to any ledger reader."""
    message = challenge_message(response.nonce, session_id, response.source_id)
    return verify(owner_sig_public, message, response.signature)

