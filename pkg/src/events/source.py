#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Trusted source role: authenticates account owners and uploads encrypted amounts."""

import logging
from dataclasses import dataclass

from core.actor import ActorBase
from core.ledger import LedgerBase
from core.models import AssetUpload, AuthResponse, LedgerRecord, SessionManifest
from crypto.drbg import DeterministicRandom
from crypto.envelope import EntityKeys, seal
from crypto.he import HEPublicKey, he_encrypt
from literals import Status
from managers.auth import AuthManager, IssuedChallenge, MaliciousUserDetectedError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegistryEntry:
    """An account at a trusted source and the public keys of its registered owner."""

    amount: int
    owner: str
    owner_sig_public: bytes
    owner_enc_public: bytes


class TrustedSourceActor(ActorBase):
    """Uploads an account amount only after its owner answered a fresh challenge."""

    role = "source"

    def __init__(
        self,
        source_id: str,
        ledger: LedgerBase,
        rng: DeterministicRandom,
        keys: EntityKeys,
        registry: dict[str, RegistryEntry],
        he_public: HEPublicKey,
        relayer_enc_public: bytes,
        log_sensitive_output: bool = False,
    ):
        super().__init__(f"source:{source_id}", ledger, rng, log_sensitive_output)
        self.source_id = source_id
        self.keys = keys
        self.registry = registry
        self.he_public = he_public
        self.relayer_enc_public = relayer_enc_public
        self.auth = AuthManager(source_id)
        self.issued_challenges: dict[bytes, IssuedChallenge] = {}

        self.recorder.holds_key(f"enc:{self.name}")
        self.recorder.holds_key(f"sig:{self.name}")
        for account_id, entry in registry.items():
            self.recorder.holds_amount(account_id, entry.amount, entry.owner)

        self.observe("SessionManifest", self.source_issue_challenge)
        self.observe("AuthResponse", self._on_response)

    @property
    def author(self) -> str:
        return self.name

    def source_issue_challenge(self, record: LedgerRecord, manifest: SessionManifest) -> None:
        """Challenges the registered owner of the account listed for this source."""
        account_id = dict(manifest.expected_sources).get(self.source_id)
        if account_id is None:
            return

        self.recorder.saw_token(manifest.caddr_token)
        entry = self.registry.get(account_id)
        if entry is None:
            self._set_status(Status.ACCOUNT_UNKNOWN, account_id)
            return

        issued, challenge = self.auth.issue(
            session_id=record.session_id,
            account_id=account_id,
            owner_enc_public=entry.owner_enc_public,
            caddr_token=manifest.caddr_token,
            rng=self.rng.fork("challenge", record.session_id),
        )
        self.issued_challenges[record.session_id] = issued
        self._append(challenge, record.session_id)
        self._set_status(Status.CHALLENGE_ISSUED, account_id)

    def _on_response(self, record: LedgerRecord, response: AuthResponse) -> None:
        if response.source_id != self.source_id:
            return

        issued = self.issued_challenges.pop(record.session_id, None)
        if issued is None:
            return

        entry = self.registry[issued.account_id]
        try:
            self.auth.check(issued, response, entry.owner_sig_public)
        except MaliciousUserDetectedError as e:
            self._set_status(Status.MALICIOUS_USER, str(e))
            return

        self.source_upload(issued, entry)

    def source_upload(self, issued: IssuedChallenge, entry: RegistryEntry) -> int:
        """Encrypts the amount under the ZKPSP's key and seals it to the relayer."""
        rng = self.rng.fork("he", issued.session_id)
        ciphertext = he_encrypt(self.he_public, entry.amount, rng)
        self.recorder.holds_ciphertext(ciphertext.encode())
        sealed = seal(
            self.relayer_enc_public,
            ciphertext.encode(),
            self.rng.fork("upload", issued.session_id),
        )

        upload = AssetUpload(
            source_id=self.source_id,
            caddr_token=issued.caddr_token,
            sealed_ciphertext=sealed.encode(),
        )
        height = self._append(upload, issued.session_id)
        self._set_status(
            Status.UPLOADED, f"account {issued.account_id}, amount {self._sensitive(entry.amount)}"
        )
        return height
