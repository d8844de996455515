#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Relayer role: opens sealed uploads and sums them without decrypting."""

import logging

from core.actor import ActorBase
from core.ledger import LedgerBase
from core.models import AggregateResult, AssetUpload, LedgerRecord, SessionAborted, SessionManifest
from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError
from crypto.envelope import EntityKeys, EnvelopeError, SealedEnvelope
from crypto.he import HECiphertext, HEPublicKey, KeyMismatchError
from literals import Status
from managers.aggregation import AggregationManager

logger = logging.getLogger(__name__)


class RelayerActor(ActorBase):
    """Aggregates a session once every manifest-listed source uploaded, or aborts it."""

    role = "relayer"

    def __init__(
        self,
        ledger: LedgerBase,
        rng: DeterministicRandom,
        keys: EntityKeys,
        he_public: HEPublicKey,
        timeout_heights: int,
        log_sensitive_output: bool = False,
    ):
        super().__init__("relayer", ledger, rng, log_sensitive_output)
        self.keys = keys
        self.he_public = he_public
        self.aggregation = AggregationManager(he_public, timeout_heights)

        self.recorder.holds_key("enc:relayer")
        self.recorder.holds_key("sig:relayer")

        self.observe("SessionManifest", self._on_manifest)
        self.observe("AssetUpload", self._on_upload)

    def _on_manifest(self, record: LedgerRecord, manifest: SessionManifest) -> None:
        self.recorder.saw_token(manifest.caddr_token)
        if self.aggregation.open_session(record.session_id, manifest, self.logical_time):
            return

        aborted = SessionAborted(
            caddr_token=manifest.caddr_token, reason="DuplicateToken", missing_sources=()
        )
        self._append(aborted, record.session_id)
        self._set_status(Status.TOKEN_REUSED, f"session {record.session_id.hex()}")

    def _on_upload(self, record: LedgerRecord, upload: AssetUpload) -> None:
        session = self.aggregation.sessions.get(record.session_id)
        if session is None:
            return

        if upload.caddr_token != session.manifest.caddr_token:
            self._set_status(Status.UPLOAD_REJECTED, "Caddr token differs from the manifest")
            return

        try:
            opened = self.recorder.open(
                self.keys.enc_private,
                SealedEnvelope.decode(upload.sealed_ciphertext),
                "upload",
                upload.caddr_token.hex(),
            )
            ciphertext = HECiphertext.decode(opened)
        except (EnvelopeError, EncodingError) as e:
            self._set_status(Status.UPLOAD_REJECTED, str(e))
            return

        if not self.aggregation.accept(
            record.session_id, upload.source_id, ciphertext, self.logical_time
        ):
            self._set_status(Status.UPLOAD_REJECTED, f"unexpected upload from {upload.source_id}")
            return

        if session.complete:
            self.relayer_aggregate(record.session_id)

    def relayer_aggregate(self, session_id: bytes) -> int:
        """Publishes the homomorphic sum of a complete session."""
        token = self.aggregation.sessions[session_id].manifest.caddr_token
        try:
            total = self.aggregation.aggregate(session_id)
        except KeyMismatchError as e:
            aborted = SessionAborted(caddr_token=token, reason="KeyMismatch", missing_sources=())
            self._set_status(Status.SESSION_ABORTED, str(e))
            return self._append(aborted, session_id)

        self.recorder.holds_ciphertext(total.encode())
        height = self._append(AggregateResult(caddr_token=token, ciphertext=total), session_id)
        self._set_status(Status.AGGREGATED)
        self._on_aggregated(token, total)
        return height

    def _on_aggregated(self, token: bytes, total: HECiphertext) -> None:
        pass

    def tick(self, logical_time: int) -> None:
        """relayer_tick: aborts sessions without progress for the timeout."""
        for session in self.aggregation.expired(logical_time):
            aborted = SessionAborted(
                caddr_token=session.manifest.caddr_token,
                reason="Timeout",
                missing_sources=session.missing,
            )
            self._append(aborted, session.session_id)
            self._set_status(Status.SESSION_ABORTED, f"missing {', '.join(session.missing)}")

    @property
    def pending(self) -> bool:
        return bool(self.aggregation.sessions)
