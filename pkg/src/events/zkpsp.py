#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""ZKP service provider role: decrypts totals and proves their tier."""

import logging

from core.actor import ActorBase
from core.ledger import LedgerBase
from core.models import AggregateResult, LedgerRecord, ProofRequest, ProofResponse
from crypto.drbg import DeterministicRandom
from crypto.he import HECiphertext, HEPrivateKey, HEPublicKey
from crypto.rangeproof import GroupParams
from literals import Status

logger = logging.getLogger(__name__)


class ZkpspActor(ActorBase):
    """Holds the HE private key; never sees a plaintext address."""

    role = "zkpsp"

    def __init__(
        self,
        ledger: LedgerBase,
        rng: DeterministicRandom,
        he_public: HEPublicKey,
        he_private: HEPrivateKey,
        params: GroupParams,
        log_sensitive_output: bool = False,
    ):
        super().__init__("zkpsp", ledger, rng, log_sensitive_output)
        self.he_public = he_public
        self.he_private = he_private
        self.params = params
        self.aggregates: dict[bytes, HECiphertext] = {}

        self.recorder.holds_key("he:zkpsp")

        self.observe("AggregateResult", self._on_aggregate)
        self.observe("ProofRequest", self._on_request)

    def _on_aggregate(self, record: LedgerRecord, aggregate: AggregateResult) -> None:
        self.recorder.saw_token(aggregate.caddr_token)
        self.recorder.holds_ciphertext(aggregate.ciphertext.encode())
        if aggregate.caddr_token in self.aggregates:
            self._set_status(Status.DUPLICATE_AGGREGATE, f"height {record.height}")
            return
        self.aggregates[aggregate.caddr_token] = aggregate.ciphertext

    def _on_request(self, record: LedgerRecord, request: ProofRequest) -> None:
        self.zkpsp_respond(record, request)

    def zkpsp_respond(self, record: LedgerRecord, request: ProofRequest) -> int:
        """Decrypts the total for the request's token and proves which tier contains it."""
        token = request.caddr_token
        self.recorder.saw_token(token)
        ciphertext = self.aggregates.get(token)

        if ciphertext is None:
            response = ProofResponse(
                caddr_token=token,
                requester_token=request.requester_token,
                status="no-aggregate",
                bundle=b"",
            )
            self._set_status(Status.NO_AGGREGATE)
            return self._append(response, record.session_id)

        total = self.recorder.he_decrypt(self.he_private, ciphertext, token.hex())
        bundle = self.recorder.respond(
            self.params,
            total,
            request.statement,
            self.rng.fork("respond", token, request.requester_token),
            token.hex(),
        )
        response = ProofResponse(
            caddr_token=token,
            requester_token=request.requester_token,
            status="ok",
            bundle=bundle.encode(self.params),
        )
        height = self._append(response, record.session_id)
        self._set_status(Status.PROOF_SENT, f"total {self._sensitive(total)}")
        return height
