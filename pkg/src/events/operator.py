#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Operator role: requests tier proofs and decides service."""

import logging
from dataclasses import dataclass

from core.actor import ActorBase
from core.ledger import LedgerBase
from core.models import (
    LedgerRecord,
    ProofRequest,
    ProofResponse,
    ServiceApplication,
    ServiceDecision,
)
from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError
from crypto.envelope import Address, EntityKeys, EnvelopeError, SealedEnvelope
from crypto.rangeproof import GroupParams, RangeStatement
from literals import Status
from managers.proof import Outcome, ProofManager

logger = logging.getLogger(__name__)


@dataclass
class PendingRequest:
    """A proof request waiting for its response."""

    session_id: bytes
    since: int


class OperatorActor(ActorBase):
    """Learns at most the requester's address and tier, never the total."""

    role = "operator"

    def __init__(
        self,
        ledger: LedgerBase,
        rng: DeterministicRandom,
        keys: EntityKeys,
        statement: RangeStatement,
        params: GroupParams,
        timeout_heights: int,
        log_sensitive_output: bool = False,
    ):
        super().__init__("operator", ledger, rng, log_sensitive_output)
        self.keys = keys
        self.statement = statement
        self.timeout_heights = timeout_heights
        self.proofs = ProofManager(params, statement)
        self.requests: dict[tuple[bytes, bytes], PendingRequest] = {}
        self.decided: set[tuple[bytes, bytes]] = set()
        self.decisions: dict[Address, ServiceDecision] = {}

        self.recorder.holds_key("enc:operator")
        self.recorder.holds_key("sig:operator")

        self.observe("ServiceApplication", self._on_application)
        self.observe("ProofResponse", self._on_response)

    def _on_application(self, record: LedgerRecord, application: ServiceApplication) -> None:
        self.operator_request_proof(
            application.caddr_token, application.requester_token, record.session_id
        )

    def operator_request_proof(
        self, caddr_token: bytes, requester_token: bytes, session_id: bytes
    ) -> int | None:
        """Publishes the tier statement for one application."""
        key = (caddr_token, requester_token)
        if key in self.requests or key in self.decided:
            return None

        self.recorder.saw_token(caddr_token)
        request = ProofRequest(
            caddr_token=caddr_token, requester_token=requester_token, statement=self.statement
        )
        height = self._append(request, session_id)
        self.requests[key] = PendingRequest(session_id=session_id, since=self.logical_time)
        self._set_status(Status.PROOF_REQUESTED, f"{len(self.statement.intervals)} tiers")
        return height

    def _open_address(self, token: bytes) -> Address | None:
        try:
            plaintext = self.recorder.open(
                self.keys.enc_private, SealedEnvelope.decode(token), "address", token.hex()
            )
        except (EnvelopeError, EncodingError) as e:
            logger.debug(f"token does not open: {e}")
            return None
        return Address(plaintext)

    def _on_response(self, record: LedgerRecord, response: ProofResponse) -> None:
        key = (response.caddr_token, response.requester_token)
        pending = self.requests.pop(key, None)
        if pending is None:
            return

        self.operator_decide(key, pending, response)

    def operator_decide(
        self, key: tuple[bytes, bytes], pending: PendingRequest, response: ProofResponse
    ) -> int:
        """Checks the Caddr binding, then the proof, and publishes the decision."""
        caddr_address = self._open_address(response.caddr_token)
        requester_address = self._open_address(response.requester_token)

        outcome = self.proofs.decide(caddr_address, requester_address, response)
        if outcome.verdict is not None:
            self.recorder.labels(response.caddr_token.hex(), outcome.verdict)

        return self._publish(key, pending, outcome, requester_address)

    def _publish(
        self,
        key: tuple[bytes, bytes],
        pending: PendingRequest,
        outcome: Outcome,
        requester_address: Address | None,
    ) -> int:
        decision = ServiceDecision(
            caddr_token=key[0], requester_token=key[1], tier=outcome.tier, reason=outcome.reason
        )
        height = self._append(decision, pending.session_id)
        self.decided.add(key)
        if requester_address is not None:
            self.decisions[requester_address] = decision

        status = Status.SERVICE_GRANTED if decision.granted else Status.SERVICE_DENIED
        self._set_status(status, decision.outcome)
        return height

    def tick(self, logical_time: int) -> None:
        """operator_tick: denies requests without a response for the timeout."""
        expired = [
            key
            for key, pending in self.requests.items()
            if logical_time - pending.since >= self.timeout_heights
        ]
        for key in expired:
            pending = self.requests.pop(key)
            self._publish(key, pending, Outcome(reason="Timeout"), None)

    @property
    def pending(self) -> bool:
        return bool(self.requests)
