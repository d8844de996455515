#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""User role: opens sessions, answers challenges and applies for service."""

import logging

from core.actor import ActorBase, ProtocolError
from core.ledger import LedgerBase
from core.models import (
    AggregateResult,
    AuthChallenge,
    LedgerRecord,
    ServiceApplication,
    ServiceDecision,
    SessionAborted,
    SessionManifest,
)
from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError
from crypto.envelope import EntityKeys, EnvelopeError, SealedEnvelope, address_of, seal
from literals import NONCE_SIZE, SESSION_ID_SIZE, Malice, Status
from managers.auth import answer_challenge

logger = logging.getLogger(__name__)


class UserActor(ActorBase):
    """A user holding an on-chain address and one key pair per registered account.

    `accounts` maps source id to the account id presented at that source. Malicious users
    present accounts they do not control (`forge-auth`), apply for service with another
    user's Caddr token (`foreign-caddr`), or open their own session under a copy of the
    victim's published token (`phase1-foreign-caddr`).
    """

    role = "user"

    def __init__(
        self,
        name: str,
        ledger: LedgerBase,
        rng: DeterministicRandom,
        keys: EntityKeys,
        account_keys: dict[str, EntityKeys],
        accounts: dict[str, str],
        operator_enc_public: bytes,
        malice: Malice = "none",
        log_sensitive_output: bool = False,
    ):
        super().__init__(name, ledger, rng, log_sensitive_output)
        self.keys = keys
        self.account_keys = account_keys
        self.accounts = accounts
        self.operator_enc_public = operator_enc_public
        self.malice: Malice = malice
        self.address = address_of(keys.sig_public)
        self.victim: "UserActor | None" = None

        self.sessions_opened = 0
        self.session_id: bytes | None = None
        self.caddr_token: bytes | None = None
        self.requester_token: bytes | None = None
        self.applied = False
        self.aborted = False
        self.decision: ServiceDecision | None = None
        self.decision_height: int | None = None

        self.recorder.holds_key(f"enc:{name}")
        self.recorder.holds_key(f"sig:{name}")

        self.observe("AuthChallenge", self.user_answer_challenge)
        self.observe("AggregateResult", self._on_aggregate)
        self.observe("SessionAborted", self._on_aborted)
        self.observe("ServiceDecision", self._on_decision)

    def tick(self, logical_time: int) -> None:
        """Opens the session on the first round, or once the victim has published a token."""
        if self.session_id is not None:
            return
        if self.malice == "phase1-foreign-caddr" and not (self.victim and self.victim.caddr_token):
            return
        self.user_begin_session()

    def user_begin_session(self) -> int:
        """Seals the address to the operator once and publishes the session manifest.

        Raises:
            ProtocolError: when the user lists no sources
        """
        if not self.accounts:
            raise ProtocolError(f"{self.name} has no source accounts")

        self.sessions_opened += 1
        attempt = str(self.sessions_opened)
        self.session_id = self.rng.fork("session", attempt).token_bytes(SESSION_ID_SIZE)
        if self.malice == "phase1-foreign-caddr" and self.victim and self.victim.caddr_token:
            self.caddr_token = self.victim.caddr_token
        else:
            token = seal(
                self.operator_enc_public, self.address.value, self.rng.fork("caddr", attempt)
            )
            self.caddr_token = token.encode()
        self.recorder.saw_token(self.caddr_token)

        manifest = SessionManifest(
            caddr_token=self.caddr_token,
            expected_sources=tuple(self.accounts.items()),
        )
        height = self._append(manifest, self.session_id)
        self._set_status(Status.SESSION_OPENED, f"{len(self.accounts)} sources")
        return height

    def user_answer_challenge(self, record: LedgerRecord, challenge: AuthChallenge) -> None:
        """Answers a challenge in the user's own session."""
        if record.session_id != self.session_id:
            return

        account_keys = self.account_keys.get(challenge.source_id)
        nonce = None
        if account_keys is not None:
            try:
                nonce = self.recorder.open(
                    account_keys.enc_private,
                    SealedEnvelope.decode(challenge.sealed_nonce),
                    "nonce",
                    record.session_id.hex(),
                )
            except (EnvelopeError, EncodingError) as e:
                logger.debug(f"{self.name}: cannot open challenge from {challenge.source_id}: {e}")

        if nonce is None:
            if self.malice != "forge-auth" or account_keys is None:
                self._set_status(Status.CHALLENGE_IGNORED, challenge.source_id)
                return
            # without the registered key the best a forger can do is sign a guess
            nonce = bytes(NONCE_SIZE)

        response = answer_challenge(account_keys, nonce, record.session_id, challenge.source_id)
        self._append(response, record.session_id)

    def _on_aggregate(self, record: LedgerRecord, aggregate: AggregateResult) -> None:
        """Applies for service once the session's aggregate is on the ledger."""
        if record.session_id == self.session_id:
            self.user_apply()

    def _on_aborted(self, record: LedgerRecord, aborted: SessionAborted) -> None:
        if record.session_id != self.session_id:
            return

        self.aborted = True
        if self.malice != "none":
            self.user_apply()

    def user_apply(self) -> int | None:
        """Publishes a service application carrying a Caddr token and a sealed requester token."""
        if self.applied or self.session_id is None or self.caddr_token is None:
            return None

        token = self.caddr_token
        if self.malice == "foreign-caddr" and self.victim and self.victim.caddr_token:
            token = self.victim.caddr_token

        sealed = seal(self.operator_enc_public, self.address.value, self.rng.fork("requester"))
        self.requester_token = sealed.encode()
        self.applied = True

        application = ServiceApplication(caddr_token=token, requester_token=self.requester_token)
        height = self._append(application, self.session_id)
        self._set_status(Status.APPLIED)
        return height

    def _on_decision(self, record: LedgerRecord, decision: ServiceDecision) -> None:
        if self.requester_token is None or decision.requester_token != self.requester_token:
            return

        self.decision = decision
        self.decision_height = record.height
        logger.info(f"{self.name}: decision {decision.outcome}")

    @property
    def pending(self) -> bool:
        if self.session_id is None:
            return True
        if self.aborted and not self.applied:
            return False
        return self.decision is None
