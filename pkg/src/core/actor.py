#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Actor base class and knowledge instrumentation."""

import logging
from abc import ABC
from typing import Callable

from core.ledger import LedgerBase
from core.models import EntityView, LedgerRecord, Payload
from crypto.drbg import DeterministicRandom
from crypto.envelope import SealedEnvelope, open_envelope
from crypto.he import HECiphertext, HEPrivateKey, he_decrypt
from crypto.rangeproof import GroupParams, ProofBundle, RangeStatement, Verdict, respond
from literals import RecordKind, Status

logger = logging.getLogger(__name__)

OpenPurpose = str
RecordHandler = Callable[[LedgerRecord, Payload], None]


class ProtocolError(Exception):
    """Base exception for protocol actor failures."""


class KnowledgeRecorder:
    """Records everything an entity computes from secret material, at the moment it does.

    Every `he_decrypt`, `open` and `respond` performed by an actor goes through this object, so
    the resulting view is complete by construction and the counters can be audited against it.
    """

    def __init__(self, entity: str, role: str):
        self.view = EntityView(entity=entity, role=role)

    def _count(self, name: str) -> None:
        self.view.counters[name] = self.view.counters.get(name, 0) + 1

    def he_decrypt(self, private_key: HEPrivateKey, ciphertext: HECiphertext, context: str) -> int:
        """Decrypts an aggregate; the total is recorded under the Caddr token `context`."""
        value = he_decrypt(private_key, ciphertext)
        self._count("he_decrypt")
        self.view.decrypt_log.append(context)
        self.view.exact_totals[context] = value
        return value

    def open(
        self, enc_private: bytes, envelope: SealedEnvelope, purpose: OpenPurpose, context: str
    ) -> bytes:
        """Opens an envelope and records what the plaintext means for this entity.

        Args:
            enc_private: the opening key
            envelope: the sealed envelope
            purpose: `address` for sealed addresses, `upload` for sealed ciphertexts,
                `nonce` for challenges
            context: the token (hex) the plaintext is bound to
        """
        self._count("open")
        self.view.open_log.append(f"{purpose}:{context}")
        plaintext = open_envelope(enc_private, envelope)

        if purpose == "address":
            self.view.plain_addresses[context] = plaintext.hex()
        elif purpose == "upload":
            self.view.held_ciphertexts.append(plaintext.hex())

        return plaintext

    def respond(
        self,
        params: GroupParams,
        v: int,
        statement: RangeStatement,
        rng: DeterministicRandom,
        context: str,
    ) -> ProofBundle:
        """Builds a proof bundle for the total bound to `context`."""
        bundle = respond(params, v, statement, rng)
        self._count("respond")
        self.view.respond_log.append(context)
        return bundle

    def saw_token(self, token: bytes) -> None:
        """Records a Caddr token the entity processed."""
        self.view.caddr_tokens.add(token.hex())

    def holds_ciphertext(self, data: bytes) -> None:
        """Records an HE ciphertext the entity stored."""
        self.view.held_ciphertexts.append(data.hex())

    def holds_key(self, role_tag: str) -> None:
        """Records a private key the entity holds, by role tag."""
        self.view.private_keys_held.add(role_tag)

    def holds_amount(self, account_id: str, amount: int, owner: str) -> None:
        """Records a plaintext account amount from a registry."""
        self.view.plaintext_amounts[account_id] = amount
        self.view.registry_accounts[account_id] = owner

    def labels(self, context: str, verdict: Verdict) -> None:
        """Records the interval labels the entity learned for `context`."""
        self.view.interval_labels[context] = (
            list(verdict.labels) if verdict.labels is not None else None
        )


class ActorBase(ABC):
    """A ledger-driven state machine.

    Actors react to records through handlers registered with `observe`, append only through
    `_append`, and see the world exclusively through the ledger.
    """

    role: str = ""

    def __init__(
        self,
        name: str,
        ledger: LedgerBase,
        rng: DeterministicRandom,
        log_sensitive_output: bool = False,
    ):
        self.name = name
        self.ledger = ledger
        self.rng = rng
        self.log_sensitive_output = log_sensitive_output
        self.recorder = KnowledgeRecorder(entity=name, role=self.role)
        self.statuses: list[Status] = []
        self.logical_time = 0
        self._cursor = 0
        self._handlers: dict[RecordKind, list[RecordHandler]] = {}

    def observe(self, kind: RecordKind, handler: RecordHandler) -> None:
        """Registers `handler` for every new record of `kind`."""
        self._handlers.setdefault(kind, []).append(handler)

    def step(self, logical_time: int) -> None:
        """Delivers the records appended since the last step, then runs `tick`."""
        self.logical_time = logical_time
        records = self.ledger.poll(self._cursor)
        self._cursor += len(records)

        for record in records:
            handlers = self._handlers.get(record.kind, [])
            if not handlers:
                continue
            payload = record.decoded()
            for handler in handlers:
                handler(record, payload)

        self.tick(logical_time)

    def tick(self, logical_time: int) -> None:
        """Runs once per scheduler round after record delivery."""
        pass

    @property
    def pending(self) -> bool:
        """True while the actor still expects to act."""
        return False

    @property
    def view(self) -> EntityView:
        """The recorded knowledge of this actor."""
        return self.recorder.view

    def _append(self, payload: Payload, session_id: bytes) -> int:
        return self.ledger.append(
            kind=payload.kind,
            session_id=session_id,
            author=self.author,
            payload=payload.encode(),
            logical_time=self.logical_time,
        )

    @property
    def author(self) -> str:
        """Role tag written into authored records."""
        return self.role

    def _set_status(self, key: Status, detail: str = "") -> None:
        """Logs a status at its declared level and keeps it."""
        message = f"{self.name}: {key.value.message}" + (f" ({detail})" if detail else "")
        getattr(logger, key.value.log_level.lower())(message)
        self.statuses.append(key)

    def _sensitive(self, value: object) -> str:
        return str(value) if self.log_sensitive_output else "***"
