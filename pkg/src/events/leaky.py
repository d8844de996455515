#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Deliberately broken role variants that leak what their honest counterparts never learn.

Each variant holds a key its role must never hold and uses it, so the corresponding view
bound fails. They exist only as negative controls for the adversary harness.
"""

import logging

from typing_extensions import override

from core.models import AggregateResult, LedgerRecord, ServiceDecision, SessionManifest
from crypto.encoding import EncodingError
from crypto.envelope import EnvelopeError, SealedEnvelope
from crypto.he import HECiphertext, HEError, HEPrivateKey
from events.operator import OperatorActor
from events.relayer import RelayerActor
from events.source import TrustedSourceActor
from events.zkpsp import ZkpspActor

logger = logging.getLogger(__name__)


def _try_open_address(actor, enc_private: bytes, token: bytes) -> None:
    try:
        actor.recorder.open(enc_private, SealedEnvelope.decode(token), "address", token.hex())
    except (EnvelopeError, EncodingError) as e:
        logger.debug(f"{actor.name}: leaked open failed: {e}")


class LeakySource(TrustedSourceActor):
    """A source holding the operator's opening key, learning every Caddr address."""

    def __init__(self, *args, operator_enc_private: bytes, **kwargs):
        super().__init__(*args, **kwargs)
        self.operator_enc_private = operator_enc_private
        self.recorder.holds_key("enc:operator")

    @override
    def source_issue_challenge(self, record: LedgerRecord, manifest: SessionManifest) -> None:
        super().source_issue_challenge(record, manifest)
        if self.source_id in manifest.source_ids:
            _try_open_address(self, self.operator_enc_private, manifest.caddr_token)


class LeakyRelayer(RelayerActor):
    """A relayer holding the HE private key and decrypting every sum it builds."""

    def __init__(self, *args, he_private: HEPrivateKey, **kwargs):
        super().__init__(*args, **kwargs)
        self.he_private = he_private
        self.recorder.holds_key("he:zkpsp")

    @override
    def _on_aggregated(self, token: bytes, total: HECiphertext) -> None:
        self.recorder.he_decrypt(self.he_private, total, token.hex())


class LeakyZkpsp(ZkpspActor):
    """A ZKPSP holding the operator's opening key, learning the address behind each total."""

    def __init__(self, *args, operator_enc_private: bytes, **kwargs):
        super().__init__(*args, **kwargs)
        self.operator_enc_private = operator_enc_private
        self.recorder.holds_key("enc:operator")

    @override
    def _on_aggregate(self, record: LedgerRecord, aggregate: AggregateResult) -> None:
        super()._on_aggregate(record, aggregate)
        _try_open_address(self, self.operator_enc_private, aggregate.caddr_token)


class LeakyOperator(OperatorActor):
    """An operator holding the HE private key and decrypting aggregates off the ledger."""

    def __init__(self, *args, he_private: HEPrivateKey, **kwargs):
        super().__init__(*args, **kwargs)
        self.he_private = he_private
        self.aggregates: dict[bytes, HECiphertext] = {}
        self.recorder.holds_key("he:zkpsp")
        self.observe("AggregateResult", self._on_aggregate)
        self.observe("ServiceDecision", self._on_decision)

    def _on_aggregate(self, record: LedgerRecord, aggregate: AggregateResult) -> None:
        self.aggregates[aggregate.caddr_token] = aggregate.ciphertext

    def _on_decision(self, record: LedgerRecord, decision: ServiceDecision) -> None:
        ciphertext = self.aggregates.get(decision.caddr_token)
        if ciphertext is None:
            return
        try:
            self.recorder.he_decrypt(self.he_private, ciphertext, decision.caddr_token.hex())
        except HEError as e:
            logger.debug(f"{self.name}: leaked decrypt failed: {e}")

