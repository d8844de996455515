#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Manager for proof verification and service decisions."""

import logging
from dataclasses import dataclass

from core.models import ProofResponse, ServiceDecision
from crypto.encoding import EncodingError
from crypto.envelope import Address
from crypto.rangeproof import GroupParams, ProofBundle, RangeStatement, Verdict, verify_bundle
from literals import DenialReason

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Outcome:
    """A tier index or a denial reason, with the verdict that produced it."""

    tier: int | None = None
    reason: DenialReason | None = None
    verdict: Verdict | None = None


def verdict_of(params: GroupParams, response: ProofResponse, statement: RangeStatement) -> Verdict:
    """Verifies a response's bundle; undecodable bundles are rejections."""
    try:
        bundle = ProofBundle.decode(params, response.bundle)
    except EncodingError as e:
        logger.debug(f"bundle does not decode: {e}")
        return Verdict(outcome="rejected")

    return verify_bundle(params, bundle, statement)


def outcome_of(verdict: Verdict) -> Outcome:
    """Maps a verdict onto a service outcome."""
    if verdict.outcome == "match":
        return Outcome(tier=verdict.matched_index, verdict=verdict)
    if verdict.outcome == "no-match":
        return Outcome(reason="NoMatch", verdict=verdict)
    return Outcome(reason="ProofInvalid", verdict=verdict)


class ProofManager:
    """Turns proof responses into service outcomes for the operator's statement."""

    def __init__(self, params: GroupParams, statement: RangeStatement):
        self.params = params
        self.statement = statement

    def decide(
        self,
        caddr_address: Address | None,
        requester_address: Address | None,
        response: ProofResponse,
    ) -> Outcome:
        """Binds the Caddr token to the requester first, then checks the proof.

        The requester token is not signed, so anyone can replay a copy of another user's token.
        The binding then passes, but the grant is recorded against the address sealed inside
        the token, so a replay only ever serves that address.

        Args:
            caddr_address: the address sealed in the Caddr token, None if it did not open
            requester_address: the address sealed in the requester token, None if it did not open
            response: the ZKPSP's response
        """
        if caddr_address is None or caddr_address != requester_address:
            return Outcome(reason="AddressMismatch")

        if response.status == "no-aggregate":
            return Outcome(reason="NoAggregate")

        return outcome_of(verdict_of(self.params, response, self.statement))


def consistent(
    params: GroupParams,
    statement: RangeStatement,
    response: ProofResponse | None,
    decision: ServiceDecision,
) -> bool:
    """Offline check that a decision is the one its response supports.

    Address bindings are sealed to the operator and cannot be re-checked offline, so
    `AddressMismatch` is accepted as is. Requester tokens carry no signature either: a
    transcript cannot show who published a replayed token.
    """
    if decision.reason == "AddressMismatch":
        return True
    if decision.reason == "Timeout":
        return response is None
    if response is None:
        return False
    if response.status == "no-aggregate":
        return decision.reason == "NoAggregate"

    expected = outcome_of(verdict_of(params, response, statement))
    return (expected.tier, expected.reason) == (decision.tier, decision.reason)
