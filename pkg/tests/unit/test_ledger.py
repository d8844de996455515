#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.ledger import LedgerError
from core.models import (
    AggregateResult,
    LedgerRecord,
    MalformedPayloadError,
    ServiceDecision,
    SessionManifest,
    decode_payload,
)
from crypto.drbg import DeterministicRandom
from crypto.envelope import seal
from crypto.he import he_encrypt
from ledger import Ledger

SESSION_A = bytes(16)
SESSION_B = b"\x01" * 16


@pytest.fixture(scope="module")
def token(alice_keys) -> bytes:
    return seal(alice_keys.enc_public, b"\x00" * 20, DeterministicRandom(1)).encode()


@pytest.fixture(scope="module")
def manifest(token) -> bytes:
    return SessionManifest(caddr_token=token, expected_sources=(("bank", "bank-a"),)).encode()


def test_append_heights(ledger, manifest) -> None:
    # When
    first = ledger.append("SessionManifest", SESSION_A, "user", manifest, 1)
    second = ledger.append("SessionManifest", SESSION_B, "user", manifest, 1)

    # Then
    assert (first, second) == (0, 1)
    assert ledger.height == 2
    assert ledger[0].payload == manifest
    assert ledger.audit()


@pytest.mark.parametrize(
    "kind,session_id,payload",
    [
        ("Unknown", SESSION_A, b""),
        ("SessionManifest", b"\x00" * 15, None),
        ("SessionManifest", SESSION_A, b"\x00\x00"),
    ],
    ids=["unknown-kind", "short-session", "malformed-payload"],
)
def test_append_rejects(ledger, manifest, kind, session_id, payload) -> None:
    with pytest.raises(MalformedPayloadError):
        ledger.append(kind, session_id, "user", manifest if payload is None else payload, 1)
    assert len(ledger) == 0


def test_logical_time_is_monotone(ledger, manifest) -> None:
    ledger.append("SessionManifest", SESSION_A, "user", manifest, 5)
    with pytest.raises(LedgerError):
        ledger.append("SessionManifest", SESSION_B, "user", manifest, 4)


def test_query(ledger, manifest, token, he_keys) -> None:
    # Given
    rng = DeterministicRandom(2)
    aggregate = AggregateResult(caddr_token=token, ciphertext=he_encrypt(he_keys[0], 3, rng))
    ledger.append("SessionManifest", SESSION_A, "user", manifest, 1)
    for _ in range(3):
        ledger.append("AggregateResult", SESSION_A, "relayer", aggregate.encode(), 2)
    ledger.append("SessionManifest", SESSION_B, "user", manifest, 2)

    # Then
    assert [r.height for r in ledger.query(SESSION_A, "AggregateResult")] == [1, 2, 3]
    assert len(ledger.query(SESSION_A)) == 4
    assert ledger.query(b"\x02" * 16) == []


@given(cuts=st.lists(st.integers(min_value=0, max_value=5), max_size=6))
def test_polls_partition_the_stream(manifest, cuts: list[int]) -> None:
    # Given
    ledger = Ledger()
    seen: list[LedgerRecord] = []
    cursor = 0

    # When
    for count in cuts:
        for _ in range(count):
            ledger.append("SessionManifest", SESSION_A, "user", manifest, 1)
        batch = ledger.poll(cursor)
        cursor += len(batch)
        seen += batch

    # Then
    assert [r.height for r in seen] == list(range(len(ledger)))
    assert ledger.poll(len(ledger)) == []


def test_poll_negative(ledger) -> None:
    with pytest.raises(LedgerError):
        ledger.poll(-1)


def test_dump_and_load(ledger, manifest) -> None:
    # Given
    for _ in range(5):
        ledger.append("SessionManifest", SESSION_A, "user", manifest, 1)

    # When
    reloaded = Ledger.load(LedgerRecord.from_dict(r.to_dict()) for r in ledger)

    # Then
    assert reloaded.dump() == ledger.dump()
    assert reloaded.digests == ledger.digests
    assert len(ledger.poll(0)) == 5


def test_load_rejects_gaps(ledger, manifest) -> None:
    ledger.append("SessionManifest", SESSION_A, "user", manifest, 1)
    record = ledger[0]
    gap = LedgerRecord(2, record.kind, record.session_id, record.author, record.payload, 1)
    with pytest.raises(LedgerError):
        Ledger.load([record, gap])


def test_decision_needs_exactly_one_outcome(token) -> None:
    with pytest.raises(ValueError):
        ServiceDecision(caddr_token=token, requester_token=token)
    with pytest.raises(ValueError):
        ServiceDecision(caddr_token=token, requester_token=token, tier=1, reason="NoMatch")


def test_payload_must_be_canonical(token) -> None:
    # Given
    decision = ServiceDecision(caddr_token=token, requester_token=token, reason="NoMatch")

    # Then
    assert decode_payload("ServiceDecision", decision.encode()) == decision
    with pytest.raises(MalformedPayloadError):
        decode_payload("ServiceDecision", decision.encode() + b"\x00")
    with pytest.raises(MalformedPayloadError):
        decode_payload("ServiceDecision", decision.encode().replace(b"NoMatch", b"Whatever"))
