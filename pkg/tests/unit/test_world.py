#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

import logging

import pytest

from core.actor import ProtocolError
from core.models import AssetUpload, ProofRequest, SessionAborted, SessionManifest
from core.structured_config import ScenarioConfig
from crypto.drbg import DeterministicRandom
from crypto.envelope import SealedEnvelope, open_envelope
from crypto.he import HECiphertext, he_decrypt
from literals import Status
from managers.adversary import run_malicious_suite
from managers.transcript import Transcript, verify_transcript
from world import TEST_WATERMARK, VeilsumWorld, run_scenario

logger = logging.getLogger(__name__)


def _payloads(world: VeilsumWorld, kind: str) -> list:
    return [record.decoded() for record in world.ledger if record.kind == kind]


@pytest.fixture()
def demo_world(demo_scenario, run_config) -> VeilsumWorld:
    world = VeilsumWorld(demo_scenario, run_config)
    world.run_session()
    return world


def test_demo_grants_tier_one(demo_world) -> None:
    # Given
    transcript = demo_world.transcript()

    # Then
    assert transcript.records[-1].kind == "ServiceDecision"
    assert [(line.user, line.outcome) for line in transcript.decisions] == [("alice", "tier:1")]
    assert transcript.exit_code == 0
    assert transcript.meta.watermark == TEST_WATERMARK
    assert verify_transcript(transcript) is None


def test_demo_record_sequence(demo_world) -> None:
    kinds = [record.kind for record in demo_world.ledger]
    assert kinds[0] == "SessionManifest"
    assert kinds.count("AuthChallenge") == kinds.count("AuthResponse") == 3
    assert kinds.count("AssetUpload") == 3
    assert kinds[-4:] == ["ServiceApplication", "ProofRequest", "ProofResponse", "ServiceDecision"]


def test_manifest_token_opens_to_the_user_address(demo_world) -> None:
    # Given
    (manifest,) = _payloads(demo_world, "SessionManifest")
    alice = demo_world.users[0]

    # When
    opened = open_envelope(
        demo_world.operator_keys.enc_private, SealedEnvelope.decode(manifest.caddr_token)
    )

    # Then
    assert isinstance(manifest, SessionManifest)
    assert manifest.source_ids == ("bank", "exchange", "auditor")
    assert opened == alice.address.value


def test_uploads_decrypt_to_source_amounts(demo_world) -> None:
    # Given
    (manifest,) = _payloads(demo_world, "SessionManifest")
    amounts = {}

    # When
    for upload in _payloads(demo_world, "AssetUpload"):
        assert isinstance(upload, AssetUpload)
        assert upload.caddr_token == manifest.caddr_token
        opened = open_envelope(
            demo_world.relayer_keys.enc_private, SealedEnvelope.decode(upload.sealed_ciphertext)
        )
        amounts[upload.source_id] = he_decrypt(demo_world.he_private, HECiphertext.decode(opened))

    # Then
    assert amounts == {"bank": 10, "exchange": 20, "auditor": 30}
    (aggregate,) = _payloads(demo_world, "AggregateResult")
    assert he_decrypt(demo_world.he_private, aggregate.ciphertext) == 60


def test_request_carries_the_tiers(demo_world) -> None:
    (request,) = _payloads(demo_world, "ProofRequest")
    assert isinstance(request, ProofRequest)
    assert request.statement.intervals == ((0, 50), (50, 100))


def test_replayed_application_serves_only_the_token_owner(demo_world) -> None:
    # Given
    (application,) = _payloads(demo_world, "ServiceApplication")
    alice = demo_world.users[0]
    height = len(demo_world.ledger)

    # When
    demo_world.ledger.append(
        kind="ServiceApplication",
        session_id=b"\x0e" * 16,
        author="user",
        payload=application.encode(),
        logical_time=demo_world.clock,
    )
    demo_world.operator.step(demo_world.clock + 1)

    # Then
    assert len(demo_world.ledger) == height + 1
    assert list(demo_world.operator.decisions) == [alice.address]


def test_same_seed_same_transcript(demo_scenario, run_config) -> None:
    first = run_scenario(demo_scenario, run_config).dumps()
    second = run_scenario(demo_scenario, run_config).dumps()
    assert first == second


def test_other_seed_other_transcript(demo_scenario, run_config) -> None:
    reseeded = demo_scenario.copy(update={"seed": 2})
    first = run_scenario(demo_scenario, run_config)
    second = run_scenario(reseeded, run_config)
    assert first.dumps() != second.dumps()
    assert [line.outcome for line in second.decisions] == ["tier:1"]


def test_second_session_uses_a_fresh_token(demo_world) -> None:
    # Given
    alice = demo_world.users[0]
    first_token, first_session = alice.caddr_token, alice.session_id

    # When
    alice.user_begin_session()

    # Then
    assert alice.caddr_token != first_token
    assert alice.session_id != first_session


@pytest.mark.parametrize(
    "name,expected",
    [
        ("lending", {"carol": "tier:1", "dave": "tier:0"}),
        ("cross-border", {"erin": "tier:1", "frank": "Denied(NoMatch)"}),
    ],
    ids=["lending", "cross-border"],
)
def test_bundled_scenarios(scenarios, run_config, name: str, expected: dict) -> None:
    # When
    transcript = run_scenario(scenarios(name), run_config)

    # Then
    assert {line.user: line.outcome for line in transcript.decisions} == expected
    assert verify_transcript(transcript) is None


def test_single_source_session(run_config) -> None:
    # Given
    scenario = ScenarioConfig(
        seed=5,
        tiers=[[0, 10], [10, 20]],
        sources=[
            {"source_id": "bank", "accounts": [{"account_id": "a", "amount": 10, "owner": "u"}]}
        ],
        users=[{"name": "u", "accounts": {"bank": "a"}}],
    )

    # When
    world = VeilsumWorld(scenario, run_config)
    transcript = world.run_session()

    # Then
    (aggregate,) = _payloads(world, "AggregateResult")
    assert he_decrypt(world.he_private, aggregate.ciphertext) == 10
    assert [line.outcome for line in transcript.decisions] == ["tier:0"]


def _random_scenario(rng: DeterministicRandom, seed: int) -> tuple[ScenarioConfig, str]:
    """A one-user scenario with 1-8 sources, 32-bit amounts and 2-5 tiers, plus its oracle."""
    amounts = [rng.randbelow(2**32) for _ in range(rng.randint(1, 8))]
    tier_count = rng.randint(2, 5)
    bounds: set[int] = set()
    while len(bounds) < 2 * tier_count:
        bounds.add(rng.randbelow(len(amounts) * 2**32))
    points = sorted(bounds)
    tiers = [(points[i], points[i + 1]) for i in range(0, len(points), 2)]

    total = sum(amounts)
    matched = [i for i, (lo, hi) in enumerate(tiers) if lo < total <= hi]
    expected = f"tier:{matched[0]}" if matched else "Denied(NoMatch)"

    holdings = {f"source{i}": f"account{i}" for i in range(len(amounts))}
    scenario = ScenarioConfig(
        seed=seed,
        tiers=tiers,
        sources=[
            {
                "source_id": f"source{i}",
                "accounts": [{"account_id": f"account{i}", "amount": amount, "owner": "u"}],
            }
            for i, amount in enumerate(amounts)
        ],
        users=[{"name": "u", "accounts": holdings}],
    )
    return scenario, expected


@pytest.mark.slow
def test_random_scenarios_match_plaintext_oracle(run_config) -> None:
    """The decided tier always matches the tier of the independently summed amounts."""
    rng = DeterministicRandom(50, "oracle")

    for seed in range(50):
        # Given
        scenario, expected = _random_scenario(rng, seed)

        # When
        transcript = run_scenario(scenario, run_config)

        # Then
        assert [line.outcome for line in transcript.decisions] == [expected], seed
        assert verify_transcript(Transcript.loads(transcript.dumps())) is None, seed


def _plain_encodings(value: int) -> list[bytes]:
    minimal = value.to_bytes((value.bit_length() + 7) // 8, "big")
    fixed = [value.to_bytes(width, order) for width in (4, 8) for order in ("big", "little")]
    return [minimal, str(value).encode(), *fixed]


def test_uploads_and_aggregates_carry_no_plaintext_amount(run_config) -> None:
    # Given
    amounts = [1_234_567, 3_456_789]
    scenario = ScenarioConfig(
        seed=6,
        tiers=[[0, 2**22], [2**22, 2**23]],
        sources=[
            {
                "source_id": f"s{i}",
                "accounts": [{"account_id": f"a{i}", "amount": amount, "owner": "u"}],
            }
            for i, amount in enumerate(amounts)
        ],
        users=[{"name": "u", "accounts": {"s0": "a0", "s1": "a1"}}],
    )

    # When
    transcript = run_scenario(scenario, run_config)

    # Then
    assert [line.outcome for line in transcript.decisions] == ["tier:1"]
    kinds = ("AssetUpload", "AggregateResult")
    in_transit = [record for record in transcript.records if record.kind in kinds]
    assert len(in_transit) == 3
    for record in in_transit:
        for value in (*amounts, sum(amounts)):
            for needle in _plain_encodings(value):
                assert needle not in record.payload, (record.height, value)


def test_unregistered_account_times_out(demo_scenario, run_config) -> None:
    # Given
    world = VeilsumWorld(demo_scenario.copy(update={"timeout_heights": 4}), run_config)
    bank = world.sources[0]
    bank.registry.clear()

    # When
    transcript = world.run_session()

    # Then
    assert Status.ACCOUNT_UNKNOWN in bank.statuses
    assert "AuthChallenge" not in [r.kind for r in world.ledger if r.author == bank.name]
    (aborted,) = _payloads(world, "SessionAborted")
    assert isinstance(aborted, SessionAborted)
    assert (aborted.reason, aborted.missing_sources) == ("Timeout", ("bank",))
    assert transcript.decisions == []
    assert transcript.exit_code == 2
    assert verify_transcript(transcript) is None


def test_profile_and_timeout_precedence(demo_scenario, run_config) -> None:
    # Given
    scenario = demo_scenario.copy(update={"timeout_heights": 9})

    # When
    world = VeilsumWorld(scenario, run_config.copy(update={"timeout_heights": 3}))

    # Then
    assert world.profile == "test"
    assert world.timeout_heights == 9
    assert world.log_sensitive_output
    assert VeilsumWorld(demo_scenario, run_config).timeout_heights == 64


def test_run_must_settle(demo_scenario, run_config, mocker) -> None:
    mocker.patch("world.MAX_ROUNDS", 2)
    with pytest.raises(ProtocolError):
        VeilsumWorld(demo_scenario, run_config).run_session()


def test_no_views_without_instrumentation(demo_scenario, run_config) -> None:
    config = run_config.copy(update={"instrumentation": False})
    assert run_scenario(demo_scenario, config).views == {}


def test_malicious_users_are_denied(malicious_transcript) -> None:
    # Given
    outcomes = {line.user: line.outcome for line in malicious_transcript.decisions}
    aborted = {line.user: line.reason for line in malicious_transcript.aborted}

    # Then
    assert outcomes == {
        "alice": "tier:1",
        "bob": "tier:0",
        "mallory": "Denied(NoAggregate)",
        "eve": "Denied(AddressMismatch)",
        "oscar": "Denied(AddressMismatch)",
    }
    assert aborted == {"mallory": "Timeout", "oscar": "DuplicateToken"}
    assert malicious_transcript.exit_code == 2
    assert verify_transcript(malicious_transcript) is None


def test_forged_authentication_gets_no_upload(malicious_transcript) -> None:
    # Given
    (mallory,) = [line for line in malicious_transcript.decisions if line.user == "mallory"]

    # Then
    uploads = [
        record
        for record in malicious_transcript.records
        if record.kind == "AssetUpload" and record.session_id.hex() == mallory.session_id
    ]
    assert uploads == []


def test_copied_token_does_not_change_the_victim_decision(malicious_scenario, run_config) -> None:
    # Given
    users = {user.name: user for user in malicious_scenario.users}
    alone = malicious_scenario.copy(update={"users": [users["bob"]]})
    copied = malicious_scenario.copy(update={"users": [users["bob"], users["oscar"]]})

    # When
    baseline = run_scenario(alone, run_config)
    attack = run_scenario(copied, run_config)

    # Then
    outcomes = {line.user: line for line in attack.decisions}
    assert outcomes["bob"].payload_hex == baseline.decisions[0].payload_hex
    assert outcomes["bob"].outcome == "tier:0"
    assert outcomes["oscar"].outcome == "Denied(AddressMismatch)"
    assert [(line.user, line.reason) for line in attack.aborted] == [("oscar", "DuplicateToken")]
    aggregates = [record for record in attack.records if record.kind == "AggregateResult"]
    assert [record.session_id.hex() for record in aggregates] == [outcomes["bob"].session_id]
    assert verify_transcript(attack) is None


def test_malicious_suite(malicious_scenario, run_config) -> None:
    # When
    report = run_malicious_suite(malicious_scenario, run_config)

    # Then
    assert report.passed, report.problems
    assert report.malicious == {
        "mallory": "Denied(NoAggregate)",
        "eve": "Denied(AddressMismatch)",
        "oscar": "Denied(AddressMismatch)",
    }
    assert report.attacker_uploads["mallory"] == 0
    assert report.baseline["alice"] == report.attack["alice"]
    assert report.baseline["bob"] == report.attack["bob"]
