#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

import logging
from dataclasses import dataclass
from typing import Any

import pytest
from pydantic import ValidationError
from typing_extensions import override

from core.structured_config import RunConfig, ScenarioConfig, amount_bound
from literals import CONFIG_PATH

logger = logging.getLogger(__name__)

BASE = {
    "seed": 3,
    "tiers": [[0, 50], [50, 100]],
    "sources": [
        {"source_id": "bank", "accounts": [{"account_id": "a1", "amount": 10, "owner": "alice"}]},
    ],
    "users": [{"name": "alice", "accounts": {"bank": "a1"}}],
}


@dataclass
class ScenarioOverride:
    """Helper dataclass for overriding scenario values in parametrized tests."""

    key: str
    value: Any
    valid: bool = True

    @override
    def __str__(self):
        state = "VALID" if self.valid else "INVALID"
        return f"{self.key}: {self.value} -> {state}"


def test_run_config_defaults() -> None:
    # When
    config = RunConfig.load(CONFIG_PATH)

    # Then
    assert config.profile == "test"
    assert config.log_level == "INFO"
    assert config.timeout_heights == 64
    assert config.instrumentation


def test_run_config_precedence(monkeypatch) -> None:
    # Given
    monkeypatch.setenv("VEILSUM_PROFILE", "full")

    # When
    from_env = RunConfig.load(CONFIG_PATH)
    from_cli = RunConfig.load(CONFIG_PATH, profile="test", log_level=None)

    # Then
    assert from_env.profile == "full"
    assert from_cli.profile == "test"
    assert from_cli.log_level == "INFO"


def test_run_config_rejects_bad_values() -> None:
    with pytest.raises(ValidationError):
        RunConfig.load(CONFIG_PATH, profile="huge")
    with pytest.raises(ValidationError):
        RunConfig.load(CONFIG_PATH, timeout_heights=0)


def test_scenario_valid() -> None:
    # When
    scenario = ScenarioConfig(**BASE)

    # Then
    assert scenario.statement.intervals == ((0, 50), (50, 100))
    assert scenario.timeout_heights is None


@pytest.mark.parametrize(
    "override",
    [
        ScenarioOverride("tiers", [[0, 60], [50, 100]], valid=False),
        ScenarioOverride("tiers", [[50, 100], [0, 50]], valid=False),
        ScenarioOverride("tiers", [], valid=False),
        ScenarioOverride("tiers", [[0, 100]]),
        ScenarioOverride("sources", [], valid=False),
        ScenarioOverride("users", [], valid=False),
        ScenarioOverride("seed", -1, valid=False),
        ScenarioOverride("seed", 2**64, valid=False),
        ScenarioOverride("timeout_heights", 0, valid=False),
        ScenarioOverride("timeout_heights", 8),
        ScenarioOverride("profile", "full"),
        ScenarioOverride("profile", "tiny", valid=False),
        ScenarioOverride("unknown", 1, valid=False),
        ScenarioOverride("users", [{"name": "alice", "accounts": {}}], valid=False),
        ScenarioOverride("users", [{"name": "alice", "accounts": {"bank": "zz"}}], valid=False),
        ScenarioOverride("users", [{"name": "bob", "accounts": {"bank": "a1"}}], valid=False),
        ScenarioOverride(
            "users",
            [{"name": "alice", "accounts": {"bank": "a1"}, "malice": "forge-auth"}],
            valid=False,
        ),
        ScenarioOverride(
            "users",
            [{"name": "alice", "accounts": {"bank": "a1"}, "victim": "alice"}],
            valid=False,
        ),
    ],
    ids=str,
)
def test_scenario_overrides(override: ScenarioOverride) -> None:
    # Given
    raw = BASE | {override.key: override.value}

    # Then
    if override.valid:
        assert ScenarioConfig(**raw)[override.key] is not None
        return

    with pytest.raises(ValidationError):
        ScenarioConfig(**raw)


def test_duplicate_ids() -> None:
    # Given
    source = BASE["sources"][0]

    # Then
    with pytest.raises(ValidationError):
        ScenarioConfig(**(BASE | {"sources": [source, source]}))
    with pytest.raises(ValidationError):
        ScenarioConfig(**(BASE | {"users": BASE["users"] * 2}))


def test_total_must_fit_the_modulus() -> None:
    # Given
    huge = {"account_id": "a1", "amount": amount_bound(), "owner": "alice"}

    # Then
    with pytest.raises(ValidationError, match="exceeds"):
        ScenarioConfig(**(BASE | {"sources": [{"source_id": "bank", "accounts": [huge]}]}))


def test_source_id_separator() -> None:
    with pytest.raises(ValidationError):
        ScenarioConfig(**(BASE | {"sources": [{"source_id": "a:b", "accounts": []}]}))


def test_bundled_scenarios_validate(demo_scenario, malicious_scenario) -> None:
    assert len(demo_scenario.sources) == 3
    assert {user.malice for user in malicious_scenario.users} == {
        "none",
        "forge-auth",
        "foreign-caddr",
        "phase1-foreign-caddr",
    }
