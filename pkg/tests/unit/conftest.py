#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

from pathlib import Path
from unittest.mock import patch

import pytest
import yaml

from core.structured_config import RunConfig, ScenarioConfig
from crypto.drbg import DeterministicRandom
from crypto.envelope import EntityKeys, env_keygen
from crypto.he import HEPrivateKey, HEPublicKey, he_keygen, he_keypair_from_primes
from crypto.rangeproof import GroupParams, group_setup
from ledger import Ledger
from managers.transcript import Transcript
from world import run_scenario

ROOT = Path(__file__).resolve().parents[2]
SCENARIOS = ROOT / "scenarios"
CONFIG = yaml.safe_load((ROOT / "config.yaml").read_text())


@pytest.fixture(autouse=True)
def tenacity_wait():
    with patch("tenacity.nap.time") as patched_nap:
        yield patched_nap


@pytest.fixture(autouse=True)
def no_profile_env(monkeypatch):
    """Runs every test with the profile taken from the options file."""
    monkeypatch.delenv("VEILSUM_PROFILE", raising=False)
    yield


@pytest.fixture()
def rng() -> DeterministicRandom:
    return DeterministicRandom(1234)


@pytest.fixture(scope="session")
def toy_keys() -> tuple[HEPublicKey, HEPrivateKey]:
    """p = 5, q = 7: n = 35."""
    return he_keypair_from_primes(5, 7)


@pytest.fixture(scope="session")
def he_keys() -> tuple[HEPublicKey, HEPrivateKey]:
    """A test-profile key pair."""
    return he_keygen(512, DeterministicRandom(7, "he"))


@pytest.fixture(scope="session")
def params() -> GroupParams:
    return group_setup("test")


@pytest.fixture(scope="session")
def alice_keys() -> EntityKeys:
    return env_keygen("test", DeterministicRandom(11, "alice"))


@pytest.fixture(scope="session")
def bob_keys() -> EntityKeys:
    return env_keygen("test", DeterministicRandom(11, "bob"))


@pytest.fixture()
def ledger() -> Ledger:
    return Ledger()


@pytest.fixture()
def run_config() -> RunConfig:
    return RunConfig(**{key: option["default"] for key, option in CONFIG["options"].items()})


def load_scenario(name: str) -> ScenarioConfig:
    return ScenarioConfig.from_file(SCENARIOS / f"{name}.yaml")


@pytest.fixture()
def demo_scenario() -> ScenarioConfig:
    return load_scenario("demo")


@pytest.fixture()
def malicious_scenario() -> ScenarioConfig:
    return load_scenario("malicious")


@pytest.fixture(scope="session")
def demo_transcript() -> Transcript:
    """The bundled demo scenario under the default options, run once per session."""
    config = RunConfig(**{key: option["default"] for key, option in CONFIG["options"].items()})
    return run_scenario(load_scenario("demo"), config)


@pytest.fixture(scope="session")
def malicious_transcript() -> Transcript:
    config = RunConfig(**{key: option["default"] for key, option in CONFIG["options"].items()})
    return run_scenario(load_scenario("malicious"), config)


@pytest.fixture()
def scenarios():
    """Loader for the bundled scenario files, by name."""
    return load_scenario
