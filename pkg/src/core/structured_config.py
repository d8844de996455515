#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Structured configuration for veilsum runs and scenarios."""
import logging
import os
from pathlib import Path

import yaml
from pydantic import BaseModel, root_validator, validator

from crypto.rangeproof import RangeStatement, StatementInvalidError, group_setup
from literals import (
    CONFIG_PATH,
    PROFILE_ENV_VAR,
    PROFILES,
    LogLevel,
    Malice,
    Profile,
)

logger = logging.getLogger(__name__)

SEED_LIMIT = 2**64


def amount_bound() -> int:
    """Exclusive upper bound on any user's total, valid under every profile."""
    he_bound = min(2 ** (spec.he_bits - 1) for spec in PROFILES.values())
    group_bound = min(group_setup(profile).order_q for profile in PROFILES)
    return min(he_bound, group_bound)


class BaseConfigModel(BaseModel):
    """Class to be used for defining the structured configuration options."""

    class Config:
        extra = "forbid"

    @validator("*", pre=True)
    @classmethod
    def blank_string(cls, value):
        """Check for empty strings."""
        if value == "":
            return None
        return value


class RunConfig(BaseConfigModel):
    """Run options, as declared in `config.yaml`."""

    profile: Profile
    log_level: LogLevel
    timeout_heights: int
    instrumentation: bool

    @validator("timeout_heights")
    @classmethod
    def positive_timeout(cls, value: int) -> int:
        """Timeouts are counted in scheduler ticks and must be positive."""
        if value < 1:
            raise ValueError("timeout_heights must be at least 1")
        return value

    @classmethod
    def load(cls, path: str | Path = CONFIG_PATH, **overrides) -> "RunConfig":
        """Loads option defaults, then the profile environment variable, then `overrides`.

        Args:
            path: the options file
            overrides: values from the command line; `None` values are ignored
        """
        with open(path) as f:
            options = yaml.safe_load(f).get("options", {})

        values = {key: option.get("default") for key, option in options.items()}
        if env_profile := os.environ.get(PROFILE_ENV_VAR):
            values["profile"] = env_profile

        values |= {key: value for key, value in overrides.items() if value is not None}
        return cls(**values)


class AccountConfig(BaseConfigModel):
    """An account registered at a trusted source."""

    account_id: str
    amount: int
    owner: str

    @validator("amount")
    @classmethod
    def nonnegative_amount(cls, value: int) -> int:
        """Amounts are in minimal currency units."""
        if value < 0:
            raise ValueError("amount must be nonnegative")
        return value


class SourceConfig(BaseConfigModel):
    """A trusted source and its account registry."""

    source_id: str
    accounts: list[AccountConfig]

    @validator("source_id")
    @classmethod
    def no_separator(cls, value: str) -> str:
        """Source ids appear in role tags such as `source:<id>`."""
        if ":" in value or "/" in value:
            raise ValueError("source_id must not contain ':' or '/'")
        return value


class UserConfig(BaseConfigModel):
    """A user, the accounts they present per source, and their behaviour."""

    name: str
    accounts: dict[str, str]
    malice: Malice = "none"
    victim: str | None = None

    @validator("accounts")
    @classmethod
    def nonempty_accounts(cls, value: dict[str, str]) -> dict[str, str]:
        """A session needs at least one source."""
        if not value:
            raise ValueError("user must list at least one source account")
        return value

    @root_validator(skip_on_failure=True)
    @classmethod
    def victim_for_malice(cls, values):
        """Malicious users name their victim; honest ones do not."""
        if values["malice"] != "none" and not values.get("victim"):
            raise ValueError(f"malice {values['malice']} needs a victim")
        if values["malice"] == "none" and values.get("victim"):
            raise ValueError("an honest user has no victim")
        if values.get("victim") == values["name"]:
            raise ValueError("a user cannot be their own victim")
        return values


class ScenarioConfig(BaseConfigModel):
    """A complete protocol scenario."""

    profile: Profile | None = None
    seed: int = 0
    timeout_heights: int | None = None
    tiers: list[tuple[int, int]]
    sources: list[SourceConfig]
    users: list[UserConfig]

    @validator("seed")
    @classmethod
    def seed_range(cls, value: int) -> int:
        """Seeds are 64-bit nonnegative integers."""
        if not 0 <= value < SEED_LIMIT:
            raise ValueError("seed must be a 64-bit nonnegative integer")
        return value

    @validator("timeout_heights")
    @classmethod
    def positive_timeout(cls, value: int | None) -> int | None:
        """Timeouts are counted in scheduler ticks and must be positive."""
        if value is not None and value < 1:
            raise ValueError("timeout_heights must be at least 1")
        return value

    @validator("tiers")
    @classmethod
    def disjoint_tiers(cls, value: list[tuple[int, int]]) -> list[tuple[int, int]]:
        """Tiers must form a valid range statement."""
        try:
            RangeStatement.from_pairs(value)
        except StatementInvalidError as e:
            raise ValueError(str(e))
        return value

    @validator("sources")
    @classmethod
    def unique_sources(cls, value: list[SourceConfig]) -> list[SourceConfig]:
        """At least one source; source and account ids are unique."""
        if not value:
            raise ValueError("scenario needs at least one trusted source")

        source_ids = [source.source_id for source in value]
        if len(set(source_ids)) != len(source_ids):
            raise ValueError("source ids must be unique")

        account_ids = [account.account_id for source in value for account in source.accounts]
        if len(set(account_ids)) != len(account_ids):
            raise ValueError("account ids must be unique")

        return value

    @validator("users")
    @classmethod
    def resolvable_users(cls, value: list[UserConfig], values) -> list[UserConfig]:
        """Every account reference resolves, totals fit the profile, victims exist."""
        if not value:
            raise ValueError("scenario needs at least one user")

        names = [user.name for user in value]
        if len(set(names)) != len(names):
            raise ValueError("user names must be unique")

        if "sources" not in values:
            return value

        registry = {
            (source.source_id, account.account_id): account
            for source in values["sources"]
            for account in source.accounts
        }
        bound = amount_bound()

        for user in value:
            if user.victim is not None and user.victim not in names:
                raise ValueError(f"user {user.name} names unknown victim {user.victim}")

            # forge-auth users present the victim's accounts as their own
            owner = user.victim if user.malice == "forge-auth" else user.name
            total = 0
            for source_id, account_id in user.accounts.items():
                account = registry.get((source_id, account_id))
                if account is None:
                    raise ValueError(f"user {user.name}: no account {account_id} at {source_id}")
                if account.owner != owner:
                    raise ValueError(f"user {user.name}: account {account_id} is not {owner}'s")
                total += account.amount

            if total >= bound:
                raise ValueError(f"user {user.name}: total exceeds the homomorphic modulus")

        return value

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        """Loads and validates a YAML scenario file."""
        with open(path) as f:
            raw = yaml.safe_load(f)

        if not isinstance(raw, dict):
            raise ValueError(f"{path} does not hold a scenario mapping")

        return cls(**raw)

    @property
    def statement(self) -> RangeStatement:
        """The operator's tiers as a range statement."""
        return RangeStatement.from_pairs(self.tiers)
