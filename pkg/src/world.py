#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Scenario orchestrator: derives keys, wires the protocol roles and runs the scheduler."""

import logging
from typing import Iterable

from core.actor import ActorBase, ProtocolError
from core.models import CompromiseTarget, SessionAborted
from core.structured_config import RunConfig, ScenarioConfig
from crypto.drbg import DeterministicRandom
from crypto.envelope import EntityKeys, address_of, env_keygen
from crypto.he import he_keygen
from crypto.rangeproof import group_setup
from events.leaky import LeakyOperator, LeakyRelayer, LeakySource, LeakyZkpsp
from events.operator import OperatorActor
from events.relayer import RelayerActor
from events.source import RegistryEntry, TrustedSourceActor
from events.user import UserActor
from events.zkpsp import ZkpspActor
from ledger import Ledger
from literals import MAX_ROUNDS, PROFILES, Profile
from managers.transcript import AbortedLine, DecisionLine, Transcript, TranscriptMeta

logger = logging.getLogger(__name__)

TEST_WATERMARK = "TEST PROFILE: reduced key sizes, not for production use"


class VeilsumWorld:
    """One protocol run over a shared ledger.

    All key material and actor randomness is forked from the scenario seed by entity name, so
    adding or removing an actor never changes another actor's randomness. `leaky` names
    compromise targets (`source:<id>`, `relayer`, `zkpsp`, `operator`) to replace with their
    deliberately leaking variants.
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        config: RunConfig,
        leaky: Iterable[str] = (),
    ):
        self.scenario = scenario
        self.profile: Profile = scenario.profile or config.profile
        self.timeout_heights = scenario.timeout_heights or config.timeout_heights
        self.instrumentation = config.instrumentation
        self.leaky = {CompromiseTarget.parse(target).entity for target in leaky}
        self.log_sensitive_output = self.profile == "test"

        self.root = DeterministicRandom(scenario.seed)
        self.ledger = Ledger()
        self.clock = 0

        self._derive_keys()
        self._build_actors()

    def _keys(self, *labels: str) -> EntityKeys:
        return env_keygen(self.profile, self.root.fork("keys", *labels))

    def _actor_rng(self, role: str, name: str) -> DeterministicRandom:
        return self.root.fork("actor", role, name)

    def _derive_keys(self) -> None:
        key_sizes = PROFILES[self.profile]
        self.params = group_setup(self.profile)
        self.he_public, self.he_private = he_keygen(
            key_sizes.he_bits, self.root.fork("zkpsp", "he")
        )
        self.operator_keys = self._keys("operator")
        self.relayer_keys = self._keys("relayer")
        self.source_keys = {
            source.source_id: self._keys("source", source.source_id)
            for source in self.scenario.sources
        }
        self.user_keys = {user.name: self._keys("user", user.name) for user in self.scenario.users}

        # one key pair per (owner, source); sources never learn the owner's address key
        self.account_keys: dict[tuple[str, str], EntityKeys] = {}
        for source in self.scenario.sources:
            for account in source.accounts:
                self.account_keys.setdefault(
                    (account.owner, source.source_id),
                    self._keys("account", account.owner, source.source_id),
                )

        addresses = [address_of(keys.sig_public) for keys in self.user_keys.values()]
        if len(set(addresses)) != len(addresses):
            raise ProtocolError("two users derived the same address")

    def _build_actors(self) -> None:
        self.users: list[UserActor] = []
        for user in self.scenario.users:
            self.users.append(
                UserActor(
                    name=user.name,
                    ledger=self.ledger,
                    rng=self._actor_rng("user", user.name),
                    keys=self.user_keys[user.name],
                    account_keys={
                        source_id: self._keys("account", user.name, source_id)
                        for source_id in user.accounts
                    },
                    accounts=dict(user.accounts),
                    operator_enc_public=self.operator_keys.enc_public,
                    malice=user.malice,
                    log_sensitive_output=self.log_sensitive_output,
                )
            )
        by_name = {user.name: user for user in self.users}
        for user, config in zip(self.users, self.scenario.users):
            if config.victim is not None:
                user.victim = by_name[config.victim]

        self.sources: list[TrustedSourceActor] = []
        for source in self.scenario.sources:
            name = f"source:{source.source_id}"
            registry = {}
            for account in source.accounts:
                owner_keys = self.account_keys[(account.owner, source.source_id)]
                registry[account.account_id] = RegistryEntry(
                    amount=account.amount,
                    owner=account.owner,
                    owner_sig_public=owner_keys.sig_public,
                    owner_enc_public=owner_keys.enc_public,
                )
            kwargs = dict(
                source_id=source.source_id,
                ledger=self.ledger,
                rng=self._actor_rng("source", source.source_id),
                keys=self.source_keys[source.source_id],
                registry=registry,
                he_public=self.he_public,
                relayer_enc_public=self.relayer_keys.enc_public,
                log_sensitive_output=self.log_sensitive_output,
            )
            if name in self.leaky:
                self.sources.append(
                    LeakySource(**kwargs, operator_enc_private=self.operator_keys.enc_private)
                )
            else:
                self.sources.append(TrustedSourceActor(**kwargs))

        relayer_kwargs = dict(
            ledger=self.ledger,
            rng=self._actor_rng("relayer", "relayer"),
            keys=self.relayer_keys,
            he_public=self.he_public,
            timeout_heights=self.timeout_heights,
            log_sensitive_output=self.log_sensitive_output,
        )
        self.relayer = (
            LeakyRelayer(**relayer_kwargs, he_private=self.he_private)
            if "relayer" in self.leaky
            else RelayerActor(**relayer_kwargs)
        )

        zkpsp_kwargs = dict(
            ledger=self.ledger,
            rng=self._actor_rng("zkpsp", "zkpsp"),
            he_public=self.he_public,
            he_private=self.he_private,
            params=self.params,
            log_sensitive_output=self.log_sensitive_output,
        )
        self.zkpsp = (
            LeakyZkpsp(**zkpsp_kwargs, operator_enc_private=self.operator_keys.enc_private)
            if "zkpsp" in self.leaky
            else ZkpspActor(**zkpsp_kwargs)
        )

        operator_kwargs = dict(
            ledger=self.ledger,
            rng=self._actor_rng("operator", "operator"),
            keys=self.operator_keys,
            statement=self.scenario.statement,
            params=self.params,
            timeout_heights=self.timeout_heights,
            log_sensitive_output=self.log_sensitive_output,
        )
        self.operator = (
            LeakyOperator(**operator_kwargs, he_private=self.he_private)
            if "operator" in self.leaky
            else OperatorActor(**operator_kwargs)
        )

    @property
    def actors(self) -> list[ActorBase]:
        """Scheduling order: users, sources, relayer, ZKPSP, operator."""
        return [*self.users, *self.sources, self.relayer, self.zkpsp, self.operator]

    def run_session(self) -> Transcript:
        """Steps every actor once per round until a round appends nothing and no actor waits.

        Each round advances the logical clock by one, so pending sessions age even when the
        ledger is quiet.

        Raises:
            ProtocolError: when the run does not settle within the round limit
        """
        logger.info(
            f"running {len(self.users)} users against {len(self.sources)} sources "
            f"(profile {self.profile}, seed {self.scenario.seed})"
        )

        for round_number in range(1, MAX_ROUNDS + 1):
            self.clock = round_number
            height = len(self.ledger)
            for actor in self.actors:
                actor.step(self.clock)

            if len(self.ledger) == height and not any(actor.pending for actor in self.actors):
                break
        else:
            raise ProtocolError(f"run did not settle within {MAX_ROUNDS} rounds")

        logger.info(f"run settled after {self.clock} rounds at height {len(self.ledger)}")
        return self.transcript()

    def transcript(self) -> Transcript:
        """The transcript of the run so far."""
        transcript = Transcript(
            meta=self._meta(),
            records=list(self.ledger),
            digests=self.ledger.digests,
        )

        for user in self.users:
            if user.decision is not None and user.decision_height is not None:
                transcript.decisions.append(
                    DecisionLine(
                        user=user.name,
                        session_id=(user.session_id or b"").hex(),
                        height=user.decision_height,
                        outcome=user.decision.outcome,
                        payload_hex=user.decision.encode().hex(),
                    )
                )

        names = {user.session_id: user.name for user in self.users}
        for record in self.ledger:
            if record.kind != "SessionAborted":
                continue
            aborted = record.decoded()
            assert isinstance(aborted, SessionAborted)
            transcript.aborted.append(
                AbortedLine(
                    user=names.get(record.session_id, ""),
                    session_id=record.session_id.hex(),
                    height=record.height,
                    reason=aborted.reason,
                    missing=list(aborted.missing_sources),
                )
            )

        if self.instrumentation:
            transcript.views = {actor.name: actor.view for actor in self.actors}

        return transcript

    def _meta(self) -> TranscriptMeta:
        accounts = {}
        source_accounts = {}
        for source in self.scenario.sources:
            source_accounts[source.source_id] = [a.account_id for a in source.accounts]
            for account in source.accounts:
                keys = self.account_keys[(account.owner, source.source_id)]
                accounts[account.account_id] = {
                    "owner_sig_public": keys.sig_public.hex(),
                    "owner_enc_public": keys.enc_public.hex(),
                }

        return TranscriptMeta(
            seed=self.scenario.seed,
            profile=self.profile,
            timeout_heights=self.timeout_heights,
            tiers=[list(pair) for pair in self.scenario.tiers],
            he_public=self.he_public.encode().hex(),
            operator_enc_public=self.operator_keys.enc_public.hex(),
            relayer_enc_public=self.relayer_keys.enc_public.hex(),
            sources={
                source_id: keys.enc_public.hex() for source_id, keys in self.source_keys.items()
            },
            source_accounts=source_accounts,
            accounts=accounts,
            watermark="" if PROFILES[self.profile].production else TEST_WATERMARK,
        )


def run_scenario(
    scenario: ScenarioConfig, config: RunConfig, leaky: Iterable[str] = ()
) -> Transcript:
    """Builds a world for `scenario` and runs it to completion."""
    return VeilsumWorld(scenario, config, leaky=leaky).run_session()
