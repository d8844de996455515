#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Manager for single-entity compromise analysis over completed transcripts."""

import logging
from dataclasses import dataclass, field

from core.models import (
    CompromiseTarget,
    EntityView,
    LedgerRecord,
    LinkageClaim,
    SessionManifest,
)
from core.structured_config import RunConfig, ScenarioConfig
from crypto.encoding import encode_fixed, encode_int
from managers.transcript import Transcript
from world import run_scenario

logger = logging.getLogger(__name__)

# amounts below this collide with unrelated payload bytes too easily to count as evidence
MIN_SEARCHABLE_AMOUNT = 2**20
FIXED_WIDTH = 8


class HarnessError(Exception):
    """Base exception for the adversary harness."""


class UnknownTargetError(HarnessError):
    """Raised for a compromise target that is not part of the run."""


@dataclass
class BoundsReport:
    """Which bounds were checked for a target and which fields violated them."""

    target: str
    checked: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when no bound was violated."""
        return not self.violations

    def to_dict(self) -> dict:
        """Report rendering."""
        return {
            "target": self.target,
            "passed": self.passed,
            "checked": self.checked,
            "violations": self.violations,
        }


@dataclass
class AttackReport:
    """Bounds and linkage outcome for one compromised entity."""

    bounds: BoundsReport
    view: EntityView
    linkage: LinkageClaim | None
    counters_consistent: bool

    @property
    def passed(self) -> bool:
        """True when bounds hold, no linkage was found and the counters audit."""
        return self.bounds.passed and self.linkage is None and self.counters_consistent

    def to_dict(self) -> dict:
        """Report rendering: a view summary, never the held secrets themselves."""
        view = self.view
        return {
            "target": self.bounds.target,
            "bounds": self.bounds.to_dict(),
            "view": {
                "plaintext_amounts": len(view.plaintext_amounts),
                "exact_totals": len(view.exact_totals),
                "plain_addresses": len(view.addresses),
                "caddr_tokens": len(view.caddr_tokens),
                "held_ciphertexts": len(view.held_ciphertexts),
                "interval_labels": len(view.interval_labels),
                "private_keys_held": sorted(view.private_keys_held),
            },
            "linkage": "none" if self.linkage is None else _claim_dict(self.linkage),
            "counters_consistent": self.counters_consistent,
        }


def _claim_dict(claim: LinkageClaim) -> dict:
    return {
        "address": claim.address,
        "claimed_amounts": claim.claimed_amounts,
        "claimed_total": claim.claimed_total,
        "evidence": claim.evidence,
    }


@dataclass
class MaliciousSuiteReport:
    """Baseline against attack run, per user."""

    baseline: dict[str, str]
    attack: dict[str, str]
    malicious: dict[str, str]
    attacker_uploads: dict[str, int]
    problems: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when every honest outcome is unchanged and every attacker is denied."""
        return not self.problems

    def to_dict(self) -> dict:
        """Report rendering."""
        return {
            "passed": self.passed,
            "malicious": self.malicious,
            "attacker_uploads": self.attacker_uploads,
            "problems": self.problems,
        }


def _parse_target(target: CompromiseTarget | str) -> CompromiseTarget:
    if isinstance(target, CompromiseTarget):
        return target
    try:
        return CompromiseTarget.parse(target)
    except ValueError as e:
        raise UnknownTargetError(str(e))


class AdversaryManager:
    """Compromises entities of a completed, instrumented run and reports what they learned."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self.records = transcript.records

    def targets(self) -> list[CompromiseTarget]:
        """Every single-entity target of the run: each source first, then the other roles."""
        sources = [
            CompromiseTarget(kind="source", source_id=source_id)
            for source_id in self.transcript.meta.sources
        ]
        return sources + [CompromiseTarget(kind=k) for k in ("relayer", "zkpsp", "operator")]

    def compromise(self, target: CompromiseTarget | str) -> EntityView:
        """The recorded view of one entity.

        Raises:
            UnknownTargetError: when the target does not parse or is not part of the run
            HarnessError: when the run was not instrumented
        """
        target = _parse_target(target)
        if not self.transcript.views:
            raise HarnessError("transcript carries no views; rerun with instrumentation")

        view = self.transcript.views.get(target.entity)
        if view is None:
            raise UnknownTargetError(f"{target} is not part of this run")
        return view

    def assert_view_bounds(self, target: CompromiseTarget, view: EntityView) -> BoundsReport:
        """Structural leakage bounds for the target's role."""
        report = BoundsReport(target=str(target))

        def check(name: str, violated: bool) -> None:
            report.checked.append(name)
            if violated:
                report.violations.append(name)

        keys = view.private_keys_held
        match target.kind:
            case "source":
                own = {f"enc:{target.entity}", f"sig:{target.entity}"}
                accounts = self.transcript.meta.source_accounts
                registry = set(accounts.get(target.source_id or "", []))
                check("plain_addresses", bool(view.plain_addresses))
                check("exact_totals", bool(view.exact_totals))
                check("plaintext_amounts", not set(view.plaintext_amounts) <= registry)
                check("private_keys_held", not keys <= own)
            case "relayer":
                check("plaintext_amounts", bool(view.plaintext_amounts))
                check("plain_addresses", bool(view.plain_addresses))
                check("exact_totals", bool(view.exact_totals))
                check("private_keys_held", "he:zkpsp" in keys)
            case "zkpsp":
                check("plain_addresses", bool(view.plain_addresses))
                check("plaintext_amounts", bool(view.plaintext_amounts))
                check("private_keys_held", "enc:operator" in keys)
            case "operator":
                check("exact_totals", bool(view.exact_totals))
                check("plaintext_amounts", bool(view.plaintext_amounts))
                check("private_keys_held", "he:zkpsp" in keys)

        if report.violations:
            logger.warning(f"{target}: bounds violated on {', '.join(report.violations)}")
        return report

    def attempt_linkage(self, view: EntityView) -> LinkageClaim | None:
        """Binds an exact amount or total to a plaintext address, when the view allows it.

        The attacker joins the view with the public ledger three ways: by Caddr token (address
        and total under the same token), through session manifests (address token and the
        account ids whose amounts the view holds), and by searching the payloads of sessions
        with a known address for the encodings of any known amount.
        """
        for token, address in view.plain_addresses.items():
            if token in view.exact_totals:
                return LinkageClaim(
                    address=address,
                    claimed_total=view.exact_totals[token],
                    evidence=f"token join on {token[:16]}",
                )

        manifests = self._manifests()
        for session_id, manifest in manifests.items():
            address = view.plain_addresses.get(manifest.caddr_token.hex())
            if address is None:
                continue
            amounts = {
                account_id: view.plaintext_amounts[account_id]
                for _, account_id in manifest.expected_sources
                if account_id in view.plaintext_amounts
            }
            if amounts:
                return LinkageClaim(
                    address=address,
                    claimed_amounts=amounts,
                    evidence=f"manifest join in session {session_id.hex()}",
                )

        known = {
            value
            for value in (*view.plaintext_amounts.values(), *view.exact_totals.values())
            if value >= MIN_SEARCHABLE_AMOUNT
        }
        for record in self.records:
            if record.kind not in ("AssetUpload", "AggregateResult"):
                continue
            manifest = manifests.get(record.session_id)
            address = view.plain_addresses.get(manifest.caddr_token.hex()) if manifest else None
            if address is None:
                continue
            for value in known:
                if _contains_encoding(record, value):
                    return LinkageClaim(
                        address=address,
                        claimed_total=value,
                        evidence=f"amount encoding in {record.kind} at height {record.height}",
                    )

        return None

    def _manifests(self) -> dict[bytes, SessionManifest]:
        manifests = {}
        for record in self.records:
            if record.kind == "SessionManifest":
                payload = record.decoded()
                assert isinstance(payload, SessionManifest)
                manifests[record.session_id] = payload
        return manifests

    def attack(self, target: CompromiseTarget | str) -> AttackReport:
        """Compromise, bound check, linkage attempt and counter audit for one target."""
        target = _parse_target(target)
        view = self.compromise(target)
        report = AttackReport(
            bounds=self.assert_view_bounds(target, view),
            view=view,
            linkage=self.attempt_linkage(view),
            counters_consistent=audit_counters(view),
        )
        logger.info(f"{target}: {'pass' if report.passed else 'FAIL'}")
        return report

    def collusion(self, targets: list[CompromiseTarget | str]) -> LinkageClaim | None:
        """Linkage over the merged views of several targets; reported, never asserted safe."""
        return self.attempt_linkage(merge_views([self.compromise(t) for t in targets]))


def _contains_encoding(record: LedgerRecord, value: int) -> bool:
    haystack = record.payload
    needles = [encode_int(value)]
    if value.bit_length() <= 8 * FIXED_WIDTH:
        needles.append(encode_fixed(value, FIXED_WIDTH))
    return any(needle in haystack for needle in needles)


def merge_views(views: list[EntityView]) -> EntityView:
    """Union of several views, as held by colluding entities."""
    merged = EntityView(entity="+".join(v.entity for v in views), role="collusion")
    for view in views:
        merged.plaintext_amounts |= view.plaintext_amounts
        merged.exact_totals |= view.exact_totals
        merged.plain_addresses |= view.plain_addresses
        merged.caddr_tokens |= view.caddr_tokens
        merged.held_ciphertexts += view.held_ciphertexts
        merged.interval_labels |= view.interval_labels
        merged.private_keys_held |= view.private_keys_held
        merged.registry_accounts |= view.registry_accounts
        for name, count in view.counters.items():
            merged.counters[name] = merged.counters.get(name, 0) + count
        merged.decrypt_log += view.decrypt_log
        merged.open_log += view.open_log
        merged.respond_log += view.respond_log
    return merged


def audit_counters(view: EntityView) -> bool:
    """Every counted `he_decrypt`, `open` and `respond` call left its entry in the view."""
    consistent = (
        view.counters.get("he_decrypt", 0) == len(view.decrypt_log)
        and view.counters.get("open", 0) == len(view.open_log)
        and view.counters.get("respond", 0) == len(view.respond_log)
        and all(context in view.exact_totals for context in view.decrypt_log)
    )
    if not consistent:
        logger.warning(f"{view.entity}: instrumentation counters disagree with the view")
    return consistent


def _outcomes(transcript: Transcript) -> dict[str, str]:
    return {line.user: line.payload_hex for line in transcript.decisions}


def run_malicious_suite(scenario: ScenarioConfig, config: RunConfig) -> MaliciousSuiteReport:
    """Runs the scenario with and without its malicious users and compares honest outcomes.

    Raises:
        HarnessError: when the scenario has no malicious users
    """
    malicious = {user.name: user.malice for user in scenario.users if user.malice != "none"}
    if not malicious:
        raise HarnessError("scenario has no malicious users")

    honest_users = [user for user in scenario.users if user.malice == "none"]
    baseline_scenario = scenario.copy(update={"users": honest_users})

    baseline = run_scenario(baseline_scenario, config)
    attack = run_scenario(scenario, config)

    report = MaliciousSuiteReport(
        baseline=_outcomes(baseline),
        attack=_outcomes(attack),
        malicious={},
        attacker_uploads={},
    )

    attack_outcomes = {line.user: line.outcome for line in attack.decisions}
    sessions = {line.user: line.session_id for line in attack.decisions + attack.aborted}
    for name, malice in malicious.items():
        outcome = attack_outcomes.get(name, "none")
        report.malicious[name] = outcome
        if not outcome.startswith("Denied"):
            report.problems.append(f"{name} ({malice}) was not denied: {outcome}")

        session_id = sessions.get(name)
        uploads = sum(
            1
            for record in attack.records
            if record.kind == "AssetUpload" and record.session_id.hex() == session_id
        )
        report.attacker_uploads[name] = uploads
        if malice == "forge-auth" and uploads:
            report.problems.append(f"{name} obtained {uploads} uploads with forged authentication")
        if malice == "phase1-foreign-caddr" and any(
            record.kind == "AggregateResult" and record.session_id.hex() == session_id
            for record in attack.records
        ):
            report.problems.append(f"{name} obtained an aggregate under a copied Caddr token")

    for user in honest_users:
        if report.baseline.get(user.name) != report.attack.get(user.name):
            report.problems.append(f"{user.name}'s decision changed under attack")

    return report
