#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Manager for transcript files and their offline re-verification."""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NoReturn

from core.models import (
    AggregateResult,
    AssetUpload,
    AuthChallenge,
    AuthResponse,
    EntityView,
    LedgerRecord,
    Payload,
    ProofRequest,
    ProofResponse,
    ServiceApplication,
    ServiceDecision,
    SessionAborted,
    SessionManifest,
    decode_payload,
)
from crypto.encoding import EncodingError
from crypto.envelope import SealedEnvelope, check_public_keys, enc_fingerprint
from crypto.he import HEError, HEPublicKey
from crypto.rangeproof import GroupParams, RangeProofError, RangeStatement, group_setup
from ledger import record_digest
from literals import TOOL_VERSION, Profile
from managers.auth import verify_response_offline
from managers.proof import consistent

logger = logging.getLogger(__name__)

DUMP_SEPARATORS = (",", ":")


class TranscriptError(Exception):
    """Base exception for transcript handling."""


class TranscriptParseError(TranscriptError):
    """Raised when a transcript file is truncated or not in the dump format."""


@dataclass
class TranscriptMeta:
    """Run metadata and every public key re-verification needs."""

    seed: int
    profile: Profile
    timeout_heights: int
    tiers: list[list[int]]
    he_public: str
    operator_enc_public: str
    relayer_enc_public: str
    sources: dict[str, str]
    source_accounts: dict[str, list[str]]
    accounts: dict[str, dict[str, str]]
    watermark: str = ""
    tool_version: str = TOOL_VERSION

    @property
    def statement(self) -> RangeStatement:
        """The operator's tiers."""
        return RangeStatement.from_pairs([tuple(pair) for pair in self.tiers])

    @property
    def params(self) -> GroupParams:
        """The commitment group of the run profile."""
        return group_setup(self.profile)


@dataclass(frozen=True)
class DecisionLine:
    """A user's final decision and where it sits on the ledger."""

    user: str
    session_id: str
    height: int
    outcome: str
    payload_hex: str


@dataclass(frozen=True)
class AbortedLine:
    """A session the relayer aborted."""

    user: str
    session_id: str
    height: int
    reason: str
    missing: list[str]


@dataclass
class Transcript:
    """A completed run: ledger dump, decisions, per-entity views and integrity digests."""

    meta: TranscriptMeta
    records: list[LedgerRecord]
    decisions: list[DecisionLine] = field(default_factory=list)
    aborted: list[AbortedLine] = field(default_factory=list)
    views: dict[str, EntityView] = field(default_factory=dict)
    digests: list[str] = field(default_factory=list)
    raw_lines: list[str] | None = None

    def _body_lines(self) -> list[str]:
        def line(raw: dict) -> str:
            return json.dumps(raw, separators=DUMP_SEPARATORS)

        lines = [line({"type": "meta"} | asdict(self.meta))]
        lines += [record.to_line() for record in self.records]
        lines += [line({"type": "decision"} | asdict(decision)) for decision in self.decisions]
        lines += [line({"type": "aborted"} | asdict(aborted)) for aborted in self.aborted]
        lines += [
            line({"type": "view", "entity": entity, "view": view.to_dict()})
            for entity, view in self.views.items()
        ]
        lines.append(line({"type": "digests", "records": self.digests}))
        return lines

    def to_lines(self) -> list[str]:
        """The dump, closed by an `end` line carrying the SHA-256 of every preceding line."""
        lines = self._body_lines()
        end = {"type": "end", "sha256": file_digest(lines)}
        return lines + [json.dumps(end, separators=DUMP_SEPARATORS)]

    def dumps(self) -> str:
        """The transcript file contents."""
        return "\n".join(self.to_lines()) + "\n"

    def write(self, path: str | Path) -> None:
        """Writes the transcript file."""
        Path(path).write_text(self.dumps())
        logger.info(f"transcript written to {path}")

    @classmethod
    def read(cls, path: str | Path) -> "Transcript":
        """Reads and parses a transcript file.

        Raises:
            TranscriptParseError: when the file is truncated or malformed
        """
        try:
            text = Path(path).read_text()
        except (OSError, UnicodeDecodeError) as e:
            raise TranscriptParseError(f"cannot read {path}: {e}")
        return cls.loads(text)

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        """Parses transcript text; semantic checks are left to `TranscriptVerifier`.

        Raises:
            TranscriptParseError: when the text is truncated or malformed
        """
        if not text.endswith("\n"):
            raise TranscriptParseError("transcript is truncated")

        lines = text[:-1].split("\n")
        parsed = []
        for number, line in enumerate(lines, start=1):
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise TranscriptParseError(f"line {number} is not JSON: {e}")
            if not isinstance(raw, dict):
                raise TranscriptParseError(f"line {number} is not an object")
            parsed.append(raw)

        if not parsed or parsed[0].get("type") != "meta":
            raise TranscriptParseError("transcript does not start with a meta line")
        if parsed[-1].get("type") != "end":
            raise TranscriptParseError("transcript is truncated: no end line")

        try:
            meta_raw = dict(parsed[0])
            del meta_raw["type"]
            meta = TranscriptMeta(**meta_raw)
        except TypeError as e:
            raise TranscriptParseError(f"meta line is malformed: {e}")

        transcript = cls(meta=meta, records=[], raw_lines=lines)
        position = 1
        while position < len(parsed) - 1 and "type" not in parsed[position]:
            height = position - 1
            try:
                transcript.records.append(LedgerRecord.from_dict(parsed[position]))
            except (EncodingError, KeyError, TypeError, ValueError) as e:
                raise TranscriptParseError(f"record at height {height} is malformed: {e}")
            position += 1

        for raw in parsed[position:-1]:
            kind = raw.pop("type", None)
            try:
                match kind:
                    case "decision":
                        transcript.decisions.append(DecisionLine(**raw))
                    case "aborted":
                        transcript.aborted.append(AbortedLine(**raw))
                    case "view":
                        transcript.views[raw["entity"]] = EntityView.from_dict(raw["view"])
                    case "digests":
                        transcript.digests = list(raw["records"])
                    case _:
                        raise TranscriptParseError(f"unexpected line type {kind}")
            except (KeyError, TypeError) as e:
                raise TranscriptParseError(f"{kind} line is malformed: {e}")

        return transcript

    @property
    def exit_code(self) -> int:
        """0 when every session completed, 2 when any session was aborted."""
        return 2 if self.aborted else 0


def file_digest(lines: list[str]) -> str:
    """SHA-256 over lines joined as they appear in the file."""
    return hashlib.sha256(("\n".join(lines) + "\n").encode()).hexdigest()


@dataclass(frozen=True)
class VerificationFailure:
    """The first check that failed, with the record height when one applies."""

    check: str
    detail: str
    height: int | None = None

    def __str__(self) -> str:
        where = f"height {self.height}" if self.height is not None else "file"
        return f"{self.check} failed at {where}: {self.detail}"


class _Failed(Exception):
    def __init__(self, failure: VerificationFailure):
        super().__init__(str(failure))
        self.failure = failure


@dataclass
class _SessionState:
    manifest: SessionManifest | None = None
    challenged: set[str] = field(default_factory=set)
    authenticated: set[str] = field(default_factory=set)
    uploaded: set[str] = field(default_factory=set)
    aggregated: bool = False
    applications: set[tuple[bytes, bytes]] = field(default_factory=set)


class TranscriptVerifier:
    """Re-checks a transcript using only the public data embedded in it.

    Checks run in a fixed order and stop at the first failure, so the reported height is the
    earliest offending record.
    """

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self.meta = transcript.meta
        self.sessions: dict[bytes, _SessionState] = {}
        self.requests: dict[tuple[bytes, bytes], ProofRequest] = {}
        self.responses: dict[tuple[bytes, bytes], ProofResponse] = {}
        self.owner_keys: dict[str, tuple[bytes, bytes]] = {}
        self.aggregated_tokens: set[bytes] = set()

    def verify(self) -> VerificationFailure | None:
        """Returns the first failure, or None when every check passes."""
        try:
            self._check_meta()
            self._check_digests()
            previous_time = 0
            for height, record in enumerate(self.transcript.records):
                if record.height != height:
                    detail = f"expected {height}, found {record.height}"
                    self._fail("height density", detail, height)
                if record.logical_time < previous_time:
                    self._fail("logical time", "logical time went backwards", height)
                previous_time = record.logical_time
                self._check_record(record)
            self._check_decision_lines()
            self._check_file_digest()
        except _Failed as e:
            logger.info(f"verification: {e.failure}")
            return e.failure

        return None

    def _fail(self, check: str, detail: str, height: int | None = None) -> NoReturn:
        raise _Failed(VerificationFailure(check=check, detail=detail, height=height))

    def _check_meta(self) -> None:
        try:
            self.he_public = HEPublicKey.decode(bytes.fromhex(self.meta.he_public))
            self.operator_fp = enc_fingerprint(bytes.fromhex(self.meta.operator_enc_public))
            self.relayer_fp = enc_fingerprint(bytes.fromhex(self.meta.relayer_enc_public))
            self.statement = self.meta.statement
            self.params = self.meta.params
        except (EncodingError, HEError, RangeProofError, KeyError, TypeError, ValueError) as e:
            self._fail("metadata", f"public parameters do not decode: {e}")

        if not isinstance(self.meta.accounts, dict):
            self._fail("metadata", "account registry is not a mapping")
        for account_id, keys in self.meta.accounts.items():
            try:
                owner_enc_public = bytes.fromhex(keys["owner_enc_public"])
                owner_sig_public = bytes.fromhex(keys["owner_sig_public"])
                check_public_keys(owner_enc_public, owner_sig_public)
            except (KeyError, TypeError, ValueError) as e:
                self._fail("metadata", f"owner keys of {account_id} do not decode: {e!r}")
            self.owner_keys[account_id] = (enc_fingerprint(owner_enc_public), owner_sig_public)

    def _check_digests(self) -> None:
        digests = self.transcript.digests
        for height, record in enumerate(self.transcript.records):
            if height >= len(digests) or record_digest(record) != digests[height]:
                self._fail("record digest", "record differs from its append-time digest", height)
        if len(digests) != len(self.transcript.records):
            self._fail("record digest", "digest count differs from the record count")

    def _check_record(self, record: LedgerRecord) -> None:
        height = record.height
        try:
            payload = decode_payload(record.kind, record.payload)
        except EncodingError as e:
            self._fail("payload", str(e), height)

        self._check_author(record, payload)
        session = self.sessions.setdefault(record.session_id, _SessionState())

        match payload:
            case SessionManifest():
                self._check_manifest(record, session, payload)
            case AuthChallenge():
                self._check_challenge(record, session, payload)
            case AuthResponse():
                self._check_response(record, session, payload)
            case AssetUpload():
                self._check_upload(record, session, payload)
            case AggregateResult():
                self._check_aggregate(record, session, payload)
            case SessionAborted():
                self._require_manifest(record, session)
                self._check_token(record, session, payload.caddr_token)
            case ServiceApplication():
                self._check_operator_tokens(record, payload.caddr_token, payload.requester_token)
                session.applications.add((payload.caddr_token, payload.requester_token))
            case ProofRequest():
                self._check_request(record, session, payload)
            case ProofResponse():
                key = (payload.caddr_token, payload.requester_token)
                if key not in self.requests:
                    self._fail("phase ordering", "proof response without a request", height)
                self.responses[key] = payload
            case ServiceDecision():
                self._check_decision(record, payload)

    def _check_author(self, record: LedgerRecord, payload: Payload) -> None:
        expected = {
            "SessionManifest": "user",
            "AuthResponse": "user",
            "ServiceApplication": "user",
            "AggregateResult": "relayer",
            "SessionAborted": "relayer",
            "ProofResponse": "zkpsp",
            "ProofRequest": "operator",
            "ServiceDecision": "operator",
        }.get(record.kind)
        if isinstance(payload, (AuthChallenge, AssetUpload)):
            expected = f"source:{payload.source_id}"
        if record.author != expected:
            self._fail("author", f"{record.kind} authored by {record.author}", record.height)

    def _require_manifest(self, record: LedgerRecord, session: _SessionState) -> SessionManifest:
        if session.manifest is None:
            detail = f"{record.kind} before the session manifest"
            self._fail("phase ordering", detail, record.height)
        return session.manifest

    def _check_token(self, record: LedgerRecord, session: _SessionState, token: bytes) -> None:
        manifest = self._require_manifest(record, session)
        if token != manifest.caddr_token:
            self._fail("token consistency", "Caddr token differs from the manifest", record.height)

    def _check_recipient(self, record: LedgerRecord, data: bytes, fingerprint: bytes, what: str):
        try:
            envelope = SealedEnvelope.decode(data)
        except EncodingError as e:
            self._fail("envelope", f"{what} does not decode: {e}", record.height)
        if envelope.recipient_fingerprint != fingerprint:
            self._fail("envelope", f"{what} is sealed to the wrong recipient", record.height)

    def _check_operator_tokens(self, record: LedgerRecord, *tokens: bytes) -> None:
        for token in tokens:
            self._check_recipient(record, token, self.operator_fp, "token")

    def _check_manifest(
        self, record: LedgerRecord, session: _SessionState, manifest: SessionManifest
    ) -> None:
        if session.manifest is not None:
            self._fail("phase ordering", "second manifest for the session", record.height)
        self._check_operator_tokens(record, manifest.caddr_token)
        session.manifest = manifest

    def _account_keys(
        self, record: LedgerRecord, manifest: SessionManifest, source_id: str
    ) -> tuple[bytes, bytes]:
        """Owner encryption fingerprint and signature key of the account listed for a source."""
        account_id = dict(manifest.expected_sources).get(source_id)
        if account_id is None:
            self._fail("phase ordering", f"{source_id} is not in the manifest", record.height)
        keys = self.owner_keys.get(account_id)
        if keys is None:
            self._fail("signature", f"no registered owner for account {account_id}", record.height)
        return keys

    def _check_challenge(
        self, record: LedgerRecord, session: _SessionState, challenge: AuthChallenge
    ) -> None:
        manifest = self._require_manifest(record, session)
        owner_fp, _ = self._account_keys(record, manifest, challenge.source_id)
        self._check_recipient(record, challenge.sealed_nonce, owner_fp, "challenge")
        session.challenged.add(challenge.source_id)

    def _check_response(
        self, record: LedgerRecord, session: _SessionState, response: AuthResponse
    ) -> None:
        manifest = self._require_manifest(record, session)
        if response.source_id not in session.challenged:
            self._fail("phase ordering", "response without a challenge", record.height)
        _, owner_sig_public = self._account_keys(record, manifest, response.source_id)
        if verify_response_offline(response, record.session_id, owner_sig_public):
            session.authenticated.add(response.source_id)

    def _check_upload(self, record: LedgerRecord, session: _SessionState, upload: AssetUpload):
        self._check_token(record, session, upload.caddr_token)
        if upload.source_id not in session.authenticated:
            detail = f"upload from {upload.source_id} without a valid response"
            self._fail("signature", detail, record.height)
        if upload.source_id in session.uploaded:
            self._fail("phase ordering", f"second upload from {upload.source_id}", record.height)
        self._check_recipient(record, upload.sealed_ciphertext, self.relayer_fp, "upload")
        session.uploaded.add(upload.source_id)

    def _check_aggregate(
        self, record: LedgerRecord, session: _SessionState, aggregate: AggregateResult
    ) -> None:
        self._check_token(record, session, aggregate.caddr_token)
        manifest = self._require_manifest(record, session)
        if session.uploaded != set(manifest.source_ids):
            self._fail("phase ordering", "aggregate before every source uploaded", record.height)
        if aggregate.ciphertext.key_fingerprint != self.he_public.fingerprint:
            self._fail("envelope", "aggregate is not under the ZKPSP key", record.height)
        if aggregate.caddr_token in self.aggregated_tokens:
            detail = "second aggregate for an already aggregated Caddr token"
            self._fail("token consistency", detail, record.height)
        self.aggregated_tokens.add(aggregate.caddr_token)
        session.aggregated = True

    def _check_request(self, record: LedgerRecord, session: _SessionState, request: ProofRequest):
        key = (request.caddr_token, request.requester_token)
        if key not in session.applications:
            self._fail("phase ordering", "proof request without an application", record.height)
        if request.statement != self.statement:
            self._fail("statement", "request tiers differ from the run's tiers", record.height)
        self.requests[key] = request

    def _check_decision(self, record: LedgerRecord, decision: ServiceDecision) -> None:
        key = (decision.caddr_token, decision.requester_token)
        if key not in self.requests:
            self._fail("phase ordering", "decision without a request", record.height)
        response = self.responses.get(key)
        if not consistent(self.params, self.statement, response, decision):
            detail = f"{decision.outcome} is not supported by the response"
            self._fail("proof", detail, record.height)

    def _check_decision_lines(self) -> None:
        records = self.transcript.records
        for line in self.transcript.decisions:
            if not 0 <= line.height < len(records):
                self._fail("decision", f"{line.user}'s decision height is off the ledger")
            record = records[line.height]
            if record.kind != "ServiceDecision" or record.payload.hex() != line.payload_hex:
                detail = f"{line.user}'s decision differs from the ledger"
                self._fail("decision", detail, line.height)

    def _check_file_digest(self) -> None:
        lines = self.transcript.raw_lines
        if lines is None:
            return
        end = json.loads(lines[-1])
        if end.get("sha256") != file_digest(lines[:-1]):
            self._fail("file digest", "transcript bytes differ from the recorded digest")


def verify_transcript(transcript: Transcript) -> VerificationFailure | None:
    """Runs every offline check on a parsed transcript."""
    return TranscriptVerifier(transcript).verify()
