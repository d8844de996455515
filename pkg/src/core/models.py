#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Collection of ledger records, payload codecs and knowledge objects."""

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Literal, cast, get_args

from crypto.encoding import (
    EncodingError,
    decode_fields,
    decode_int,
    decode_str,
    encode_fields,
    encode_int,
    encode_str,
)
from crypto.envelope import SealedEnvelope, Signature
from crypto.he import HECiphertext
from crypto.rangeproof import RangeStatement
from literals import (
    NONCE_SIZE,
    RECORD_KINDS,
    SESSION_ID_SIZE,
    DenialReason,
    RecordKind,
)

ProofStatus = Literal["ok", "no-aggregate"]
TargetKind = Literal["source", "relayer", "zkpsp", "operator"]


class MalformedPayloadError(EncodingError):
    """Raised when a record payload does not decode for its kind."""


@dataclass(frozen=True)
class LedgerRecord:
    """An immutable ledger entry; `height` is assigned by the ledger."""

    height: int
    kind: RecordKind
    session_id: bytes
    author: str
    payload: bytes
    logical_time: int

    def to_dict(self) -> dict:
        """Fixed key order used by the dump format."""
        return {
            "height": self.height,
            "kind": self.kind,
            "session_id": self.session_id.hex(),
            "author": self.author,
            "payload_hex": self.payload.hex(),
            "logical_time": self.logical_time,
        }

    def to_line(self) -> str:
        """Canonical single-line rendering."""
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, raw: dict) -> "LedgerRecord":
        """Inverse of `to_dict`."""
        if list(raw) != ["height", "kind", "session_id", "author", "payload_hex", "logical_time"]:
            raise MalformedPayloadError("record keys are missing or out of order")
        if raw["kind"] not in RECORD_KINDS:
            raise MalformedPayloadError(f"unknown record kind {raw['kind']}")

        try:
            session_id = bytes.fromhex(raw["session_id"])
            payload = bytes.fromhex(raw["payload_hex"])
        except (TypeError, ValueError) as e:
            raise MalformedPayloadError(f"record is not valid hex: {e}")

        if len(session_id) != SESSION_ID_SIZE:
            raise MalformedPayloadError("session id has the wrong size")

        return cls(
            height=int(raw["height"]),
            kind=raw["kind"],
            session_id=session_id,
            author=str(raw["author"]),
            payload=payload,
            logical_time=int(raw["logical_time"]),
        )

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical line."""
        return hashlib.sha256(self.to_line().encode()).hexdigest()

    def decoded(self) -> "Payload":
        """The typed payload of this record."""
        return decode_payload(self.kind, self.payload)


class Payload(ABC):
    """Kind-specific record body with a canonical encoding."""

    kind: ClassVar[RecordKind]

    @abstractmethod
    def encode(self) -> bytes:
        """Canonical encoding of the payload."""
        ...

    @classmethod
    @abstractmethod
    def decode(cls, data: bytes) -> "Payload":
        """Inverse of `encode`."""
        ...


def _envelope(data: bytes) -> bytes:
    SealedEnvelope.decode(data)
    return data


@dataclass(frozen=True)
class SessionManifest(Payload):
    """Opens a session: the Caddr token and the expected (source, account) pairs."""

    kind: ClassVar[RecordKind] = "SessionManifest"

    caddr_token: bytes
    expected_sources: tuple[tuple[str, str], ...]

    def encode(self) -> bytes:
        pairs = [encode_fields(encode_str(s), encode_str(a)) for s, a in self.expected_sources]
        return encode_fields(self.caddr_token, encode_fields(*pairs))

    @classmethod
    def decode(cls, data: bytes) -> "SessionManifest":
        token, pairs = decode_fields(data, 2)
        expected = []
        for pair in decode_fields(pairs):
            source_id, account_id = decode_fields(pair, 2)
            expected.append((decode_str(source_id), decode_str(account_id)))
        if not expected:
            raise EncodingError("manifest lists no sources")
        return cls(caddr_token=_envelope(token), expected_sources=tuple(expected))

    @property
    def source_ids(self) -> tuple[str, ...]:
        """Expected source ids in manifest order."""
        return tuple(source_id for source_id, _ in self.expected_sources)


@dataclass(frozen=True)
class AuthChallenge(Payload):
    """A nonce sealed to the registered owner of an account."""

    kind: ClassVar[RecordKind] = "AuthChallenge"

    source_id: str
    sealed_nonce: bytes

    def encode(self) -> bytes:
        return encode_fields(encode_str(self.source_id), self.sealed_nonce)

    @classmethod
    def decode(cls, data: bytes) -> "AuthChallenge":
        source_id, sealed = decode_fields(data, 2)
        return cls(source_id=decode_str(source_id), sealed_nonce=_envelope(sealed))


@dataclass(frozen=True)
class AuthResponse(Payload):
    """The opened nonce and a signature over nonce, session id and source id."""

    kind: ClassVar[RecordKind] = "AuthResponse"

    source_id: str
    nonce: bytes
    signature: Signature

    def encode(self) -> bytes:
        return encode_fields(encode_str(self.source_id), self.nonce, self.signature.value)

    @classmethod
    def decode(cls, data: bytes) -> "AuthResponse":
        source_id, nonce, signature = decode_fields(data, 3)
        if len(nonce) != NONCE_SIZE:
            raise EncodingError("nonce has the wrong size")
        return cls(source_id=decode_str(source_id), nonce=nonce, signature=Signature(signature))


@dataclass(frozen=True)
class AssetUpload(Payload):
    """An HE ciphertext of one account amount, sealed to the relayer."""

    kind: ClassVar[RecordKind] = "AssetUpload"

    source_id: str
    caddr_token: bytes
    sealed_ciphertext: bytes

    def encode(self) -> bytes:
        return encode_fields(encode_str(self.source_id), self.caddr_token, self.sealed_ciphertext)

    @classmethod
    def decode(cls, data: bytes) -> "AssetUpload":
        source_id, token, sealed = decode_fields(data, 3)
        return cls(
            source_id=decode_str(source_id),
            caddr_token=_envelope(token),
            sealed_ciphertext=_envelope(sealed),
        )


@dataclass(frozen=True)
class AggregateResult(Payload):
    """The homomorphic sum of a session's uploads."""

    kind: ClassVar[RecordKind] = "AggregateResult"

    caddr_token: bytes
    ciphertext: HECiphertext

    def encode(self) -> bytes:
        return encode_fields(self.caddr_token, self.ciphertext.encode())

    @classmethod
    def decode(cls, data: bytes) -> "AggregateResult":
        token, ciphertext = decode_fields(data, 2)
        return cls(caddr_token=_envelope(token), ciphertext=HECiphertext.decode(ciphertext))


@dataclass(frozen=True)
class SessionAborted(Payload):
    """Terminal record of an aborted session; `reason` says why the relayer gave up on it."""

    kind: ClassVar[RecordKind] = "SessionAborted"

    caddr_token: bytes
    reason: str
    missing_sources: tuple[str, ...]

    def encode(self) -> bytes:
        missing = encode_fields(*[encode_str(s) for s in self.missing_sources])
        return encode_fields(self.caddr_token, encode_str(self.reason), missing)

    @classmethod
    def decode(cls, data: bytes) -> "SessionAborted":
        token, reason, missing = decode_fields(data, 3)
        return cls(
            caddr_token=_envelope(token),
            reason=decode_str(reason),
            missing_sources=tuple(decode_str(s) for s in decode_fields(missing)),
        )


@dataclass(frozen=True)
class ServiceApplication(Payload):
    """A user's request for service: their Caddr token and their address sealed to the operator."""

    kind: ClassVar[RecordKind] = "ServiceApplication"

    caddr_token: bytes
    requester_token: bytes

    def encode(self) -> bytes:
        return encode_fields(self.caddr_token, self.requester_token)

    @classmethod
    def decode(cls, data: bytes) -> "ServiceApplication":
        token, requester = decode_fields(data, 2)
        return cls(caddr_token=_envelope(token), requester_token=_envelope(requester))


@dataclass(frozen=True)
class ProofRequest(Payload):
    """The operator's tier statement for one application."""

    kind: ClassVar[RecordKind] = "ProofRequest"

    caddr_token: bytes
    requester_token: bytes
    statement: RangeStatement

    def encode(self) -> bytes:
        return encode_fields(self.caddr_token, self.requester_token, self.statement.encode())

    @classmethod
    def decode(cls, data: bytes) -> "ProofRequest":
        token, requester, statement = decode_fields(data, 3)
        return cls(
            caddr_token=_envelope(token),
            requester_token=_envelope(requester),
            statement=RangeStatement.decode(statement),
        )


@dataclass(frozen=True)
class ProofResponse(Payload):
    """The ZKPSP's bundle, or a no-aggregate status with an empty bundle."""

    kind: ClassVar[RecordKind] = "ProofResponse"

    caddr_token: bytes
    requester_token: bytes
    status: ProofStatus
    bundle: bytes

    def encode(self) -> bytes:
        return encode_fields(
            self.caddr_token, self.requester_token, encode_str(self.status), self.bundle
        )

    @classmethod
    def decode(cls, data: bytes) -> "ProofResponse":
        token, requester, status, bundle = decode_fields(data, 4)
        status_str = decode_str(status)
        if status_str not in ("ok", "no-aggregate"):
            raise EncodingError(f"unknown proof status {status_str}")
        if status_str == "no-aggregate" and bundle:
            raise EncodingError("no-aggregate response carries a bundle")
        return cls(
            caddr_token=_envelope(token),
            requester_token=_envelope(requester),
            status=status_str,  # pyright: ignore[reportArgumentType]
            bundle=bundle,
        )


@dataclass(frozen=True)
class ServiceDecision(Payload):
    """The operator's outcome: a tier index or a denial reason."""

    kind: ClassVar[RecordKind] = "ServiceDecision"

    caddr_token: bytes
    requester_token: bytes
    tier: int | None = None
    reason: DenialReason | None = None

    def __post_init__(self):
        if (self.tier is None) == (self.reason is None):
            raise EncodingError("decision needs exactly one of tier and reason")

    @property
    def granted(self) -> bool:
        """True when a tier was granted."""
        return self.tier is not None

    @property
    def outcome(self) -> str:
        """`tier:<i>` or `Denied(<reason>)`."""
        return f"tier:{self.tier}" if self.tier is not None else f"Denied({self.reason})"

    def encode(self) -> bytes:
        outcome = encode_int(self.tier) if self.tier is not None else encode_str(str(self.reason))
        flag = b"tier" if self.tier is not None else b"denied"
        return encode_fields(self.caddr_token, self.requester_token, flag, outcome)

    @classmethod
    def decode(cls, data: bytes) -> "ServiceDecision":
        token, requester, flag, outcome = decode_fields(data, 4)
        token, requester = _envelope(token), _envelope(requester)
        if flag == b"tier":
            return cls(caddr_token=token, requester_token=requester, tier=decode_int(outcome))
        if flag == b"denied":
            reason = decode_str(outcome)
            if reason not in get_args(DenialReason):
                raise EncodingError(f"unknown denial reason {reason}")
            return cls(
                caddr_token=token, requester_token=requester, reason=cast(DenialReason, reason)
            )
        raise EncodingError("unknown decision flag")


PAYLOAD_TYPES: dict[RecordKind, type[Payload]] = {
    payload_type.kind: payload_type
    for payload_type in (
        SessionManifest,
        AuthChallenge,
        AuthResponse,
        AssetUpload,
        AggregateResult,
        SessionAborted,
        ServiceApplication,
        ProofRequest,
        ProofResponse,
        ServiceDecision,
    )
}


def decode_payload(kind: RecordKind, data: bytes) -> Payload:
    """Decodes `data` as the payload of a `kind` record.

    Raises:
        MalformedPayloadError: when `data` is not a canonical payload for `kind`
    """
    try:
        payload = PAYLOAD_TYPES[kind].decode(data)
    except (KeyError, EncodingError, ValueError) as e:
        raise MalformedPayloadError(f"{kind} payload does not decode: {e}")

    if payload.encode() != data:
        raise MalformedPayloadError(f"{kind} payload is not canonically encoded")

    return payload


@dataclass(frozen=True)
class CompromiseTarget:
    """A single compromised entity: `source:<id>`, `relayer`, `zkpsp` or `operator`."""

    kind: TargetKind
    source_id: str | None = None

    @classmethod
    def parse(cls, raw: str) -> "CompromiseTarget":
        """Parses the CLI and report spelling of a target."""
        if raw.startswith("source:") and len(raw) > len("source:"):
            return cls(kind="source", source_id=raw.split(":", 1)[1])
        if raw in ("relayer", "zkpsp", "operator"):
            return cls(kind=raw)  # pyright: ignore[reportArgumentType]
        raise ValueError(f"unknown compromise target {raw}")

    @property
    def entity(self) -> str:
        """The entity name used by the actors and their views."""
        return f"source:{self.source_id}" if self.kind == "source" else self.kind

    def __str__(self) -> str:
        return self.entity


@dataclass
class EntityView:
    """Everything one entity computed or stored, recorded as it happened."""

    entity: str
    role: str
    plaintext_amounts: dict[str, int] = field(default_factory=dict)
    exact_totals: dict[str, int] = field(default_factory=dict)
    plain_addresses: dict[str, str] = field(default_factory=dict)
    caddr_tokens: set[str] = field(default_factory=set)
    held_ciphertexts: list[str] = field(default_factory=list)
    interval_labels: dict[str, list[bool] | None] = field(default_factory=dict)
    private_keys_held: set[str] = field(default_factory=set)
    registry_accounts: dict[str, str] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    decrypt_log: list[str] = field(default_factory=list)
    open_log: list[str] = field(default_factory=list)
    respond_log: list[str] = field(default_factory=list)

    @property
    def exact_total(self) -> int | None:
        """The single exact total held, when exactly one is held."""
        totals = set(self.exact_totals.values())
        return next(iter(totals)) if len(totals) == 1 else None

    @property
    def addresses(self) -> set[str]:
        """Plaintext addresses (hex) the entity learned."""
        return set(self.plain_addresses.values())

    def to_dict(self) -> dict:
        """JSON-ready rendering with sorted sets."""
        raw = asdict(self)
        for key in ("caddr_tokens", "private_keys_held"):
            raw[key] = sorted(raw[key])
        return raw

    @classmethod
    def from_dict(cls, raw: dict) -> "EntityView":
        """Inverse of `to_dict`."""
        values = dict(raw)
        for key in ("caddr_tokens", "private_keys_held"):
            values[key] = set(values.get(key, []))
        return cls(**values)


@dataclass(frozen=True)
class LinkageClaim:
    """An exact amount or total bound to a plaintext address."""

    address: str
    claimed_amounts: dict[str, int] = field(default_factory=dict)
    claimed_total: int | None = None
    evidence: str = ""
