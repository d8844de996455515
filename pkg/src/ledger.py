#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""In-memory append-only ledger."""

import logging
import threading
from typing import Iterable, Iterator

from typing_extensions import override

from core.ledger import LedgerBase, LedgerError
from core.models import LedgerRecord, MalformedPayloadError, decode_payload
from literals import RECORD_KINDS, SESSION_ID_SIZE, RecordKind

logger = logging.getLogger(__name__)


class Ledger(LedgerBase):
    """Linear record log; appends are serialized, reads see a consistent prefix."""

    def __init__(self) -> None:
        self._records: list[LedgerRecord] = []
        self._digests: list[str] = []
        self._lock = threading.Lock()

    @override
    def append(
        self,
        kind: RecordKind,
        session_id: bytes,
        author: str,
        payload: bytes,
        logical_time: int,
    ) -> int:
        if kind not in RECORD_KINDS:
            raise MalformedPayloadError(f"unknown record kind {kind}")
        if len(session_id) != SESSION_ID_SIZE:
            raise MalformedPayloadError("session id has the wrong size")

        # raises before the ledger changes
        decode_payload(kind, payload)

        with self._lock:
            if self._records and logical_time < self._records[-1].logical_time:
                raise LedgerError("logical time went backwards")

            record = LedgerRecord(
                height=len(self._records),
                kind=kind,
                session_id=bytes(session_id),
                author=author,
                payload=bytes(payload),
                logical_time=logical_time,
            )
            self._records.append(record)
            self._digests.append(record.digest)

        logger.debug(f"appended {kind} at height {record.height} by {author}")
        return record.height

    @override
    def query(self, session_id: bytes, kind: RecordKind | None = None) -> list[LedgerRecord]:
        return [
            record
            for record in self._records
            if record.session_id == session_id and (kind is None or record.kind == kind)
        ]

    @override
    def poll(self, from_height: int) -> list[LedgerRecord]:
        if from_height < 0:
            raise LedgerError("from_height must be nonnegative")
        return self._records[from_height:]

    @override
    def __len__(self) -> int:
        return len(self._records)

    @override
    def __iter__(self) -> Iterator[LedgerRecord]:
        return iter(list(self._records))

    def __getitem__(self, height: int) -> LedgerRecord:
        return self._records[height]

    @property
    def digests(self) -> list[str]:
        """Per-record digests captured at append time."""
        return list(self._digests)

    def audit(self) -> bool:
        """True when every record still hashes to its append-time digest."""
        return all(
            record.digest == digest for record, digest in zip(self._records, self._digests)
        )

    def dump(self) -> list[str]:
        """One canonical line per record, in height order."""
        return [record.to_line() for record in self._records]

    @classmethod
    def load(cls, records: Iterable[LedgerRecord]) -> "Ledger":
        """Rebuilds a ledger, re-validating dense heights and payloads.

        Raises:
            LedgerError: when heights are not dense from zero
            MalformedPayloadError: when a payload does not decode for its kind
        """
        ledger = cls()
        for record in records:
            if record.height != len(ledger):
                raise LedgerError(f"expected height {len(ledger)}, found {record.height}")
            ledger.append(
                record.kind, record.session_id, record.author, record.payload, record.logical_time
            )
        return ledger


def record_digest(record: LedgerRecord) -> str:
    """SHA-256 of the record's canonical line."""
    return record.digest
