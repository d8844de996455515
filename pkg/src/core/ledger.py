#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Ledger base interface definition."""

from abc import ABC, abstractmethod
from typing import Iterator

from core.models import LedgerRecord
from literals import RecordKind


class LedgerError(Exception):
    """Base exception for ledger failures."""


class LedgerBase(ABC):
    """Base interface for the public append-only record log."""

    @abstractmethod
    def append(
        self,
        kind: RecordKind,
        session_id: bytes,
        author: str,
        payload: bytes,
        logical_time: int,
    ) -> int:
        """Appends a record and returns its height.

        Args:
            kind: the record kind
            session_id: the 16-byte session identifier
            author: role tag of the appending entity
            payload: canonical payload encoding for `kind`
            logical_time: the scheduler's logical clock

        Returns:
            The height assigned to the record, equal to the record count before the append
        """
        ...

    @abstractmethod
    def query(self, session_id: bytes, kind: RecordKind | None = None) -> list[LedgerRecord]:
        """Returns the session's records, optionally of one kind, in height order."""
        ...

    @abstractmethod
    def poll(self, from_height: int) -> list[LedgerRecord]:
        """Returns every record with height >= `from_height`, in height order."""
        ...

    @abstractmethod
    def __len__(self) -> int:
        """Number of records appended so far."""
        ...

    @abstractmethod
    def __iter__(self) -> Iterator[LedgerRecord]:
        """Iterates records in append order."""
        ...

    @property
    def height(self) -> int:
        """The height the next record will receive."""
        return len(self)
