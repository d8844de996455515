#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Manager for blind aggregation of uploaded ciphertexts."""

import logging
from dataclasses import dataclass, field

from core.models import SessionManifest
from crypto.he import HECiphertext, HEPublicKey, he_add_many

logger = logging.getLogger(__name__)


@dataclass
class PendingSession:
    """Uploads collected so far for one session."""

    session_id: bytes
    manifest: SessionManifest
    last_progress: int
    uploads: dict[str, HECiphertext] = field(default_factory=dict)

    @property
    def missing(self) -> tuple[str, ...]:
        """Expected sources that have not uploaded yet."""
        return tuple(s for s in self.manifest.source_ids if s not in self.uploads)

    @property
    def complete(self) -> bool:
        """True once every manifest-listed source has uploaded."""
        return not self.missing


class AggregationManager:
    """Tracks sessions and sums their ciphertexts under the ZKPSP's key."""

    def __init__(self, he_public: HEPublicKey, timeout_heights: int):
        self.he_public = he_public
        self.timeout_heights = timeout_heights
        self.sessions: dict[bytes, PendingSession] = {}
        self.token_sessions: dict[bytes, bytes] = {}

    def open_session(self, session_id: bytes, manifest: SessionManifest, now: int) -> bool:
        """Starts collecting uploads for a new session.

        A Caddr token binds to the first session that publishes it. Returns False when the
        token is already bound to another session.
        """
        if session_id in self.sessions:
            logger.warning(f"duplicate manifest for session {session_id.hex()}, ignoring")
            return True

        bound = self.token_sessions.setdefault(manifest.caddr_token, session_id)
        if bound != session_id:
            logger.warning(
                f"session {session_id.hex()} reuses a token bound to session {bound.hex()}"
            )
            return False

        self.sessions[session_id] = PendingSession(
            session_id=session_id, manifest=manifest, last_progress=now
        )
        return True

    def accept(
        self, session_id: bytes, source_id: str, ciphertext: HECiphertext, now: int
    ) -> bool:
        """Stores one upload; returns False for unexpected or duplicate uploads."""
        session = self.sessions.get(session_id)
        if session is None or source_id not in session.missing:
            return False

        session.uploads[source_id] = ciphertext
        session.last_progress = now
        return True

    def aggregate(self, session_id: bytes) -> HECiphertext:
        """Closes a complete session and returns the homomorphic sum of its uploads.

        Raises:
            KeyMismatchError: when an upload was encrypted under a different key
        """
        session = self.sessions.pop(session_id)
        ciphertexts = [session.uploads[source_id] for source_id in session.manifest.source_ids]
        return he_add_many(self.he_public, ciphertexts)

    def expired(self, now: int) -> list[PendingSession]:
        """Removes and returns sessions without progress for `timeout_heights` ticks."""
        stale = [
            session
            for session in self.sessions.values()
            if now - session.last_progress >= self.timeout_heights
        ]
        for session in stale:
            del self.sessions[session.session_id]
        return stale
