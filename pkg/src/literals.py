#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Collection of globals common to the veilsum protocol simulator."""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Literal

PROJECT_KEY = "veilsum"
TOOL_VERSION = "1.0"
PROFILE_ENV_VAR = "VEILSUM_PROFILE"
CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.yaml"

# Domain-separation tags. Changing any of these changes every transcript byte.
DRBG_TAG = b"veilsum/drbg/v1"
H_TAG = b"veilsum/h/v1"
FS_TAG = b"veilsum/fs/v1"
HE_FINGERPRINT_TAG = b"veilsum/he-pk/v1"
ENV_FINGERPRINT_TAG = b"veilsum/enc-pk/v1"
ENV_KDF_INFO = b"veilsum/seal/v1"
ADDRESS_TAG = b"veilsum/addr/v1"
CHALLENGE_TAG = b"veilsum/challenge/v1"

FINGERPRINT_SIZE = 16
ADDRESS_SIZE = 20
SESSION_ID_SIZE = 16
NONCE_SIZE = 16
AEAD_NONCE_SIZE = 12
X25519_KEY_SIZE = 32

MIN_HE_BITS = 16
MIN_PRODUCTION_HE_BITS = 2048
DEFAULT_TIMEOUT_HEIGHTS = 64
MAX_ROUNDS = 100_000
NO_MATCH_INDEX = 0xFFFF

# Safe primes from the IKE MODP groups; the commitment group is the subgroup of quadratic
# residues, of prime order (p - 1) / 2.
MODP_1024 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381"
    "FFFFFFFFFFFFFFFF",
    16,
)
MODP_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
    "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
GROUP_GENERATOR = 4

Profile = Literal["test", "full"]
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]
Role = Literal["user", "source", "relayer", "zkpsp", "operator"]
Malice = Literal["none", "forge-auth", "foreign-caddr", "phase1-foreign-caddr"]
DenialReason = Literal["AddressMismatch", "ProofInvalid", "NoMatch", "Timeout", "NoAggregate"]
RecordKind = Literal[
    "SessionManifest",
    "AuthChallenge",
    "AuthResponse",
    "AssetUpload",
    "AggregateResult",
    "SessionAborted",
    "ServiceApplication",
    "ProofRequest",
    "ProofResponse",
    "ServiceDecision",
]
RECORD_KINDS: tuple[RecordKind, ...] = (
    "SessionManifest",
    "AuthChallenge",
    "AuthResponse",
    "AssetUpload",
    "AggregateResult",
    "SessionAborted",
    "ServiceApplication",
    "ProofRequest",
    "ProofResponse",
    "ServiceDecision",
)


@dataclass(frozen=True)
class ProfileSpec:
    """Key sizes of a run profile."""

    he_bits: int
    group_modulus: int
    production: bool


PROFILES: dict[Profile, ProfileSpec] = {
    "test": ProfileSpec(he_bits=512, group_modulus=MODP_1024, production=False),
    "full": ProfileSpec(he_bits=2048, group_modulus=MODP_2048, production=True),
}


@dataclass
class StatusLevel:
    """Status object helper."""

    message: str
    log_level: LogLevel


class Status(Enum):
    """Collection of possible session statuses seen by the protocol actors."""

    SESSION_OPENED = StatusLevel("session manifest published", "DEBUG")
    CHALLENGE_ISSUED = StatusLevel("authentication challenge issued", "DEBUG")
    ACCOUNT_UNKNOWN = StatusLevel("manifest references an unregistered account", "WARNING")
    CHALLENGE_IGNORED = StatusLevel("challenge not addressed to this user", "DEBUG")
    MALICIOUS_USER = StatusLevel("challenge response failed verification", "WARNING")
    UPLOADED = StatusLevel("encrypted asset amount uploaded", "DEBUG")
    UPLOAD_REJECTED = StatusLevel("asset upload does not match the session manifest", "WARNING")
    AGGREGATED = StatusLevel("encrypted aggregate published", "INFO")
    TOKEN_REUSED = StatusLevel("manifest reuses a Caddr token bound to another session", "WARNING")
    DUPLICATE_AGGREGATE = StatusLevel("second aggregate for a held Caddr token ignored", "WARNING")
    SESSION_ABORTED = StatusLevel("session aborted before every source uploaded", "ERROR")
    APPLIED = StatusLevel("service application published", "DEBUG")
    PROOF_REQUESTED = StatusLevel("proof request published", "DEBUG")
    PROOF_SENT = StatusLevel("proof bundle published", "DEBUG")
    NO_AGGREGATE = StatusLevel("proof requested for an unknown aggregate", "WARNING")
    SERVICE_GRANTED = StatusLevel("service granted", "INFO")
    SERVICE_DENIED = StatusLevel("service denied", "WARNING")
