#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Pedersen commitments and non-interactive interval-membership proofs.

A proof that a committed v lies in (lo, hi] decomposes a = v - lo - 1 and b = hi - v into k bits
each, commits to every bit, proves each bit commitment opens to 0 or 1 with a two-branch OR
proof, and proves with a Schnorr proof that the weighted product of bit commitments matches the
shifted main commitment. Challenges come from SHA-256 over a fixed, tagged transcript layout.
"""

import hashlib
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError, decode_fields, encode_fields, encode_fixed, encode_int
from literals import FS_TAG, GROUP_GENERATOR, H_TAG, NO_MATCH_INDEX, PROFILES, Profile

logger = logging.getLogger(__name__)

PROOF_VERSION = 1
BUNDLE_VERSION = 1
SIDES = ("low", "high")

VerdictOutcome = Literal["match", "no-match", "rejected"]


class RangeProofError(Exception):
    """Base exception for commitment and range-proof failures."""


class UnknownProfileError(RangeProofError):
    """Raised for a profile without group parameters."""


class StatementInvalidError(RangeProofError):
    """Raised when intervals are empty, unsorted, overlapping or negative."""


class ValueOutsideIntervalError(RangeProofError):
    """Raised when asked to prove membership of a value that is not a member."""


class BitWidthError(RangeProofError):
    """Raised when the bit width cannot cover the interval or exceeds the group order."""


@dataclass(frozen=True)
class GroupParams:
    """Quadratic-residue subgroup of a safe-prime group, with independent generators g and h."""

    modulus_p: int
    order_q: int
    g: int
    h: int

    @property
    def element_size(self) -> int:
        """Bytes of a fixed-width group element."""
        return (self.modulus_p.bit_length() + 7) // 8

    @property
    def scalar_size(self) -> int:
        """Bytes of a fixed-width exponent."""
        return (self.order_q.bit_length() + 7) // 8

    def is_element(self, x: int) -> bool:
        """Subgroup membership test."""
        return 0 < x < self.modulus_p and pow(x, self.order_q, self.modulus_p) == 1


@dataclass(frozen=True)
class PedersenCommitment:
    """C = g^v · h^r."""

    point: int


@dataclass(frozen=True)
class RangeStatement:
    """Sorted, pairwise disjoint half-open intervals (lo, hi]."""

    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.intervals:
            raise StatementInvalidError("statement needs at least one interval")

        previous_hi = None
        for lo, hi in self.intervals:
            if lo < 0 or lo >= hi:
                raise StatementInvalidError(f"interval ({lo}, {hi}] is empty or negative")
            if previous_hi is not None and lo < previous_hi:
                raise StatementInvalidError(f"interval ({lo}, {hi}] is unsorted or overlapping")
            previous_hi = hi

    @classmethod
    def from_pairs(cls, pairs) -> "RangeStatement":
        """Builds a statement from any iterable of (lo, hi) pairs."""
        return cls(tuple((int(lo), int(hi)) for lo, hi in pairs))

    def index_of(self, v: int) -> int | None:
        """Index of the interval containing `v`, if any."""
        for index, (lo, hi) in enumerate(self.intervals):
            if lo < v <= hi:
                return index
        return None

    def encode(self) -> bytes:
        """Length-prefixed (lo, hi) integers in order."""
        return encode_fields(
            *[encode_int(bound) for interval in self.intervals for bound in interval]
        )

    @classmethod
    def decode(cls, data: bytes) -> "RangeStatement":
        """Inverse of `encode`; re-validates the intervals."""
        fields = decode_fields(data)
        if not fields or len(fields) % 2:
            raise EncodingError("statement needs an even, nonzero number of bounds")
        bounds = [int.from_bytes(field, "big") for field in fields]
        if any(encode_int(bound) != field for bound, field in zip(bounds, fields)):
            raise EncodingError("statement bound is not minimally encoded")
        try:
            return cls(tuple(zip(bounds[::2], bounds[1::2])))
        except StatementInvalidError as e:
            raise EncodingError(str(e))


@dataclass(frozen=True)
class BitProof:
    """Two-branch OR proof that a bit commitment opens to 0 or to 1."""

    e0: int
    e1: int
    s0: int
    s1: int


@dataclass(frozen=True)
class ConsistencyProof:
    """Schnorr proof of knowledge of log_h of the blinding residue."""

    challenge: int
    response: int


@dataclass(frozen=True)
class MembershipProof:
    """Bit commitments and their proofs for both sides of an interval."""

    bit_width_k: int
    bit_commitments_low: tuple[int, ...]
    bit_commitments_high: tuple[int, ...]
    or_transcripts_low: tuple[BitProof, ...]
    or_transcripts_high: tuple[BitProof, ...]
    consistency_low: ConsistencyProof
    consistency_high: ConsistencyProof

    def encode(self, params: GroupParams) -> bytes:
        """Version byte, 2-byte k, then fixed-width elements and scalars."""
        es, ss = params.element_size, params.scalar_size
        parts = [bytes([PROOF_VERSION]), encode_fixed(self.bit_width_k, 2)]
        parts += [encode_fixed(x, es) for x in self.bit_commitments_low]
        parts += [encode_fixed(x, es) for x in self.bit_commitments_high]
        for transcript in self.or_transcripts_low + self.or_transcripts_high:
            parts += [encode_fixed(x, ss) for x in (transcript.e0, transcript.e1)]
            parts += [encode_fixed(x, ss) for x in (transcript.s0, transcript.s1)]
        for consistency in (self.consistency_low, self.consistency_high):
            parts += [
                encode_fixed(consistency.challenge, ss),
                encode_fixed(consistency.response, ss),
            ]
        return b"".join(parts)

    @classmethod
    def decode(cls, params: GroupParams, data: bytes) -> "MembershipProof":
        """Inverse of `encode`; rejects wrong lengths and out-of-range values."""
        es, ss = params.element_size, params.scalar_size
        if len(data) < 3 or data[0] != PROOF_VERSION:
            raise EncodingError("unknown proof version")

        k = int.from_bytes(data[1:3], "big")
        if k == 0 or len(data) != 3 + 2 * k * es + (8 * k + 4) * ss:
            raise EncodingError("proof has the wrong length for its bit width")

        offset = 3

        def take(width: int, bound: int) -> int:
            nonlocal offset
            value = int.from_bytes(data[offset : offset + width], "big")
            offset += width
            if value >= bound:
                raise EncodingError("proof value out of range")
            return value

        low = tuple(take(es, params.modulus_p) for _ in range(k))
        high = tuple(take(es, params.modulus_p) for _ in range(k))
        transcripts = [
            BitProof(*(take(ss, params.order_q) for _ in range(4))) for _ in range(2 * k)
        ]
        consistency = [
            ConsistencyProof(take(ss, params.order_q), take(ss, params.order_q)) for _ in SIDES
        ]

        return cls(
            bit_width_k=k,
            bit_commitments_low=low,
            bit_commitments_high=high,
            or_transcripts_low=tuple(transcripts[:k]),
            or_transcripts_high=tuple(transcripts[k:]),
            consistency_low=consistency[0],
            consistency_high=consistency[1],
        )


@dataclass(frozen=True)
class ProofBundle:
    """Commitment to the total, the matched interval index and its proof."""

    commitment: PedersenCommitment
    matched_index: int | None
    proof: MembershipProof | None

    def encode(self, params: GroupParams) -> bytes:
        """Version byte, commitment, 2-byte index (0xFFFF for no match), then the proof."""
        index = NO_MATCH_INDEX if self.matched_index is None else self.matched_index
        data = (
            bytes([BUNDLE_VERSION])
            + encode_fixed(self.commitment.point, params.element_size)
            + encode_fixed(index, 2)
        )
        if self.proof is not None:
            data += self.proof.encode(params)
        return data

    @classmethod
    def decode(cls, params: GroupParams, data: bytes) -> "ProofBundle":
        """Inverse of `encode`."""
        es = params.element_size
        if len(data) < 3 + es or data[0] != BUNDLE_VERSION:
            raise EncodingError("unknown bundle version or truncated bundle")

        point = int.from_bytes(data[1 : 1 + es], "big")
        if point >= params.modulus_p:
            raise EncodingError("commitment out of range")
        index = int.from_bytes(data[1 + es : 3 + es], "big")
        rest = data[3 + es :]

        if index == NO_MATCH_INDEX:
            if rest:
                raise EncodingError("no-match bundle carries trailing bytes")
            return cls(PedersenCommitment(point), None, None)

        return cls(PedersenCommitment(point), index, MembershipProof.decode(params, rest))


@dataclass(frozen=True)
class Verdict:
    """Per-interval labels; `labels` is None unless the outcome is a match."""

    outcome: VerdictOutcome
    labels: tuple[bool, ...] | None = None

    @property
    def matched_index(self) -> int | None:
        """Index of the True label, if any."""
        if self.labels is None:
            return None
        return self.labels.index(True)


def _derive_h(modulus_p: int, g: int) -> int:
    width = (modulus_p.bit_length() + 7) // 8 + 16
    counter = 0
    while True:
        seed = H_TAG + encode_fields(encode_int(modulus_p), encode_int(g), encode_int(counter))
        x = int.from_bytes(hashlib.shake_256(seed).digest(width), "big") % modulus_p
        h = x * x % modulus_p
        if h not in (0, 1, g):
            return h
        counter += 1


@lru_cache(maxsize=None)
def group_setup(profile: Profile) -> GroupParams:
    """Fixed group parameters of a profile.

    Raises:
        UnknownProfileError: for profiles without parameters
    """
    if profile not in PROFILES:
        raise UnknownProfileError(f"no group parameters for profile {profile}")

    p = PROFILES[profile].group_modulus
    return GroupParams(
        modulus_p=p, order_q=(p - 1) // 2, g=GROUP_GENERATOR, h=_derive_h(p, GROUP_GENERATOR)
    )


def _commit(params: GroupParams, v: int, r: int) -> int:
    p = params.modulus_p
    return pow(params.g, v, p) * pow(params.h, r, p) % p


def commit(params: GroupParams, v: int, r: int) -> PedersenCommitment:
    """C = g^v · h^r for v, r in [0, q)."""
    if not 0 <= v < params.order_q or not 0 <= r < params.order_q:
        raise RangeProofError("value and blinding must lie in [0, q)")

    return PedersenCommitment(_commit(params, v, r))


def default_bit_width(statement: RangeStatement) -> int:
    """Bit length of the widest interval, so that hi - lo <= 2^k for every interval."""
    return max((hi - lo).bit_length() for lo, hi in statement.intervals)


def _context(
    params: GroupParams,
    commitment: int,
    interval: tuple[int, int],
    k: int,
    low: tuple[int, ...],
    high: tuple[int, ...],
) -> bytes:
    lo, hi = interval
    fields = [params.modulus_p, params.g, params.h, commitment, lo, hi, k, *low, *high]
    return hashlib.sha256(FS_TAG + encode_fields(*[encode_int(x) for x in fields])).digest()


def _challenge(params: GroupParams, context: bytes, *items: bytes | int) -> int:
    encoded = [item if isinstance(item, bytes) else encode_int(item) for item in items]
    digest = hashlib.sha256(FS_TAG + encode_fields(context, *encoded)).digest()
    return int.from_bytes(digest, "big") % params.order_q


def _side_commitments(params: GroupParams, commitment: int, interval: tuple[int, int]):
    p = params.modulus_p
    lo, hi = interval
    c_low = commitment * pow(params.g, -(lo + 1), p) % p
    c_high = pow(params.g, hi, p) * pow(commitment, -1, p) % p
    return c_low, c_high


def _weighted_product(params: GroupParams, bit_commitments: tuple[int, ...]) -> int:
    p = params.modulus_p
    acc = 1
    for point in reversed(bit_commitments):
        acc = acc * acc % p * point % p
    return acc


def _prove_bit(
    params: GroupParams,
    context: bytes,
    label: bytes,
    index: int,
    point: int,
    bit: int,
    blinding: int,
    rng: DeterministicRandom,
) -> BitProof:
    p, q, h = params.modulus_p, params.order_q, params.h
    ys = (point, point * pow(params.g, -1, p) % p)
    fake = 1 - bit

    e_fake = rng.randbelow(q)
    s_fake = rng.randbelow(q)
    alpha = rng.randbelow(q)
    t = [0, 0]
    t[fake] = pow(h, s_fake, p) * pow(ys[fake], -e_fake, p) % p
    t[bit] = pow(h, alpha, p)

    e = _challenge(params, context, label, index, point, t[0], t[1])
    e_real = (e - e_fake) % q
    s_real = (alpha + e_real * blinding) % q

    es, ss = [0, 0], [0, 0]
    es[fake], ss[fake] = e_fake, s_fake
    es[bit], ss[bit] = e_real, s_real
    return BitProof(e0=es[0], e1=es[1], s0=ss[0], s1=ss[1])


def _verify_bit(
    params: GroupParams, context: bytes, label: bytes, index: int, point: int, proof: BitProof
) -> bool:
    p, h = params.modulus_p, params.h
    y0, y1 = point, point * pow(params.g, -1, p) % p
    t0 = pow(h, proof.s0, p) * pow(y0, -proof.e0, p) % p
    t1 = pow(h, proof.s1, p) * pow(y1, -proof.e1, p) % p
    expected = _challenge(params, context, label, index, point, t0, t1)
    return (proof.e0 + proof.e1) % params.order_q == expected


def _commit_bits(
    params: GroupParams, value: int, k: int, rng: DeterministicRandom
) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    bits = tuple((value >> i) & 1 for i in range(k))
    blindings = tuple(rng.randbelow(params.order_q) for _ in range(k))
    points = tuple(_commit(params, bit, r) for bit, r in zip(bits, blindings))
    return points, bits, blindings


def prove_membership(
    params: GroupParams,
    v: int,
    r: int,
    interval: tuple[int, int],
    k: int,
    rng: DeterministicRandom,
) -> MembershipProof:
    """Proves that commit(v, r) opens to a value in the half-open `interval` (lo, hi].

    Args:
        params: group parameters
        v: the committed value
        r: the commitment blinding
        interval: (lo, hi) with lo exclusive and hi inclusive
        k: bit width, with hi - lo <= 2^k
        rng: randomness for the bit blindings and proof nonces

    Raises:
        ValueOutsideIntervalError: when v is not in (lo, hi]
        BitWidthError: when k cannot cover the interval
    """
    lo, hi = interval
    if not lo < v <= hi:
        raise ValueOutsideIntervalError(f"value is not in ({lo}, {hi}]")
    if k < 1 or hi - lo > 2**k or 2 ** (k + 1) >= params.order_q:
        raise BitWidthError(f"bit width {k} does not fit interval ({lo}, {hi}]")

    q = params.order_q
    commitment = _commit(params, v, r)
    side_values = (v - lo - 1, hi - v)
    side_blindings = (r, (-r) % q)
    side_points = _side_commitments(params, commitment, interval)

    committed = [_commit_bits(params, value, k, rng) for value in side_values]
    points = [side[0] for side in committed]

    context = _context(params, commitment, interval, k, points[0], points[1])

    or_transcripts, consistency = [], []
    for side, label in enumerate(SIDES):
        _, bits, blindings = committed[side]
        tag = label.encode()
        or_transcripts.append(
            tuple(
                _prove_bit(params, context, tag, i, points[side][i], bits[i], blindings[i], rng)
                for i in range(k)
            )
        )

        residue = (side_blindings[side] - sum(b << i for i, b in enumerate(blindings))) % q
        x = side_points[side] * pow(_weighted_product(params, points[side]), -1, params.modulus_p)
        x %= params.modulus_p
        alpha = rng.randbelow(q)
        t = pow(params.h, alpha, params.modulus_p)
        c = _challenge(params, context, tag + b"/consistency", x, t)
        consistency.append(ConsistencyProof(challenge=c, response=(alpha + c * residue) % q))

    return MembershipProof(
        bit_width_k=k,
        bit_commitments_low=points[0],
        bit_commitments_high=points[1],
        or_transcripts_low=or_transcripts[0],
        or_transcripts_high=or_transcripts[1],
        consistency_low=consistency[0],
        consistency_high=consistency[1],
    )


def verify_membership(
    params: GroupParams,
    commitment: PedersenCommitment,
    interval: tuple[int, int],
    proof: MembershipProof,
) -> bool:
    """True iff `proof` shows that `commitment` opens into (lo, hi]; never raises."""
    try:
        return _verify_membership(params, commitment.point, interval, proof)
    except (ValueError, TypeError, ArithmeticError) as e:
        logger.debug(f"malformed membership proof: {e}")
        return False


def _verify_membership(
    params: GroupParams, commitment: int, interval: tuple[int, int], proof: MembershipProof
) -> bool:
    p, q = params.modulus_p, params.order_q
    k = proof.bit_width_k
    lo, hi = interval
    if k < 1 or lo >= hi or hi - lo > 2**k or 2 ** (k + 1) >= q:
        return False

    sides = (
        (proof.bit_commitments_low, proof.or_transcripts_low, proof.consistency_low),
        (proof.bit_commitments_high, proof.or_transcripts_high, proof.consistency_high),
    )
    if any(len(points) != k or len(transcripts) != k for points, transcripts, _ in sides):
        return False

    if not params.is_element(commitment):
        return False
    bit_commitments = proof.bit_commitments_low + proof.bit_commitments_high
    if not all(params.is_element(x) for x in bit_commitments):
        return False

    context = _context(
        params, commitment, interval, k, proof.bit_commitments_low, proof.bit_commitments_high
    )
    side_points = _side_commitments(params, commitment, interval)

    for (points, transcripts, consistency), side_point, label in zip(sides, side_points, SIDES):
        tag = label.encode()
        for i, (point, transcript) in enumerate(zip(points, transcripts)):
            if not _verify_bit(params, context, tag, i, point, transcript):
                logger.debug(f"{label} bit {i} failed its OR proof")
                return False

        x = side_point * pow(_weighted_product(params, points), -1, p) % p
        t = pow(params.h, consistency.response, p) * pow(x, -consistency.challenge, p) % p
        if _challenge(params, context, tag + b"/consistency", x, t) != consistency.challenge:
            logger.debug(f"{label} consistency proof failed")
            return False

    return True


def respond(
    params: GroupParams,
    v: int,
    statement: RangeStatement,
    rng: DeterministicRandom,
    k: int | None = None,
) -> ProofBundle:
    """Commits to `v` with fresh blinding and proves membership of the containing interval."""
    k = default_bit_width(statement) if k is None else k
    r = rng.randbelow(params.order_q)
    commitment = commit(params, v, r)

    index = statement.index_of(v)
    if index is None:
        return ProofBundle(commitment=commitment, matched_index=None, proof=None)

    proof = prove_membership(params, v, r, statement.intervals[index], k, rng)
    return ProofBundle(commitment=commitment, matched_index=index, proof=proof)


def verify_bundle(params: GroupParams, bundle: ProofBundle, statement: RangeStatement) -> Verdict:
    """Labels the matched interval True and every other interval False when the proof verifies."""
    if bundle.matched_index is None:
        return Verdict(outcome="no-match")

    index = bundle.matched_index
    if bundle.proof is None or not 0 <= index < len(statement.intervals):
        return Verdict(outcome="rejected")

    if not verify_membership(params, bundle.commitment, statement.intervals[index], bundle.proof):
        return Verdict(outcome="rejected")

    labels = tuple(i == index for i in range(len(statement.intervals)))
    return Verdict(outcome="match", labels=labels)
