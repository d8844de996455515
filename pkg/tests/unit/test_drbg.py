#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crypto.drbg import DeterministicRandom
from crypto.encoding import EncodingError, decode_fields, decode_int, encode_fields, encode_int


def test_same_seed_same_stream() -> None:
    assert DeterministicRandom(1).token_bytes(64) == DeterministicRandom(1).token_bytes(64)
    assert DeterministicRandom(1).token_bytes(64) != DeterministicRandom(2).token_bytes(64)


def test_fork_does_not_consume_parent() -> None:
    # Given
    parent, untouched = DeterministicRandom(3), DeterministicRandom(3)

    # When
    child = parent.fork("user", "alice")

    # Then
    assert parent.token_bytes(32) == untouched.token_bytes(32)
    assert child.token_bytes(32) != DeterministicRandom(3).fork("user", "bob").token_bytes(32)
    assert child.label == "root/user/alice"


@pytest.mark.parametrize("seed", [-1, 2**64], ids=["negative", "too-large"])
def test_seed_range(seed: int) -> None:
    with pytest.raises(ValueError):
        DeterministicRandom(seed)


@given(n=st.integers(min_value=1, max_value=2**80))
def test_randbelow_in_range(n: int) -> None:
    assert 0 <= DeterministicRandom(n % 2**63).randbelow(n) < n


@given(value=st.integers(min_value=0, max_value=2**256))
def test_int_encoding_is_minimal(value: int) -> None:
    encoded = encode_int(value)
    assert decode_int(encoded) == value
    assert len(encoded) == max(1, (value.bit_length() + 7) // 8)


@pytest.mark.parametrize("data", [b"", b"\x00\x01"], ids=["empty", "leading-zero"])
def test_decode_int_rejects(data: bytes) -> None:
    with pytest.raises(EncodingError):
        decode_int(data)


def test_fields() -> None:
    encoded = encode_fields(b"a", b"", b"xyz")
    assert decode_fields(encoded, 3) == [b"a", b"", b"xyz"]
    with pytest.raises(EncodingError):
        decode_fields(encoded[:-1])
    with pytest.raises(EncodingError):
        decode_fields(encoded, 2)
