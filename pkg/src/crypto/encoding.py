#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Canonical byte encodings: length-prefixed fields and unsigned big-endian integers."""

import struct

LENGTH_PREFIX = struct.Struct(">I")


class EncodingError(ValueError):
    """Raised when a byte string is not a canonical encoding."""


def encode_int(value: int) -> bytes:
    """Minimal unsigned big-endian encoding; zero encodes as a single zero byte."""
    if value < 0:
        raise EncodingError(f"cannot encode negative integer {value}")

    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def decode_int(data: bytes) -> int:
    """Inverse of `encode_int`, rejecting non-minimal encodings."""
    if not data or (len(data) > 1 and data[0] == 0):
        raise EncodingError("integer encoding is empty or not minimal")

    return int.from_bytes(data, "big")


def encode_fixed(value: int, width: int) -> bytes:
    """Fixed-width unsigned big-endian encoding."""
    if value < 0 or value.bit_length() > 8 * width:
        raise EncodingError(f"integer does not fit in {width} bytes")

    return value.to_bytes(width, "big")


def encode_fields(*fields: bytes) -> bytes:
    """Concatenates fields, each prefixed with its 4-byte big-endian length."""
    return b"".join(LENGTH_PREFIX.pack(len(field)) + field for field in fields)


def decode_fields(data: bytes, count: int | None = None) -> list[bytes]:
    """Splits a `encode_fields` output back into fields.

    Args:
        data: the encoded bytes
        count: the exact number of fields expected, if known

    Raises:
        EncodingError: on truncation, trailing bytes or a field count mismatch
    """
    fields = []
    offset = 0
    while offset < len(data):
        if offset + LENGTH_PREFIX.size > len(data):
            raise EncodingError("truncated length prefix")
        (length,) = LENGTH_PREFIX.unpack_from(data, offset)
        offset += LENGTH_PREFIX.size
        if offset + length > len(data):
            raise EncodingError("truncated field")
        fields.append(data[offset : offset + length])
        offset += length

    if count is not None and len(fields) != count:
        raise EncodingError(f"expected {count} fields, found {len(fields)}")

    return fields


def encode_str(value: str) -> bytes:
    """UTF-8 encoding of an identifier."""
    return value.encode("utf-8")


def decode_str(data: bytes) -> str:
    """Inverse of `encode_str`."""
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(f"identifier is not valid UTF-8: {e}")
