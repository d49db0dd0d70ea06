"""Shared envelope helpers: base64 point fields and canonical JSON bytes."""

from __future__ import annotations

import base64
import json


def b64e(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64d(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


def canonical_json(obj) -> bytes:
    """Byte-exact JSON encoding: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def length_prefixed(*parts: bytes) -> bytes:
    """Unambiguous concatenation of byte strings."""
    out = bytearray()
    for part in parts:
        out += len(part).to_bytes(4, "big")
        out += part
    return bytes(out)
