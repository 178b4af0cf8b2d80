"""Canonical payload serialization and content hashing.

A payload is a JSON-style tree whose top level is a map. The canonical byte
form sorts keys lexicographically at every nesting level, uses minimal
separators and UTF-8, writes integers without exponent form and floats in
shortest round-trip decimal form. Two payloads that differ only in map-key
order canonicalize to identical bytes, so the content hash is order-blind.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

from .errors import InvalidPayload

Payload = dict


def _check_tree(value: Any, path: str) -> None:
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidPayload(f"non-finite number at {path}")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise InvalidPayload(f"non-string key {key!r} at {path}")
            _check_tree(item, f"{path}.{key}")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_tree(item, f"{path}[{i}]")
        return
    raise InvalidPayload(f"unserializable value of type {type(value).__name__} at {path}")


def canonicalize(payload: Payload) -> bytes:
    """Deterministic byte form of a payload; raises InvalidPayload on bad input."""
    if not isinstance(payload, dict):
        raise InvalidPayload(f"payload top level must be a map, got {type(payload).__name__}")
    _check_tree(payload, "$")
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)
    return text.encode("utf-8")


def content_hash(payload: Payload) -> str:
    """SHA-256 of the canonical byte form, as 64 lowercase hex chars."""
    return hashlib.sha256(canonicalize(payload)).hexdigest()


def canonical_line(record: dict) -> str:
    """One newline-terminated canonical record, as used by every JSONL store."""
    return canonicalize(record).decode("utf-8") + "\n"
