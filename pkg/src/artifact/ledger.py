"""Immutable artifact records, per-agent append-only stores, and addressing.

An artifact captures one skill invocation: who produced it, which skill ran,
the unchanged payload, the SHA-256 of the canonical payload, and the ordered
list of parent artifact ids it consumed. Records never change after creation;
stores only ever grow.
"""

from __future__ import annotations

import json
import os
import random
import re
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .canonical import Payload, canonical_line, content_hash
from .clock import Clock, format_timestamp
from .errors import (
    ArtifactError,
    CorruptStore,
    CyclicLineage,
    DuplicateArtifact,
    InvalidAddress,
    InvalidPayload,
    UnknownArtifactType,
)
from .needs import NeedsSignal

RESULT_QUALITIES = ("good", "poor", "unknown")

ADDRESS_SCHEME = "artifact://"
_UUID_RE = re.compile(r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$")

_FIELDS = (
    "artifact_id", "artifact_type", "producer_agent", "skill", "schema_version",
    "payload", "investigation_id", "timestamp", "content_hash",
    "parent_artifact_ids", "result_quality", "needs",
)


@dataclass(frozen=True)
class Artifact:
    artifact_id: str
    artifact_type: str
    producer_agent: str
    skill: str
    schema_version: int
    payload: Payload
    investigation_id: str
    timestamp: str
    content_hash: str
    parent_artifact_ids: tuple
    result_quality: str = "unknown"
    needs: NeedsSignal | None = None

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "artifact_type": self.artifact_type,
            "producer_agent": self.producer_agent,
            "skill": self.skill,
            "schema_version": self.schema_version,
            "payload": self.payload,
            "investigation_id": self.investigation_id,
            "timestamp": self.timestamp,
            "content_hash": self.content_hash,
            "parent_artifact_ids": list(self.parent_artifact_ids),
            "result_quality": self.result_quality,
            "needs": self.needs.to_dict() if self.needs is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Artifact":
        needs = data.get("needs")
        return cls(
            artifact_id=data["artifact_id"],
            artifact_type=data["artifact_type"],
            producer_agent=data["producer_agent"],
            skill=data["skill"],
            schema_version=data["schema_version"],
            payload=data["payload"],
            investigation_id=data["investigation_id"],
            timestamp=data["timestamp"],
            content_hash=data["content_hash"],
            parent_artifact_ids=tuple(data["parent_artifact_ids"]),
            result_quality=data["result_quality"],
            needs=NeedsSignal.from_dict(needs) if needs else None,
        )


@dataclass(frozen=True)
class ArtifactAddress:
    agent: str
    id: str


def new_uuid(rng: random.Random | None = None) -> str:
    """Fresh UUID4 in text form; seeded when an rng is supplied."""
    if rng is None:
        return str(uuid.uuid4())
    return str(uuid.UUID(bytes=rng.getrandbits(128).to_bytes(16, "big"), version=4))


def create_artifact(
    artifact_type: str,
    producer_agent: str,
    skill: str,
    payload: Payload,
    parents: Iterable[str] = (),
    investigation_id: str = "",
    needs: NeedsSignal | None = None,
    clock: Clock | None = None,
    result_quality: str = "unknown",
    schema_version: int = 1,
    known_types: Iterable[str] | None = None,
    id_factory: Callable[[], str] | None = None,
) -> Artifact:
    """Assemble a fresh, hash-stamped artifact record.

    ``known_types``, when given, is the controlled vocabulary to validate
    ``artifact_type`` against. The timestamp comes from the injected clock.
    """
    if known_types is not None and artifact_type not in set(known_types):
        raise UnknownArtifactType(f"artifact type {artifact_type!r} is not registered")
    if result_quality not in RESULT_QUALITIES:
        raise ArtifactError(f"result_quality must be one of {RESULT_QUALITIES}")
    parent_ids = tuple(parents)
    artifact_id = (id_factory or (lambda: new_uuid()))()
    if artifact_id in parent_ids:
        raise CyclicLineage(f"artifact {artifact_id} cannot be its own parent")
    if clock is None:
        from .clock import SystemClock
        clock = SystemClock()
    return Artifact(
        artifact_id=artifact_id,
        artifact_type=artifact_type,
        producer_agent=producer_agent,
        skill=skill,
        schema_version=schema_version,
        payload=payload,
        investigation_id=investigation_id,
        timestamp=format_timestamp(clock.now()),
        content_hash=content_hash(payload),
        parent_artifact_ids=parent_ids,
        result_quality=result_quality,
        needs=needs,
    )


def verify_integrity(artifact: Artifact) -> bool:
    """True iff the stored hash matches a fresh hash of the payload, exactly."""
    try:
        return content_hash(artifact.payload) == artifact.content_hash
    except InvalidPayload:
        return False


def format_address(address: ArtifactAddress) -> str:
    return f"{ADDRESS_SCHEME}{address.agent}/{address.id}"


def parse_address(text: str) -> ArtifactAddress:
    if not text.startswith(ADDRESS_SCHEME):
        raise InvalidAddress(f"missing {ADDRESS_SCHEME!r} scheme: {text!r}")
    rest = text[len(ADDRESS_SCHEME):]
    agent, sep, artifact_id = rest.partition("/")
    if not agent or not sep:
        raise InvalidAddress(f"address must name an agent and an id: {text!r}")
    if not _UUID_RE.match(artifact_id):
        raise InvalidAddress(f"malformed artifact id in address: {text!r}")
    return ArtifactAddress(agent=agent, id=artifact_id)


class ArtifactStore:
    """Append-only JSONL store for one agent's artifacts.

    One canonical record per line. Appends are whole-line writes, so a crash
    leaves either zero or one complete new line; readers tolerate nothing
    less than a parseable line and report the first bad line number.
    """

    FILENAME = "store.jsonl"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: list[Artifact] = []
        self._by_id: dict[str, Artifact] = {}
        if self.path.exists():
            for artifact in self._read_file():
                self._records.append(artifact)
                self._by_id[artifact.artifact_id] = artifact

    @classmethod
    def open_dir(cls, directory: str | Path) -> "ArtifactStore":
        return cls(Path(directory) / cls.FILENAME)

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._by_id

    def __len__(self) -> int:
        return len(self._records)

    def get(self, artifact_id: str) -> Artifact | None:
        return self._by_id.get(artifact_id)

    def append(self, artifact: Artifact) -> None:
        if artifact.artifact_id in self._by_id:
            raise DuplicateArtifact(f"artifact {artifact.artifact_id} already stored")
        line = canonical_line(artifact.to_dict())
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(line)
            handle.flush()
            os.fsync(handle.fileno())
        self._records.append(artifact)
        self._by_id[artifact.artifact_id] = artifact

    def load(self) -> list[Artifact]:
        """Records in append order, re-read from disk."""
        if not self.path.exists():
            return []
        return self._read_file()

    def _read_file(self) -> list[Artifact]:
        records = []
        with open(self.path, "r", encoding="utf-8") as handle:
            for number, raw in enumerate(handle, start=1):
                line = raw.rstrip("\n")
                if not line:
                    raise CorruptStore(str(self.path), number, "blank line")
                try:
                    records.append(Artifact.from_dict(json.loads(line)))
                except CorruptStore:
                    raise
                except Exception as exc:
                    raise CorruptStore(str(self.path), number, f"unparseable record: {exc}")
        return records
