"""Metadata-only global index plus the shared needs board.

Index entries mirror an artifact's identity fields but never its payload, so
agents can scan the whole ecosystem cheaply. Fulfillments are visible here
too: the fulfilling artifact's entry carries the need key it answered, which
is what closes a need and what coverage counting reads.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .canonical import canonical_line
from .errors import CorruptStore, DuplicateEntry
from .ledger import Artifact
from .needs import NeedItem, NeedsSignal

DEFAULT_VARIANT = "default"


@dataclass(frozen=True)
class NeedKey:
    artifact_id: str
    need_index: int
    variant_id: str

    @property
    def text(self) -> str:
        return f"{self.artifact_id}:{self.need_index}:{self.variant_id}"

    @classmethod
    def parse(cls, text: str) -> "NeedKey":
        artifact_id, need_index, variant_id = text.split(":", 2)
        return cls(artifact_id=artifact_id, need_index=int(need_index), variant_id=variant_id)


def variant_ids(item: NeedItem) -> list[str]:
    """Stable variant ids: v0..vN in declaration order, or the default token."""
    if not item.parallel_variants:
        return [DEFAULT_VARIANT]
    return [f"v{i}" for i in range(len(item.parallel_variants))]


def variant_params(item: NeedItem, variant_id: str) -> dict:
    if variant_id == DEFAULT_VARIANT:
        return {}
    return dict(item.parallel_variants[int(variant_id[1:])])


@dataclass(frozen=True)
class IndexEntry:
    artifact_id: str
    artifact_type: str
    producer_agent: str
    timestamp: str
    parent_artifact_ids: tuple
    investigation_id: str
    needs: NeedsSignal | None = None
    fulfills: NeedKey | None = None

    @classmethod
    def for_artifact(cls, artifact: Artifact, fulfills: NeedKey | None = None) -> "IndexEntry":
        return cls(
            artifact_id=artifact.artifact_id,
            artifact_type=artifact.artifact_type,
            producer_agent=artifact.producer_agent,
            timestamp=artifact.timestamp,
            parent_artifact_ids=tuple(artifact.parent_artifact_ids),
            investigation_id=artifact.investigation_id,
            needs=artifact.needs,
            fulfills=fulfills,
        )

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "artifact_type": self.artifact_type,
            "producer_agent": self.producer_agent,
            "timestamp": self.timestamp,
            "parent_artifact_ids": list(self.parent_artifact_ids),
            "investigation_id": self.investigation_id,
            "needs": self.needs.to_dict() if self.needs is not None else None,
            "fulfills": self.fulfills.text if self.fulfills is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IndexEntry":
        needs = data.get("needs")
        fulfills = data.get("fulfills")
        return cls(
            artifact_id=data["artifact_id"],
            artifact_type=data["artifact_type"],
            producer_agent=data["producer_agent"],
            timestamp=data["timestamp"],
            parent_artifact_ids=tuple(data["parent_artifact_ids"]),
            investigation_id=data["investigation_id"],
            needs=NeedsSignal.from_dict(needs) if needs else None,
            fulfills=NeedKey.parse(fulfills) if fulfills else None,
        )


class GlobalIndex:
    """Append-only shared index; scans are deterministic snapshots."""

    FILENAME = "index.jsonl"

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: list[IndexEntry] = []
        self._ids: set[str] = set()
        self._fulfilled_keys: set[str] = set()
        self._coverage: dict[tuple, int] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                for number, raw in enumerate(handle, start=1):
                    try:
                        entry = IndexEntry.from_dict(json.loads(raw))
                    except Exception as exc:
                        raise CorruptStore(str(self.path), number, f"unparseable entry: {exc}")
                    self._admit(entry)

    def _admit(self, entry: IndexEntry) -> None:
        self._entries.append(entry)
        self._ids.add(entry.artifact_id)
        if entry.fulfills is not None:
            self._fulfilled_keys.add(entry.fulfills.text)
            pair = (entry.fulfills.artifact_id, entry.fulfills.need_index)
            self._coverage[pair] = self._coverage.get(pair, 0) + 1

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._ids

    def entries(self) -> list[IndexEntry]:
        return list(self._entries)

    def publish(self, entry: IndexEntry) -> None:
        """Append one entry; appends serialize so lines never interleave."""
        with self._lock:
            if entry.artifact_id in self._ids:
                raise DuplicateEntry(f"index already holds {entry.artifact_id}")
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(canonical_line(entry.to_dict()))
                    handle.flush()
            self._admit(entry)

    def scan(
        self,
        artifact_type: str | None = None,
        producer: str | None = None,
        investigation_id: str | None = None,
        exclude_producer: str | None = None,
    ) -> list[IndexEntry]:
        """Entries matching every present filter, ordered by (timestamp, id)."""
        found = []
        for entry in self.entries():
            if artifact_type is not None and entry.artifact_type != artifact_type:
                continue
            if producer is not None and entry.producer_agent != producer:
                continue
            if investigation_id is not None and entry.investigation_id != investigation_id:
                continue
            if exclude_producer is not None and entry.producer_agent == exclude_producer:
                continue
            found.append(entry)
        found.sort(key=lambda e: (e.timestamp, e.artifact_id))
        return found

    def is_fulfilled(self, key: NeedKey) -> bool:
        return key.text in self._fulfilled_keys

    def open_needs(
        self, investigation_id: str | None = None
    ) -> list[tuple[NeedKey, NeedItem, IndexEntry]]:
        """Every unfulfilled (key, item, carrying entry) row, variant-expanded."""
        rows = []
        ordered = sorted(self.entries(), key=lambda e: (e.timestamp, e.artifact_id))
        for entry in ordered:
            if entry.needs is None:
                continue
            if investigation_id is not None and entry.investigation_id != investigation_id:
                continue
            for need_index, item in enumerate(entry.needs.items):
                for vid in variant_ids(item):
                    key = NeedKey(entry.artifact_id, need_index, vid)
                    if key.text not in self._fulfilled_keys:
                        rows.append((key, item, entry))
        return rows

    def coverage(self, artifact_id: str, need_index: int) -> int:
        """Fulfillment count for a need across all of its variants."""
        return self._coverage.get((artifact_id, need_index), 0)
