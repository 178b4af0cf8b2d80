"""Per-agent persistent memory: journal, investigation tracker, knowledge graph.

The journal is an append-only record-per-line log. The tracker and the graph
are single documents rewritten atomically (write to a temp file, rename), so
a crash never leaves a half-written document behind.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .canonical import canonical_line
from .clock import Clock, SystemClock, format_timestamp
from .errors import (
    AlreadyComplete,
    CorruptStore,
    DanglingConcept,
    InvalidKind,
    InvalidRelation,
    UnknownInvestigation,
)

JOURNAL_KINDS = ("observation", "hypothesis", "experiment", "conclusion")

EDGE_RELATIONS = (
    "contradicts", "extends", "requires", "causes",
    "binds_to", "associated_with", "activates", "inhibits",
)

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(topic: str) -> str:
    """Investigation ids are topic slugs: lowercase, hyphen-separated."""
    return _SLUG_RE.sub("-", topic.lower()).strip("-")


def _atomic_write(path: Path, data: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(data, handle, sort_keys=True, indent=2)
        handle.write("\n")
    os.replace(tmp, path)


@dataclass(frozen=True)
class JournalEntry:
    timestamp: str
    kind: str
    content: str
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "kind": self.kind,
            "content": self.content,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JournalEntry":
        return cls(
            timestamp=data["timestamp"],
            kind=data["kind"],
            content=data["content"],
            metadata=data.get("metadata", {}),
        )


class AgentJournal:
    FILENAME = "journal.jsonl"

    def __init__(self, path: str | Path, clock: Clock | None = None):
        self.path = Path(path)
        self.clock = clock or SystemClock()
        self._entries: list[JournalEntry] = []
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                for number, raw in enumerate(handle, start=1):
                    try:
                        self._entries.append(JournalEntry.from_dict(json.loads(raw)))
                    except Exception as exc:
                        raise CorruptStore(str(self.path), number, f"bad journal entry: {exc}")

    def log(self, kind: str, content: str, metadata: dict | None = None) -> JournalEntry:
        if kind not in JOURNAL_KINDS:
            raise InvalidKind(f"journal kind must be one of {JOURNAL_KINDS}")
        entry = JournalEntry(
            timestamp=format_timestamp(self.clock.now()),
            kind=kind,
            content=content,
            metadata=metadata or {},
        )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(canonical_line(entry.to_dict()))
        self._entries.append(entry)
        return entry

    def entries(self) -> list[JournalEntry]:
        return list(self._entries)


@dataclass
class Investigation:
    id: str
    topic: str
    status: str = "active"
    hypotheses: list = field(default_factory=list)
    results: list = field(default_factory=list)
    created: str = ""
    completed: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "topic": self.topic,
            "status": self.status,
            "hypotheses": self.hypotheses,
            "results": self.results,
            "created": self.created,
            "completed": self.completed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Investigation":
        return cls(**data)


class InvestigationTracker:
    FILENAME = "investigations.json"

    def __init__(self, path: str | Path, clock: Clock | None = None):
        self.path = Path(path)
        self.clock = clock or SystemClock()
        self._items: dict[str, Investigation] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
            for slug in sorted(data):
                self._items[slug] = Investigation.from_dict(data[slug])

    def _save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.path, {slug: inv.to_dict() for slug, inv in self._items.items()})

    def create(self, topic: str) -> Investigation:
        """Idempotent: an existing investigation for the slug is returned as-is."""
        slug = slugify(topic)
        existing = self._items.get(slug)
        if existing is not None:
            return existing
        investigation = Investigation(
            id=slug, topic=topic, created=format_timestamp(self.clock.now())
        )
        self._items[slug] = investigation
        self._save()
        return investigation

    def get(self, investigation_id: str) -> Investigation:
        try:
            return self._items[investigation_id]
        except KeyError:
            raise UnknownInvestigation(f"no investigation {investigation_id!r}")

    def __contains__(self, investigation_id: str) -> bool:
        return investigation_id in self._items

    def all(self) -> list[Investigation]:
        return list(self._items.values())

    def add_hypothesis(self, investigation_id: str, hypothesis: str) -> None:
        self.get(investigation_id).hypotheses.append(hypothesis)
        self._save()

    def add_result(self, investigation_id: str, result: dict | str) -> None:
        self.get(investigation_id).results.append(result)
        self._save()

    def mark_complete(self, investigation_id: str) -> None:
        investigation = self.get(investigation_id)
        if investigation.status == "complete":
            raise AlreadyComplete(f"investigation {investigation_id} already complete")
        investigation.status = "complete"
        investigation.completed = format_timestamp(self.clock.now())
        self._save()


class KnowledgeGraph:
    FILENAME = "knowledge_graph.json"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._nodes: dict[str, str] = {}
        self._edges: list[tuple[str, str, str]] = []
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
            self._nodes = dict(data.get("nodes", {}))
            self._edges = [tuple(edge) for edge in data.get("edges", [])]

    def _save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.path, {
            "nodes": self._nodes,
            "edges": [list(edge) for edge in self._edges],
        })

    def add_node(self, entity: str, node_type: str = "concept") -> None:
        if entity not in self._nodes:
            self._nodes[entity] = node_type
            self._save()

    def add_edge(self, source: str, target: str, relation: str) -> None:
        if relation not in EDGE_RELATIONS:
            raise InvalidRelation(f"relation must be one of {EDGE_RELATIONS}")
        if source not in self._nodes or target not in self._nodes:
            raise DanglingConcept(f"both endpoints must exist: {source} -> {target}")
        self._edges.append((source, target, relation))
        self._save()

    def query(self, entity: str) -> list[tuple[str, str]]:
        """(other concept, relation) for every edge incident to the entity."""
        related = []
        for source, target, relation in self._edges:
            if source == entity:
                related.append((target, relation))
            elif target == entity:
                related.append((source, relation))
        related.sort()
        return related

    def nodes(self) -> dict[str, str]:
        return dict(self._nodes)

    def edges(self) -> list[tuple[str, str, str]]:
        return list(self._edges)
