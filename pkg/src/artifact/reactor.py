"""Reactive coordination: need fulfillment, synthesis, and loop prevention.

Each agent owns one reactor. A react() call runs three phases against a
shared budget (need-driven reactions first, then multi-parent synthesis,
then single-parent transforms), with every consumed artifact id and need key
written to the agent's ledgers before the produced artifact is published.

Consumption is globally exclusive: reactors share a claim set so that no
artifact's payload is ever reacted to twice, even when agents run
concurrently. Need fulfillment consumes only the need key, not the carrying
artifact, so a need-bearing artifact can still feed a later synthesis.
"""

from __future__ import annotations

import logging
import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .canonical import Payload, canonical_line
from .clock import Clock
from .errors import ArtifactError, InvalidParam
from .index import GlobalIndex, IndexEntry, NeedKey, variant_params
from .ledger import Artifact, ArtifactStore, create_artifact, new_uuid
from .lineage import LineageGraph
from .needs import NeedItem
from .pressure import PressureBreakdown, build_context, rank
from .skills import (
    AgentProfile,
    SkillManifest,
    SkillRegistry,
    allowed_types,
    execute,
    normalize_param,
)

log = logging.getLogger(__name__)

CONSUMED_FILE = "consumed.txt"
CONSUMED_NEEDS_FILE = "consumed_needs.txt"
REACTIONS_FILE = "reactions.jsonl"

REACTION_KINDS = ("need_driven", "multi_parent", "single_parent")


@dataclass(frozen=True)
class ReactionRecord:
    kind: str
    consumed_ids: tuple
    fulfilled_need: NeedKey | None
    produced_id: str
    skill: str
    pressure: PressureBreakdown | None
    timestamp: str

    def __post_init__(self):
        if self.kind not in REACTION_KINDS:
            raise ArtifactError(f"unknown reaction kind {self.kind!r}")
        if self.kind == "need_driven" and self.fulfilled_need is None:
            raise ArtifactError("need_driven reactions must name the fulfilled need")
        if self.kind == "multi_parent" and len(self.consumed_ids) < 2:
            raise ArtifactError("multi_parent reactions consume at least two artifacts")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "consumed_ids": list(self.consumed_ids),
            "fulfilled_need": self.fulfilled_need.text if self.fulfilled_need else None,
            "produced_id": self.produced_id,
            "skill": self.skill,
            "pressure": self.pressure.to_dict() if self.pressure else None,
            "timestamp": self.timestamp,
        }


class ConsumptionClaims:
    """Shared, thread-safe registry of consumed artifact ids.

    claim_all is atomic: either every id is newly claimed or none is, which
    is what keeps concurrent reactors from splitting a synthesis.
    """

    def __init__(self):
        self._claimed: set[str] = set()
        self._lock = threading.Lock()

    def seed(self, ids: Iterable[str]) -> None:
        with self._lock:
            self._claimed.update(ids)

    def __contains__(self, artifact_id: str) -> bool:
        with self._lock:
            return artifact_id in self._claimed

    def claim_all(self, ids: Sequence[str]) -> bool:
        with self._lock:
            if any(i in self._claimed for i in ids):
                return False
            self._claimed.update(ids)
            return True


class ConsumptionLedger:
    """Per-agent append-only record of consumed artifacts and need keys."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.consumed_path = self.directory / CONSUMED_FILE
        self.consumed_needs_path = self.directory / CONSUMED_NEEDS_FILE
        self.consumed_artifact_ids: set[str] = set()
        self.consumed_need_keys: set[str] = set()
        self.refresh()

    def refresh(self) -> None:
        self.consumed_artifact_ids = set(self._read(self.consumed_path))
        self.consumed_need_keys = set(self._read(self.consumed_needs_path))

    @staticmethod
    def _read(path: Path) -> list[str]:
        if not path.exists():
            return []
        with open(path, "r", encoding="utf-8") as handle:
            return [line.strip() for line in handle if line.strip()]

    @staticmethod
    def _append(path: Path, token: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(token + "\n")
            handle.flush()

    def add_artifact(self, artifact_id: str) -> None:
        if artifact_id not in self.consumed_artifact_ids:
            self._append(self.consumed_path, artifact_id)
            self.consumed_artifact_ids.add(artifact_id)

    def add_need_key(self, key: NeedKey) -> None:
        if key.text not in self.consumed_need_keys:
            self._append(self.consumed_needs_path, key.text)
            self.consumed_need_keys.add(key.text)


def merge_payloads(parents: Sequence[Artifact]) -> Payload:
    """Fold top-level maps oldest to newest; newest value wins each key.

    Timestamp ties break toward the lexicographically later artifact id.
    """
    if not parents:
        raise ArtifactError("merge requires at least one parent")
    ordered = sorted(parents, key=lambda a: (a.timestamp, a.artifact_id))
    merged: Payload = {}
    for artifact in ordered:
        merged.update(artifact.payload)
    return merged


def schema_overlap(manifest: SkillManifest, payload_keys: Iterable[str]) -> bool:
    """Compatibility test: input params (or declared json fields) meet keys."""
    keys = set(payload_keys)
    if set(manifest.input_params) & keys:
        return True
    return bool(manifest.json_fields and set(manifest.json_fields) & keys)


def build_params(manifest: SkillManifest, payload: Payload) -> dict:
    """Derive skill params from a payload's top-level entries.

    Skills that take structured input via an ``input_json`` param and
    matched through their declared json fields receive the whole payload
    under that param, mirroring how --input-json tools are fed.
    """
    params = {}
    for key, value in payload.items():
        try:
            params[normalize_param(key)] = value
        except InvalidParam:
            continue
    if (
        "input_json" in manifest.input_params
        and "input_json" not in params
        and manifest.json_fields
        and set(manifest.json_fields) & set(params)
    ):
        params["input_json"] = payload
    return params


class ArtifactReactor:
    def __init__(
        self,
        profile: AgentProfile,
        registry: SkillRegistry,
        index: GlobalIndex,
        graph: LineageGraph,
        store: ArtifactStore,
        resolve_artifact: Callable[[IndexEntry], Artifact | None],
        data_dir: str | Path,
        clock: Clock,
        rng: random.Random | None = None,
        claims: ConsumptionClaims | None = None,
        on_publish: Callable[[Artifact], None] | None = None,
        on_reaction: Callable[[ReactionRecord], None] | None = None,
    ):
        self.profile = profile
        self.registry = registry
        self.index = index
        self.graph = graph
        self.store = store
        self.resolve_artifact = resolve_artifact
        self.data_dir = Path(data_dir)
        self.clock = clock
        self.rng = rng or random.Random()
        self.ledger = ConsumptionLedger(self.data_dir)
        self.claims = claims or ConsumptionClaims()
        self.claims.seed(self.ledger.consumed_artifact_ids)
        self.on_publish = on_publish
        self.on_reaction = on_reaction
        self.reaction_log: list[ReactionRecord] = []
        self._payload_keys_cache: dict[str, frozenset] = {}

    @property
    def agent_name(self) -> str:
        return self.profile.name

    # -- scanning -----------------------------------------------------------

    def _runnable_skills(self) -> list[SkillManifest]:
        return self.registry.skills_for(self.profile)

    def _producible_types(self) -> set[str]:
        return {m.output_artifact_type for m in self._runnable_skills()}

    def _payload_keys(self, entry: IndexEntry) -> frozenset | None:
        cached = self._payload_keys_cache.get(entry.artifact_id)
        if cached is not None:
            return cached
        artifact = self.resolve_artifact(entry)
        if artifact is None:
            return None
        keys = set()
        for key in artifact.payload:
            try:
                keys.add(normalize_param(key))
            except InvalidParam:
                continue
        frozen = frozenset(keys)
        self._payload_keys_cache[entry.artifact_id] = frozen
        return frozen

    def can_react(self, entry: IndexEntry) -> bool:
        """True iff this reactor could legitimately consume the entry now."""
        if entry.producer_agent == self.agent_name:
            return False
        if entry.artifact_id in self.claims:
            return False
        if entry.artifact_type not in allowed_types(self.profile, self.registry):
            return False
        keys = self._payload_keys(entry)
        if keys is None:
            return False
        return any(schema_overlap(m, keys) for m in self._runnable_skills())

    def scan_available(self, investigation_filter: str | None = None) -> list[IndexEntry]:
        """Unclaimed peer entries compatible with at least one of our skills."""
        entries = self.index.scan(
            investigation_id=investigation_filter, exclude_producer=self.agent_name
        )
        return [e for e in entries if self.can_react(e)]

    def scan_needs(
        self, investigation_filter: str | None = None
    ) -> list[tuple[NeedKey, NeedItem, IndexEntry]]:
        """Open peer needs this agent could produce and has not yet consumed."""
        producible = self._producible_types()
        rows = []
        for key, item, entry in self.index.open_needs(investigation_filter):
            if entry.producer_agent == self.agent_name:
                continue
            if key.text in self.ledger.consumed_need_keys:
                continue
            if item.artifact_type not in producible:
                continue
            rows.append((key, item, entry))
        return rows

    # -- reactions ----------------------------------------------------------

    def _record(self, record: ReactionRecord) -> None:
        self.reaction_log.append(record)
        path = self.data_dir / REACTIONS_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(canonical_line(record.to_dict()))
        if self.on_reaction is not None:
            self.on_reaction(record)

    def _publish(self, artifact: Artifact, fulfills: NeedKey | None = None) -> None:
        self.store.append(artifact)
        self.graph.insert(artifact)
        self.index.publish(IndexEntry.for_artifact(artifact, fulfills=fulfills))
        if self.on_publish is not None:
            self.on_publish(artifact)

    def _create(
        self,
        artifact_type: str,
        skill: str,
        payload: Payload,
        parents: Sequence[str],
        investigation_id: str,
    ) -> Artifact:
        return create_artifact(
            artifact_type=artifact_type,
            producer_agent=self.agent_name,
            skill=skill,
            payload=payload,
            parents=parents,
            investigation_id=investigation_id,
            clock=self.clock,
            known_types=self.registry.artifact_types(),
            id_factory=lambda: new_uuid(self.rng),
        )

    def _skill_for_need(self, item: NeedItem) -> SkillManifest | None:
        """Producer choice: the need's preferred skills first, then registry order."""
        runnable = {m.name: m for m in self._runnable_skills()}
        for name in item.preferred_skills:
            manifest = runnable.get(name)
            if manifest is not None and manifest.output_artifact_type == item.artifact_type:
                return manifest
        for manifest in self._runnable_skills():
            if manifest.output_artifact_type == item.artifact_type:
                return manifest
        return None

    def react_to_needs(
        self, limit: int, investigation_filter: str | None = None
    ) -> list[ReactionRecord]:
        """Fulfill up to ``limit`` open needs in descending pressure order."""
        if limit <= 0:
            return []
        rows = self.scan_needs(investigation_filter)
        if not rows:
            return []
        pool = self.index.open_needs(investigation_filter)
        pool_items = [item for _, item, _ in pool]
        now = self.clock.now()
        contexts = {}
        for key, item, entry in rows:
            depth = self.graph.depth(entry.artifact_id) if entry.artifact_id in self.graph else 0
            contexts[key.text] = build_context(
                entry=entry,
                coverage=self.index.coverage(key.artifact_id, key.need_index),
                open_items=pool_items,
                parent_depth=depth,
                now=now,
            )
        records = []
        for ranked in rank(rows, contexts, self.agent_name):
            if len(records) >= limit:
                break
            record = self._fulfill(ranked.key, ranked.item, ranked.entry, ranked.breakdown)
            if record is not None:
                records.append(record)
        return records

    def _fulfill(
        self,
        key: NeedKey,
        item: NeedItem,
        entry: IndexEntry,
        breakdown: PressureBreakdown,
    ) -> ReactionRecord | None:
        manifest = self._skill_for_need(item)
        if manifest is None:
            return None
        params = {"query": item.query}
        if manifest.input_params:
            params.setdefault(manifest.input_params[0], item.query)
        params.update(variant_params(item, key.variant_id))
        try:
            payload = execute(manifest, params, self.rng.randrange(2**32))
        except ArtifactError as exc:
            log.warning("need %s left open: skill %s failed: %s", key.text, manifest.name, exc)
            return None
        self.ledger.add_need_key(key)
        artifact = self._create(
            artifact_type=item.artifact_type,
            skill=manifest.name,
            payload=payload,
            parents=(entry.artifact_id,),
            investigation_id=entry.investigation_id,
        )
        self._publish(artifact, fulfills=key)
        record = ReactionRecord(
            kind="need_driven",
            consumed_ids=(),
            fulfilled_need=key,
            produced_id=artifact.artifact_id,
            skill=manifest.name,
            pressure=breakdown,
            timestamp=artifact.timestamp,
        )
        self._record(record)
        return record

    def react_multi(self, investigation_filter: str | None = None) -> ReactionRecord | None:
        """Merge >=2 compatible peer artifacts through one shared skill."""
        candidates = self.scan_available(investigation_filter)
        for manifest in self._runnable_skills():
            compatible = []
            for entry in candidates:
                keys = self._payload_keys(entry)
                if keys is not None and schema_overlap(manifest, keys):
                    compatible.append(entry)
            if len(compatible) < 2:
                continue
            artifacts = []
            for entry in compatible:
                artifact = self.resolve_artifact(entry)
                if artifact is None:
                    break
                artifacts.append(artifact)
            if len(artifacts) != len(compatible):
                continue
            artifacts.sort(key=lambda a: (a.timestamp, a.artifact_id))
            merged = merge_payloads(artifacts)
            params = build_params(manifest, merged)
            try:
                payload = execute(manifest, params, self.rng.randrange(2**32))
            except ArtifactError as exc:
                log.warning("multi-parent via %s skipped: %s", manifest.name, exc)
                continue
            consumed = tuple(a.artifact_id for a in artifacts)
            if not self.claims.claim_all(consumed):
                continue
            for artifact_id in consumed:
                self.ledger.add_artifact(artifact_id)
            investigation = self._common_investigation(artifacts)
            produced = self._create(
                artifact_type="synthesis",
                skill=manifest.name,
                payload=payload,
                parents=consumed,
                investigation_id=investigation,
            )
            self._publish(produced)
            record = ReactionRecord(
                kind="multi_parent",
                consumed_ids=consumed,
                fulfilled_need=None,
                produced_id=produced.artifact_id,
                skill=manifest.name,
                pressure=None,
                timestamp=produced.timestamp,
            )
            self._record(record)
            return record
        return None

    @staticmethod
    def _common_investigation(artifacts: Sequence[Artifact]) -> str:
        ids = {a.investigation_id for a in artifacts}
        return ids.pop() if len(ids) == 1 else ""

    def react_single(self, investigation_filter: str | None = None) -> ReactionRecord | None:
        """Transform one available compatible peer artifact through one skill."""
        for entry in self.scan_available(investigation_filter):
            keys = self._payload_keys(entry)
            if keys is None:
                continue
            manifest = next(
                (m for m in self._runnable_skills() if schema_overlap(m, keys)), None
            )
            if manifest is None:
                continue
            artifact = self.resolve_artifact(entry)
            if artifact is None:
                continue
            params = build_params(manifest, artifact.payload)
            try:
                payload = execute(manifest, params, self.rng.randrange(2**32))
            except ArtifactError as exc:
                log.warning("single-parent on %s skipped: %s", entry.artifact_id, exc)
                continue
            if not self.claims.claim_all((entry.artifact_id,)):
                continue
            self.ledger.add_artifact(entry.artifact_id)
            produced = self._create(
                artifact_type=manifest.output_artifact_type,
                skill=manifest.name,
                payload=payload,
                parents=(entry.artifact_id,),
                investigation_id=entry.investigation_id,
            )
            self._publish(produced)
            record = ReactionRecord(
                kind="single_parent",
                consumed_ids=(entry.artifact_id,),
                fulfilled_need=None,
                produced_id=produced.artifact_id,
                skill=manifest.name,
                pressure=None,
                timestamp=produced.timestamp,
            )
            self._record(record)
            return record
        return None

    def react(self, limit: int = 3, investigation_filter: str | None = None) -> list[ReactionRecord]:
        """Run the phased reaction cycle under a shared budget.

        Need-driven reactions come first, then multi-parent synthesis, then
        single-parent transforms. Per-reaction failures are isolated.
        """
        self.ledger.refresh()
        self.claims.seed(self.ledger.consumed_artifact_ids)
        records: list[ReactionRecord] = []
        if limit <= 0:
            return records
        try:
            records.extend(self.react_to_needs(limit, investigation_filter))
        except Exception:
            log.exception("need-driven phase failed for %s", self.agent_name)
        while len(records) < limit:
            try:
                record = self.react_multi(investigation_filter)
            except Exception:
                log.exception("multi-parent phase failed for %s", self.agent_name)
                break
            if record is None:
                break
            records.append(record)
        while len(records) < limit:
            try:
                record = self.react_single(investigation_filter)
            except Exception:
                log.exception("single-parent phase failed for %s", self.agent_name)
                break
            if record is None:
                break
            records.append(record)
        return records
