from __future__ import annotations

import random
from datetime import timedelta

import pytest

from artifact.clock import EPOCH, ManualClock
from artifact.index import GlobalIndex, IndexEntry, NeedKey
from artifact.ledger import ArtifactStore, create_artifact, new_uuid
from artifact.lineage import LineageGraph
from artifact.needs import NeedItem, NeedsSignal
from artifact.reactor import (
    ArtifactReactor,
    ConsumptionClaims,
    build_params,
    merge_payloads,
    schema_overlap,
)
from artifact.skills import SkillManifest, load_profile, registry_from_dict

RATIONALE = "downstream synthesis is blocked on this data"


def manifest(name="s", params=("query",), json_fields=(), output="protein_data"):
    return SkillManifest(
        name=name, input_params=tuple(params), json_fields=tuple(json_fields),
        output_artifact_type=output, domain="protein", behavior="protein_record",
        salt=name,
    )


# -- schema overlap ------------------------------------------------------------

def test_overlap_on_shared_param():
    assert schema_overlap(manifest(params=("smiles", "model")), {"smiles", "name"})


def test_no_overlap():
    assert not schema_overlap(manifest(params=("query",)), {"hits", "count"})


def test_overlap_via_json_fields():
    m = manifest(params=("input_json",), json_fields=("papers",))
    assert schema_overlap(m, {"papers", "count"})


def test_build_params_wraps_json_payload():
    m = manifest(params=("input_json",), json_fields=("papers",))
    payload = {"papers": ["p1"], "count": 1}
    params = build_params(m, payload)
    assert params["input_json"] == payload


# -- merge ----------------------------------------------------------------------

class FakeParent:
    def __init__(self, artifact_id, timestamp, payload):
        self.artifact_id = artifact_id
        self.timestamp = timestamp
        self.payload = payload


def test_merge_newest_value_wins():
    a = FakeParent("a", "2024-01-01T00:00:01.000000+00:00", {"x": 1, "y": 2})
    b = FakeParent("b", "2024-01-01T00:00:02.000000+00:00", {"y": 3, "z": 4})
    assert merge_payloads([b, a]) == {"x": 1, "y": 3, "z": 4}


def test_merge_single_parent_is_identity():
    a = FakeParent("a", "2024-01-01T00:00:01.000000+00:00", {"x": 1})
    assert merge_payloads([a]) == {"x": 1}


def test_merge_timestamp_tie_breaks_by_id():
    ts = "2024-01-01T00:00:01.000000+00:00"
    a = FakeParent("a", ts, {"k": "from-a"})
    b = FakeParent("b", ts, {"k": "from-b"})
    assert merge_payloads([a, b])["k"] == "from-b"
    assert merge_payloads([b, a])["k"] == "from-b"


def test_merge_matches_brute_force_fold():
    gen = random.Random(17)
    for _ in range(1000):
        parents = []
        for i in range(gen.randint(1, 5)):
            payload = {f"k{gen.randint(0, 6)}": gen.randint(0, 99)
                       for _ in range(gen.randint(1, 5))}
            parents.append(FakeParent(
                f"id{i}",
                f"2024-01-01T00:00:{gen.randint(0, 2):02d}.000000+00:00",
                payload,
            ))
        expected = {}
        for parent in sorted(parents, key=lambda p: (p.timestamp, p.artifact_id)):
            for key, value in parent.payload.items():
                expected[key] = value
        assert merge_payloads(parents) == expected


# -- harness ----------------------------------------------------------------------

class Harness:
    def __init__(self, tmp_path, registry, agents: dict):
        self.registry = registry
        self.clock = ManualClock(current=EPOCH, step=timedelta(seconds=1))
        self.index = GlobalIndex(tmp_path / "index.jsonl")
        self.graph = LineageGraph()
        self.claims = ConsumptionClaims()
        self.artifacts = {}
        self.reactors = {}
        self.stores = {}
        self.rngs = {}
        for name, tools in agents.items():
            profile = load_profile({"name": name, "preferred_tools": tools}, registry)
            agent_dir = tmp_path / "agents" / name
            store = ArtifactStore.open_dir(agent_dir)
            self.stores[name] = store
            self.rngs[name] = random.Random(name)  # str seeding is stable
            self.reactors[name] = ArtifactReactor(
                profile=profile,
                registry=registry,
                index=self.index,
                graph=self.graph,
                store=store,
                resolve_artifact=lambda e: self.artifacts.get(e.artifact_id),
                data_dir=agent_dir,
                clock=self.clock,
                rng=self.rngs[name],
                claims=self.claims,
                on_publish=lambda a: self.artifacts.__setitem__(a.artifact_id, a),
            )

    def emit(self, agent, artifact_type, payload, parents=(), needs=None,
             investigation_id="", skill="synthesize"):
        artifact = create_artifact(
            artifact_type=artifact_type,
            producer_agent=agent,
            skill=skill,
            payload=payload,
            parents=parents,
            investigation_id=investigation_id,
            needs=needs,
            clock=self.clock,
            known_types=self.registry.artifact_types(),
            id_factory=lambda: new_uuid(self.rngs[agent]),
        )
        self.stores[agent].append(artifact)
        self.graph.insert(artifact)
        self.index.publish(IndexEntry.for_artifact(artifact))
        self.artifacts[artifact.artifact_id] = artifact
        return artifact


@pytest.fixture
def harness(tmp_path, registry):
    return Harness(tmp_path, registry, {
        "alice": ["paper_search", "protein_lookup"],
        "bob": ["protein_lookup", "sequence_align", "motif_scan"],
        "carol": ["protein_lookup"],
    })


def need(artifact_type, query="seed query", variants=(), preferred=()):
    return NeedItem(
        artifact_type=artifact_type, query=query, rationale=RATIONALE,
        parallel_variants=tuple(variants), preferred_skills=tuple(preferred),
    )


# -- scanning -----------------------------------------------------------------

def test_scan_available_excludes_own(harness):
    harness.emit("bob", "protein_data", {"sequence": "MKT"})
    assert harness.reactors["bob"].scan_available() == []


def test_scan_available_finds_compatible_peer(harness):
    artifact = harness.emit("alice", "protein_data", {"sequence": "MKT"})
    found = harness.reactors["bob"].scan_available()
    assert [e.artifact_id for e in found] == [artifact.artifact_id]
    assert harness.reactors["bob"].can_react(found[0])


def test_scan_available_excludes_consumed(harness):
    artifact = harness.emit("alice", "protein_data", {"sequence": "MKT"})
    harness.claims.claim_all((artifact.artifact_id,))
    assert harness.reactors["bob"].scan_available() == []


def test_scan_available_enforces_domain_gate(harness):
    # materials_data is outside bob's preferred domains.
    harness.emit("alice", "materials_data", {"sequence": "MKT"})
    assert harness.reactors["bob"].scan_available() == []


def test_synthesis_passes_domain_gate(harness):
    artifact = harness.emit("alice", "synthesis", {"sequence": "MKT"})
    validation = harness.emit("alice", "peer_validation", {"sequence": "QQT"})
    found = harness.reactors["bob"].scan_available()
    assert {e.artifact_id for e in found} == {artifact.artifact_id,
                                              validation.artifact_id}


def test_incompatible_payload_not_available(harness):
    harness.emit("alice", "protein_data", {"nothing_shared": 1})
    assert harness.reactors["bob"].scan_available() == []


def test_scan_needs_basic(harness):
    signal = NeedsSignal(items=(need("sequence_alignment"),))
    carrier = harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    rows = harness.reactors["bob"].scan_needs()
    assert [(k.artifact_id, k.need_index) for k, _, _ in rows] == [(carrier.artifact_id, 0)]
    # alice cannot answer her own need; carol cannot produce the type
    assert harness.reactors["alice"].scan_needs() == []
    assert harness.reactors["carol"].scan_needs() == []


def test_scan_needs_excludes_consumed_key(harness):
    signal = NeedsSignal(items=(need("sequence_alignment"),))
    carrier = harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    harness.reactors["bob"].ledger.add_need_key(NeedKey(carrier.artifact_id, 0, "default"))
    assert harness.reactors["bob"].scan_needs() == []


# -- need-driven reactions ------------------------------------------------------

def test_single_need_limit_three(harness):
    signal = NeedsSignal(items=(need("sequence_alignment"),))
    carrier = harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    records = harness.reactors["bob"].react_to_needs(limit=3)
    assert len(records) == 1
    record = records[0]
    assert record.kind == "need_driven"
    assert record.consumed_ids == ()
    assert record.fulfilled_need == NeedKey(carrier.artifact_id, 0, "default")
    assert record.pressure is not None and record.pressure.score >= 3.0
    produced = harness.artifacts[record.produced_id]
    assert produced.artifact_type == "sequence_alignment"
    assert produced.parent_artifact_ids == (carrier.artifact_id,)
    # fulfillment is visible in the index
    fulfilled = [e for e in harness.index.entries() if e.fulfills is not None]
    assert fulfilled[0].fulfills == record.fulfilled_need


def test_higher_pressure_need_wins_budget(harness):
    # A deeper carrying artifact boosts the depth term by 0.5 per level.
    root = harness.emit("alice", "protein_data", {"nothing_shared": 0})
    mid = harness.emit("alice", "protein_data", {"nothing_shared": 1},
                       parents=(root.artifact_id,))
    deep = harness.emit(
        "alice", "synthesis", {"topic": "deep"},
        parents=(mid.artifact_id,),
        needs=NeedsSignal(items=(need("sequence_alignment", query="deep need query"),)),
    )
    shallow = harness.emit(
        "alice", "synthesis", {"topic": "shallow"},
        needs=NeedsSignal(items=(need("sequence_alignment", query="shallow need query"),)),
    )
    records = harness.reactors["bob"].react_to_needs(limit=1)
    assert len(records) == 1
    assert records[0].fulfilled_need.artifact_id == deep.artifact_id
    # the shallow need stays open
    still_open = {k.artifact_id for k, _, _ in harness.index.open_needs()}
    assert shallow.artifact_id in still_open


def test_variant_need_records_variant_key(harness):
    signal = NeedsSignal(items=(
        need("sequence_alignment",
             variants=({"sequence": "AAAA"}, {"sequence": "CCCC"})),
    ))
    carrier = harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    records = harness.reactors["bob"].react_to_needs(limit=1)
    assert records[0].fulfilled_need == NeedKey(carrier.artifact_id, 0, "v0")
    produced = harness.artifacts[records[0].produced_id]
    assert produced.payload["echo"]["sequence"] == "AAAA"  # variant overrides query
    # the sibling variant remains open
    open_keys = {k.text for k, _, _ in harness.index.open_needs()}
    assert f"{carrier.artifact_id}:0:v1" in open_keys


def test_need_preferred_skill_honored(tmp_path):
    registry = registry_from_dict({"skills": [
        {"name": "alt_protein", "input_params": ["--query"],
         "output_artifact_type": "protein_data", "domain": "protein",
         "behavior": "protein_record"},
        {"name": "main_protein", "input_params": ["--query"],
         "output_artifact_type": "protein_data", "domain": "protein",
         "behavior": "protein_record"},
    ]})
    harness = Harness(tmp_path, registry, {"alice": [], "bob": []})
    signal = NeedsSignal(items=(need("protein_data", preferred=("main_protein",)),))
    harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal, skill="synthesize")
    records = harness.reactors["bob"].react_to_needs(limit=1)
    assert records[0].skill == "main_protein"


def test_failed_fulfillment_leaves_need_open(tmp_path):
    registry = registry_from_dict({"skills": [
        {"name": "wide", "input_params": ["--alpha", "--beta"],
         "output_artifact_type": "wide_data", "domain": "protein",
         "behavior": "protein_record"},
    ]})
    harness = Harness(tmp_path, registry, {"alice": [], "bob": ["wide"]})
    signal = NeedsSignal(items=(
        need("wide_data", query="needs beta"),
        need("wide_data", query="has beta", variants=({"beta": 1},)),
    ))
    carrier = harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    records = harness.reactors["bob"].react_to_needs(limit=3)
    # only the variant-bearing need can execute; the other stays open
    assert [r.fulfilled_need.need_index for r in records] == [1]
    open_rows = harness.index.open_needs()
    assert [(k.artifact_id, k.need_index) for k, _, _ in open_rows] == \
        [(carrier.artifact_id, 0)]


# -- multi-parent synthesis --------------------------------------------------------

def test_multi_parent_synthesis(harness):
    a1 = harness.emit("alice", "protein_data", {"sequence": "AAA", "organism": "human"})
    c1 = harness.emit("carol", "protein_data", {"sequence": "CCC"})
    record = harness.reactors["bob"].react_multi()
    assert record is not None
    assert record.kind == "multi_parent"
    assert set(record.consumed_ids) == {a1.artifact_id, c1.artifact_id}
    produced = harness.artifacts[record.produced_id]
    assert produced.artifact_type == "synthesis"
    assert produced.producer_agent == "bob"
    # parents ordered oldest -> newest and recorded in the index entry
    assert produced.parent_artifact_ids == (a1.artifact_id, c1.artifact_id)
    entry = [e for e in harness.index.entries()
             if e.artifact_id == produced.artifact_id][0]
    assert entry.parent_artifact_ids == (a1.artifact_id, c1.artifact_id)
    # merged payload respected newest-wins
    assert produced.payload["echo"]["sequence"] == "CCC"


def test_multi_parent_needs_two(harness):
    harness.emit("alice", "protein_data", {"sequence": "AAA"})
    assert harness.reactors["bob"].react_multi() is None


def test_multi_parent_excludes_own_artifacts(harness):
    harness.emit("bob", "protein_data", {"sequence": "AAA"})
    harness.emit("bob", "protein_data", {"sequence": "BBB"})
    assert harness.reactors["bob"].react_multi() is None


# -- the phased react() ------------------------------------------------------------

def test_react_phase_order_and_budget(harness):
    signal = NeedsSignal(items=(
        need("sequence_alignment", query="alignment needed"),
        need("motif_report", query="motif needed"),
    ))
    harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    harness.emit("alice", "protein_data", {"sequence": "AAA"})
    harness.emit("carol", "protein_data", {"sequence": "CCC"})
    records = harness.reactors["bob"].react(limit=3)
    assert [r.kind for r in records] == ["need_driven", "need_driven", "multi_parent"]


def test_react_limit_zero(harness):
    harness.emit("alice", "protein_data", {"sequence": "AAA"})
    assert harness.reactors["bob"].react(limit=0) == []


def test_react_single_parent_phase(harness):
    artifact = harness.emit("alice", "protein_data", {"sequence": "AAA"})
    records = harness.reactors["bob"].react(limit=3)
    assert [r.kind for r in records] == ["single_parent"]
    assert records[0].consumed_ids == (artifact.artifact_id,)
    produced = harness.artifacts[records[0].produced_id]
    assert produced.parent_artifact_ids == (artifact.artifact_id,)
    assert produced.artifact_type == "sequence_alignment"


def test_react_scoped_to_investigation(harness):
    in_scope = harness.emit("alice", "protein_data", {"sequence": "AAA"},
                            investigation_id="alpha")
    harness.emit("alice", "protein_data", {"sequence": "BBB"},
                 investigation_id="beta")
    signal = NeedsSignal(items=(need("sequence_alignment"),))
    harness.emit("alice", "synthesis", {"topic": "x"}, needs=signal,
                 investigation_id="beta")
    records = harness.reactors["bob"].react(limit=3, investigation_filter="alpha")
    touched = set()
    for record in records:
        touched.update(record.consumed_ids)
        if record.fulfilled_need:
            touched.add(record.fulfilled_need.artifact_id)
    assert touched == {in_scope.artifact_id}
    for record in records:
        assert harness.artifacts[record.produced_id].investigation_id == "alpha"


def test_no_re_reaction_across_agents(harness):
    harness.emit("alice", "protein_data", {"sequence": "AAA"})
    first = harness.reactors["bob"].react(limit=3)
    consumed_by_bob = {i for r in first for i in r.consumed_ids}
    assert consumed_by_bob
    second = harness.reactors["carol"].react(limit=3)
    consumed_by_carol = {i for r in second for i in r.consumed_ids}
    assert consumed_by_bob.isdisjoint(consumed_by_carol)


def test_reaction_hooks_see_acyclic_graph(harness):
    checks = []
    for reactor in harness.reactors.values():
        reactor.on_reaction = lambda record: checks.append(harness.graph.is_acyclic())
    signal = NeedsSignal(items=(need("sequence_alignment"),))
    harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    harness.emit("alice", "protein_data", {"sequence": "AAA"})
    harness.emit("carol", "protein_data", {"sequence": "CCC"})
    harness.reactors["bob"].react(limit=3)
    assert checks and all(checks)


def test_ledger_files_on_disk(harness, tmp_path):
    artifact = harness.emit("alice", "protein_data", {"sequence": "AAA"})
    signal = NeedsSignal(items=(need("sequence_alignment"),))
    carrier = harness.emit("alice", "synthesis", {"topic": "t"}, needs=signal)
    harness.reactors["bob"].react(limit=3)
    bob_dir = tmp_path / "agents" / "bob"
    consumed = (bob_dir / "consumed.txt").read_text().split()
    consumed_needs = (bob_dir / "consumed_needs.txt").read_text().split()
    assert artifact.artifact_id in consumed
    assert f"{carrier.artifact_id}:0:default" in consumed_needs
    assert (bob_dir / "reactions.jsonl").exists()


def test_payload_key_cache_is_transparent(harness):
    artifact = harness.emit("alice", "protein_data", {"sequence": "AAA"})
    reactor = harness.reactors["bob"]
    entry = harness.index.entries()[0]
    fresh = reactor._payload_keys(entry)
    cached = reactor._payload_keys(entry)
    assert fresh == cached
    reactor._payload_keys_cache.clear()
    assert reactor._payload_keys(entry) == fresh
    assert "sequence" in fresh and artifact.artifact_id in harness.artifacts
