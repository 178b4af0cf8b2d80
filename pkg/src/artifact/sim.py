"""Heartbeat-cycle simulator over multiple agents with deterministic skills.

A scenario pins the seed, the agent profiles, seeded topics, and scripted
interventions; a run is then fully reproducible: identical seeds yield
byte-identical stores, index, and report. Everything the paper delegates to
an LLM (topic analysis, gap scoring, engagement choice) is replaced by a
seeded deterministic stub that preserves the control flow.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Sequence

from .canonical import Payload, canonicalize
from .clock import EPOCH, ManualClock, parse_timestamp
from .errors import (
    AlreadyClaimed,
    ArtifactError,
    InvalidFormat,
    InvalidScenario,
    RateLimited,
    SkillMismatch,
    UnknownArtifact,
)
from .governance import ArtifactRef, GovernanceLedger
from .index import GlobalIndex, IndexEntry
from .ledger import Artifact, ArtifactStore, create_artifact, new_uuid
from .lineage import LineageGraph
from .memory import AgentJournal, InvestigationTracker, KnowledgeGraph, slugify
from .mutator import MUTATIONS_FILE, MutationEvent, MutationPolicy, Mutator
from .needs import NeedItem, NeedsSignal, tokenize
from .reactor import ArtifactReactor, ConsumptionClaims, ReactionRecord, build_params
from .skills import (
    AgentProfile,
    SkillRegistry,
    default_registry,
    execute,
    load_profile,
    load_registry,
)

log = logging.getLogger(__name__)

TICK_SECONDS = 21600  # the six-hour daemon interval, simulated
HUMAN_ACTOR = "human"
MAX_CHAIN_LENGTH = 5

DOMAIN_KEYWORDS = {
    "literature": {"literature", "paper", "papers", "review", "survey", "citation"},
    "protein": {"protein", "peptide", "sequence", "receptor", "binding", "motif"},
    "chemistry": {"chemistry", "compound", "molecule", "drug", "smiles", "admet"},
    "materials": {"materials", "material", "ceramic", "crystal", "alloy", "density"},
}


def stable_hash(*parts: str) -> int:
    """Seedable, process-independent hash for stub ordering decisions."""
    material = "\x1f".join(parts).encode("utf-8")
    return int(hashlib.sha256(material).hexdigest()[:16], 16)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeededTopic:
    cycle: int
    agent: str
    topic: str


@dataclass(frozen=True)
class Intervention:
    cycle: int
    agent: str  # the post author whose newest post receives the comment
    comment_type: str
    body: str


@dataclass
class Scenario:
    seed: int
    cycles: int
    agents: list
    registry: str = "default"
    seeded_topics: list = field(default_factory=list)
    interventions: list = field(default_factory=list)
    mutation_policy: dict = field(default_factory=dict)
    mutation_enabled: bool = True
    concurrent: bool = False
    community: str = "main"

    def validate(self) -> None:
        if self.cycles < 1:
            raise InvalidScenario("cycles must be >= 1")
        if not isinstance(self.seed, int):
            raise InvalidScenario("seed must be an integer")
        if not self.agents:
            raise InvalidScenario("at least one agent profile is required")
        names = [a["name"] for a in self.agents]
        if len(names) != len(set(names)):
            raise InvalidScenario("agent names must be unique")
        for topic in self.seeded_topics:
            if topic.agent not in names:
                raise InvalidScenario(f"seeded topic names unknown agent {topic.agent!r}")
            if not 0 <= topic.cycle < self.cycles:
                raise InvalidScenario(f"seeded topic cycle {topic.cycle} out of range")
        for act in self.interventions:
            if act.agent not in names:
                raise InvalidScenario(f"intervention names unknown agent {act.agent!r}")
            if act.comment_type not in ("chat", "redirect"):
                raise InvalidScenario("interventions must be chat or redirect")
            if not 0 <= act.cycle < self.cycles:
                raise InvalidScenario(f"intervention cycle {act.cycle} out of range")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cycles": self.cycles,
            "agents": [dict(a) for a in self.agents],
            "registry": self.registry,
            "seeded_topics": [
                {"cycle": t.cycle, "agent": t.agent, "topic": t.topic}
                for t in self.seeded_topics
            ],
            "interventions": [
                {"cycle": i.cycle, "agent": i.agent,
                 "comment_type": i.comment_type, "body": i.body}
                for i in self.interventions
            ],
            "mutation_policy": dict(self.mutation_policy),
            "mutation_enabled": self.mutation_enabled,
            "concurrent": self.concurrent,
            "community": self.community,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        scenario = cls(
            seed=data["seed"],
            cycles=data["cycles"],
            agents=list(data["agents"]),
            registry=data.get("registry", "default"),
            seeded_topics=[SeededTopic(**t) for t in data.get("seeded_topics", [])],
            interventions=[Intervention(**i) for i in data.get("interventions", [])],
            mutation_policy=dict(data.get("mutation_policy", {})),
            mutation_enabled=data.get("mutation_enabled", True),
            concurrent=data.get("concurrent", False),
            community=data.get("community", "main"),
        )
        scenario.validate()
        return scenario

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def demo_scenario() -> Scenario:
    """The bundled three-agent, five-cycle demo."""
    from importlib import resources

    text = resources.files("artifact.data").joinpath("demo_scenario.json").read_text("utf-8")
    return Scenario.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Collaborative sessions
# ---------------------------------------------------------------------------

@dataclass
class SessionTask:
    task_id: str
    description: str
    required_skill: str
    status: str = "open"
    claimant: str | None = None
    result_ref: str | None = None


@dataclass
class Session:
    id: str
    topic: str
    participants: list = field(default_factory=list)
    tasks: dict = field(default_factory=dict)
    results: list = field(default_factory=list)
    synthesis: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def claim_task(self, agent: str, task_id: str, agent_skills: Sequence[str]) -> SessionTask:
        """Atomically claim an open task; exactly one claimant ever succeeds."""
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise UnknownArtifact(f"no task {task_id} in session {self.id}")
            if task.required_skill not in agent_skills:
                raise SkillMismatch(
                    f"task {task_id} requires {task.required_skill}, "
                    f"which {agent} does not have"
                )
            if task.status != "open":
                raise AlreadyClaimed(f"task {task_id} already claimed by {task.claimant}")
            task.status = "claimed"
            task.claimant = agent
            if agent not in self.participants:
                self.participants.append(agent)
            return task

    def complete_task(self, agent: str, task_id: str, result_ref: str) -> SessionTask:
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise UnknownArtifact(f"no task {task_id} in session {self.id}")
            if task.claimant != agent or task.status != "claimed":
                raise ArtifactError(f"task {task_id} is not claimed by {agent}")
            task.status = "done"
            task.result_ref = result_ref
            self.results.append(result_ref)
            return task


class SessionBoard:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def create_session(self, topic: str, tasks: Sequence[tuple]) -> Session:
        """tasks: (description, required_skill) pairs."""
        with self._lock:
            self._counter += 1
            session_id = f"session-{self._counter:04d}"
            session = Session(id=session_id, topic=topic)
            for i, (description, skill) in enumerate(tasks):
                task_id = f"{session_id}-t{i}"
                session.tasks[task_id] = SessionTask(
                    task_id=task_id, description=description, required_skill=skill
                )
            self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        return self._sessions[session_id]


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

class AgentRuntime:
    """Everything one agent owns: stores, memory, reactor, mutator."""

    def __init__(self, profile: AgentProfile, world: "World"):
        self.profile = profile
        self.world = world
        self.dir = world.out_dir / "agents" / profile.name
        self.dir.mkdir(parents=True, exist_ok=True)
        self.rng = random.Random(stable_hash(str(world.scenario.seed), "agent", profile.name))
        self.store = ArtifactStore.open_dir(self.dir)
        self.journal = AgentJournal(self.dir / AgentJournal.FILENAME, clock=world.clock)
        self.tracker = InvestigationTracker(
            self.dir / InvestigationTracker.FILENAME, clock=world.clock
        )
        self.knowledge = KnowledgeGraph(self.dir / KnowledgeGraph.FILENAME)
        self.reactor = ArtifactReactor(
            profile=profile,
            registry=world.registry,
            index=world.index,
            graph=world.graph,
            store=self.store,
            resolve_artifact=world.resolve_entry,
            data_dir=self.dir,
            clock=world.clock,
            rng=self.rng,
            claims=world.claims,
            on_publish=world.on_publish,
            on_reaction=world.on_reaction,
        )
        policy = MutationPolicy(**world.scenario.mutation_policy) \
            if world.scenario.mutation_policy else MutationPolicy()
        self.mutator = Mutator(
            agent_name=profile.name,
            graph=world.graph,
            resolve=world.resolve_id,
            emit=self._emit_for_mutator,
            policy=policy,
            rng=random.Random(stable_hash(str(world.scenario.seed), "mutator", profile.name)),
            birth_cycles=world.birth_cycles,
            data_dir=self.dir,
        )

    def _emit_for_mutator(self, **kwargs) -> Artifact:
        return self.world.emit(self.profile.name, **kwargs)


class World:
    """Shared state of a simulation: clock, index, graph, ledgers, agents."""

    def __init__(self, scenario: Scenario, out_dir: str | Path):
        scenario.validate()
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.clock = ManualClock(current=EPOCH, step=timedelta(seconds=1))
        if scenario.registry == "default":
            self.registry = default_registry()
        else:
            self.registry = load_registry(scenario.registry)
        self.index = GlobalIndex(self.out_dir / GlobalIndex.FILENAME)
        self.graph = LineageGraph()
        self.claims = ConsumptionClaims()
        self.governance = GovernanceLedger(
            self.out_dir / "governance.jsonl",
            clock=self.clock,
            resolve_ref=lambda artifact_id: artifact_id in self.index,
        )
        self.sessions = SessionBoard()
        self.artifacts: dict[str, Artifact] = {}
        self.birth_cycles: dict[str, int] = {}
        self.current_cycle = 0
        self.reaction_hooks: list = []
        self._gov_lock = threading.Lock()
        self._emit_lock = threading.Lock()

        self.governance.register_agent(HUMAN_ACTOR)
        self.profiles: dict[str, AgentProfile] = {}
        self.agents: dict[str, AgentRuntime] = {}
        for raw in scenario.agents:
            profile = load_profile(raw, self.registry)
            self.profiles[profile.name] = profile
            self.governance.register_agent(profile.name)
        for name, profile in self.profiles.items():
            self.agents[name] = AgentRuntime(profile, self)
        if scenario.mutation_enabled:
            for name in self.agents:
                self.agents[name].mutator.record_policy()

    # -- shared services ---------------------------------------------------

    def resolve_entry(self, entry: IndexEntry) -> Artifact | None:
        return self.artifacts.get(entry.artifact_id)

    def resolve_id(self, artifact_id: str) -> Artifact | None:
        return self.artifacts.get(artifact_id)

    def on_publish(self, artifact: Artifact) -> None:
        self.artifacts[artifact.artifact_id] = artifact
        self.birth_cycles.setdefault(artifact.artifact_id, self.current_cycle)

    def on_reaction(self, record: ReactionRecord) -> None:
        for hook in self.reaction_hooks:
            hook(record)

    def claim_task(self, session_id: str, agent_name: str, task_id: str):
        """Claim a session task on behalf of an agent, using its own skill set."""
        profile = self.profiles[agent_name]
        skills = [m.name for m in self.registry.skills_for(profile)]
        return self.sessions.get(session_id).claim_task(agent_name, task_id, skills)

    def emit(
        self,
        agent_name: str,
        artifact_type: str,
        skill: str,
        payload: Payload,
        parents: Sequence[str] = (),
        investigation_id: str = "",
        needs: NeedsSignal | None = None,
    ) -> Artifact:
        """Create, store, graph, and index one artifact on an agent's behalf."""
        runtime = self.agents[agent_name]
        with self._emit_lock:
            artifact = create_artifact(
                artifact_type=artifact_type,
                producer_agent=agent_name,
                skill=skill,
                payload=payload,
                parents=parents,
                investigation_id=investigation_id,
                needs=needs,
                clock=self.clock,
                known_types=self.registry.artifact_types(),
                id_factory=lambda: new_uuid(runtime.rng),
            )
            runtime.store.append(artifact)
            self.graph.insert(artifact)
            self.index.publish(IndexEntry.for_artifact(artifact))
            self.on_publish(artifact)
        return artifact


# ---------------------------------------------------------------------------
# Heartbeat stubs
# ---------------------------------------------------------------------------

def _matched_domains(registry: SkillRegistry, tokens: set[str]) -> list[str]:
    matched = []
    for domain in registry.domains():
        keywords = {domain} | DOMAIN_KEYWORDS.get(domain, set())
        if tokens & keywords:
            matched.append(domain)
    return matched


def _unmatched_tokens(registry: SkillRegistry, tokens: set[str]) -> list[str]:
    known = set()
    for domain in registry.domains():
        known.add(domain)
        known.update(DOMAIN_KEYWORDS.get(domain, set()))
    return sorted(tokens - known)


def _registry_types_ordered(registry: SkillRegistry) -> list[str]:
    ordered: dict[str, None] = {}
    for manifest in registry.skills():
        ordered.setdefault(manifest.output_artifact_type, None)
    return list(ordered)


def select_chain(world: World, profile: AgentProfile, topic: str) -> list:
    """Deterministic stand-in for reasoned skill selection.

    One skill per domain the topic's tokens touch, in registry domain order,
    choosing the agent's first runnable skill of that domain; at most five.
    An unmatched topic falls back to the agent's first literature skill, or
    failing that its first skill of any kind.
    """
    registry = world.registry
    runnable = registry.skills_for(profile)
    tokens = tokenize(topic)
    chain = []
    for domain in _matched_domains(registry, tokens):
        manifest = next((m for m in runnable if m.domain == domain), None)
        if manifest is not None and manifest not in chain:
            chain.append(manifest)
        if len(chain) >= MAX_CHAIN_LENGTH:
            break
    if not chain and runnable:
        fallback = next((m for m in runnable if m.domain == "literature"), runnable[0])
        chain = [fallback]
    return chain


def derive_needs(world: World, profile: AgentProfile, topic: str) -> NeedsSignal | None:
    """Turn unmatched topic tokens into needs for types the agent cannot produce.

    The i-th unmatched token asks for the i-th foreign type in registry
    order, so a profile fully determines where its needs point.
    """
    registry = world.registry
    producible = {m.output_artifact_type for m in registry.skills_for(profile)}
    foreign = [t for t in _registry_types_ordered(registry) if t not in producible]
    if not foreign:
        return None
    items = []
    for i, token in enumerate(_unmatched_tokens(registry, tokenize(topic))[:2]):
        artifact_type = foreign[i % len(foreign)]
        items.append(NeedItem(
            artifact_type=artifact_type,
            query=f"{token} {topic}"[:80],
            rationale=(
                f"Investigation '{topic}' leaves '{token}' unresolved; "
                f"{artifact_type} data would close the gap."
            ),
        ))
    return NeedsSignal(items=tuple(items)) if items else None


def run_pipeline(world: World, agent_name: str, topic: str) -> dict:
    """Deterministic investigation chain: select, execute, chain, synthesize."""
    runtime = world.agents[agent_name]
    profile = runtime.profile
    slug = slugify(topic)
    investigation = runtime.tracker.create(topic)
    hypothesis = f"Investigating '{topic}' will surface cross-domain structure."
    runtime.tracker.add_hypothesis(slug, hypothesis)
    runtime.journal.log("hypothesis", hypothesis, {"investigation": slug})

    chain = select_chain(world, profile, topic)
    artifacts: list[Artifact] = []
    prev_payload: Payload = {}
    prev_id: str | None = None
    for manifest in chain:
        params = build_params(manifest, prev_payload) if prev_payload else {}
        params.setdefault("query", topic)
        if manifest.input_params:
            params.setdefault(manifest.input_params[0], topic)
        try:
            payload = execute(manifest, params, runtime.rng.randrange(2**32))
        except ArtifactError as exc:
            runtime.journal.log(
                "experiment", f"skill {manifest.name} skipped: {exc}",
                {"investigation": slug},
            )
            continue
        artifact = world.emit(
            agent_name,
            artifact_type=manifest.output_artifact_type,
            skill=manifest.name,
            payload=payload,
            parents=(prev_id,) if prev_id else (),
            investigation_id=slug,
        )
        runtime.journal.log(
            "experiment", f"ran {manifest.name}",
            {"investigation": slug, "artifact": artifact.artifact_id},
        )
        runtime.tracker.add_result(slug, {"artifact": artifact.artifact_id,
                                          "skill": manifest.name})
        artifacts.append(artifact)
        prev_payload = payload
        prev_id = artifact.artifact_id

    merged: Payload = {"topic": topic}
    for artifact in artifacts:
        merged.update(artifact.payload)
    needs = derive_needs(world, profile, topic)
    synthesis = world.emit(
        agent_name,
        artifact_type="synthesis",
        skill="synthesize",
        payload=merged,
        parents=(prev_id,) if prev_id else (),
        investigation_id=slug,
        needs=needs,
    )
    artifacts.append(synthesis)
    conclusion = f"Chain of {len(chain)} skill(s) synthesized for '{topic}'."
    runtime.journal.log("conclusion", conclusion, {"investigation": slug})
    if investigation.status == "active":  # re-runs resume a completed slug
        runtime.tracker.mark_complete(slug)

    unmatched = _unmatched_tokens(world.registry, tokenize(topic))[:2]
    return {
        "topic": topic,
        "investigation": slug,
        "chain": [m.name for m in chain],
        "artifacts": artifacts,
        "synthesis": synthesis,
        "open_questions": [f"What is the role of {tok} in {topic}?" for tok in unmatched],
    }


def heartbeat(world: World, agent_name: str, cycle: int) -> dict:
    """One autonomous cycle: observe, drain interventions, pick a topic,
    investigate, publish, engage, react, mutate."""
    runtime = world.agents[agent_name]
    scenario = world.scenario
    report = {
        "agent": agent_name,
        "cycle": cycle,
        "topic": None,
        "post": None,
        "upvoted": None,
        "artifacts": [],
        "reactions": [],
        "mutations": [],
    }

    with world._gov_lock:
        feed = world.governance.feed(community=scenario.community)
    runtime.journal.log("observation", f"observed {len(feed)} posts on the feed")

    redirects: list[str] = []
    with world._gov_lock:
        pending = world.governance.pending_interventions(agent_name)
        for comment in pending:
            if comment.comment_type == "redirect" and comment.redirect_subquestion:
                redirects.append(comment.redirect_subquestion)
            runtime.journal.log(
                "observation",
                f"{comment.comment_type} from {comment.author}: {comment.body}",
                {"comment": comment.id},
            )
            world.governance.mark_intervention_read(comment.id)

    gaps: list[str] = []
    for post in feed:
        if post.author == agent_name:
            continue
        for question in post.open_questions:
            if slugify(question) not in runtime.tracker and question not in gaps:
                gaps.append(question)
    gaps.sort(key=lambda q: stable_hash(str(scenario.seed), "gap", agent_name, q))

    seeded = [
        t.topic for t in scenario.seeded_topics
        if t.cycle == cycle and t.agent == agent_name
    ]
    queue = redirects + seeded + gaps
    topic = queue[0] if queue else None
    report["topic"] = topic

    if topic is not None:
        try:
            outcome = run_pipeline(world, agent_name, topic)
        except Exception as exc:  # a failed step never kills the cycle
            log.exception("pipeline failed for %s on %r", agent_name, topic)
            runtime.journal.log("observation", f"pipeline failed: {exc}")
            outcome = None
        if outcome is not None:
            report["artifacts"] = [a.artifact_id for a in outcome["artifacts"]]
            refs = [
                ArtifactRef(
                    artifact_id=a.artifact_id,
                    artifact_type=a.artifact_type,
                    skill=a.skill,
                    producer_agent=a.producer_agent,
                    parent_artifact_ids=a.parent_artifact_ids,
                )
                for a in outcome["artifacts"]
            ]
            try:
                with world._gov_lock:
                    post = world.governance.create_post(
                        author=agent_name,
                        title=f"Findings: {topic}"[:120],
                        content=f"Deterministic investigation of '{topic}'.",
                        community=scenario.community,
                        hypothesis=f"Investigating '{topic}' will surface "
                                   f"cross-domain structure.",
                        method=" -> ".join(outcome["chain"]) or "synthesize",
                        findings=f"synthesis artifact {outcome['synthesis'].artifact_id}",
                        data_sources=[a.artifact_id for a in outcome["artifacts"]],
                        open_questions=outcome["open_questions"],
                        tools_used=outcome["chain"],
                        artifact_refs=refs,
                    )
                report["post"] = post.id
            except (RateLimited, ArtifactError) as exc:
                runtime.journal.log("observation", f"post deferred: {exc}")

    with world._gov_lock:
        peers = [p for p in feed if p.author not in (agent_name, HUMAN_ACTOR)]
        if peers:
            target = peers[0]  # feed is newest-first
            try:
                world.governance.apply_vote(agent_name, target.id, 1)
                report["upvoted"] = target.id
            except (RateLimited, ArtifactError) as exc:
                runtime.journal.log("observation", f"vote deferred: {exc}")

    records = runtime.reactor.react(limit=3)
    report["reactions"] = [
        {"kind": r.kind, "produced": r.produced_id, "skill": r.skill}
        for r in records
    ]

    if scenario.mutation_enabled:
        try:
            events = runtime.mutator.mutate_cycle(cycle)
            runtime.mutator.drift_policy()
            report["mutations"] = [e.to_dict() for e in events]
        except Exception as exc:
            log.exception("mutation step failed for %s", agent_name)
            runtime.journal.log("observation", f"mutation step failed: {exc}")

    return report


# ---------------------------------------------------------------------------
# Running scenarios
# ---------------------------------------------------------------------------

@dataclass
class SimulationReport:
    scenario: dict
    cycles: list
    dag_metrics: dict
    per_agent_artifacts: dict
    need_latencies: dict
    mean_need_latency_seconds: float | None
    posts: int
    reactions: int
    mutations: int

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "cycles": self.cycles,
            "dag_metrics": self.dag_metrics,
            "per_agent_artifacts": self.per_agent_artifacts,
            "need_latencies": self.need_latencies,
            "mean_need_latency_seconds": self.mean_need_latency_seconds,
            "posts": self.posts,
            "reactions": self.reactions,
            "mutations": self.mutations,
        }


def _apply_interventions(world: World, cycle: int) -> list[dict]:
    applied = []
    for act in world.scenario.interventions:
        if act.cycle != cycle:
            continue
        candidates = [
            p for p in world.governance.posts.values() if p.author == act.agent
        ]
        candidates.sort(key=lambda p: (p.created, p.id))
        outcome = {"agent": act.agent, "comment_type": act.comment_type,
                   "body": act.body, "applied": False}
        if candidates:
            world.clock.advance(seconds=21)  # respect comment spacing
            target = candidates[-1]
            world.governance.create_comment(
                author=HUMAN_ACTOR,
                post_id=target.id,
                body=act.body,
                comment_type=act.comment_type,
                redirect_subquestion=act.body if act.comment_type == "redirect" else None,
            )
            outcome["applied"] = True
            outcome["post"] = target.id
        applied.append(outcome)
    return applied


def need_latencies(index: GlobalIndex) -> dict[str, float]:
    """Seconds from a need's broadcast to each recorded fulfillment."""
    created: dict[str, str] = {}
    for entry in index.entries():
        created[entry.artifact_id] = entry.timestamp
    latencies: dict[str, float] = {}
    for entry in index.entries():
        if entry.fulfills is None:
            continue
        born = created.get(entry.fulfills.artifact_id)
        if born is None:
            continue
        delta = parse_timestamp(entry.timestamp) - parse_timestamp(born)
        latencies[entry.fulfills.text] = delta.total_seconds()
    return latencies


def run(scenario: Scenario, out_dir: str | Path) -> tuple[World, SimulationReport]:
    """Execute a scenario and write stores, index, ledgers, and report.json."""
    world = World(scenario, out_dir)
    cycle_reports = []
    for cycle in range(scenario.cycles):
        world.current_cycle = cycle
        world.clock.advance(seconds=TICK_SECONDS)
        interventions = _apply_interventions(world, cycle)
        agent_reports: dict[str, dict] = {}
        if scenario.concurrent:
            threads = []
            results: dict[str, dict] = {}

            def _run(name: str) -> None:
                results[name] = heartbeat(world, name, cycle)

            for name in world.agents:
                thread = threading.Thread(target=_run, args=(name,))
                threads.append(thread)
                thread.start()
            for thread in threads:
                thread.join()
            agent_reports = {name: results[name] for name in world.agents}
        else:
            for name in world.agents:
                agent_reports[name] = heartbeat(world, name, cycle)
        cycle_reports.append({
            "cycle": cycle,
            "interventions": interventions,
            "agents": agent_reports,
        })

    metrics = world.graph.metrics()
    latencies = need_latencies(world.index)
    mean_latency = (
        sum(latencies.values()) / len(latencies) if latencies else None
    )
    report = SimulationReport(
        scenario=scenario.to_dict(),
        cycles=cycle_reports,
        dag_metrics=metrics.to_dict(),
        per_agent_artifacts=dict(metrics.per_agent),
        need_latencies=dict(sorted(latencies.items())),
        mean_need_latency_seconds=mean_latency,
        posts=len(world.governance.posts),
        reactions=sum(
            len(world.agents[name].reactor.reaction_log) for name in world.agents
        ),
        mutations=sum(
            len(world.agents[name].mutator.events) for name in world.agents
        ),
    )
    report_path = Path(out_dir) / "report.json"
    with open(report_path, "wb") as handle:
        handle.write(canonicalize(report.to_dict()))
        handle.write(b"\n")
    return world, report


# ---------------------------------------------------------------------------
# Rebuilding and exporting
# ---------------------------------------------------------------------------

def load_world_dag(out_dir: str | Path) -> tuple[LineageGraph, dict]:
    """Rebuild the lineage graph (with graft overlays) from an output dir."""
    out = Path(out_dir)
    artifacts: dict[str, Artifact] = {}
    agent_dirs = sorted((out / "agents").iterdir()) if (out / "agents").exists() else []
    for agent_dir in agent_dirs:
        store_path = agent_dir / ArtifactStore.FILENAME
        if store_path.exists():
            for artifact in ArtifactStore(store_path).load():
                artifacts[artifact.artifact_id] = artifact
    graph = LineageGraph()
    for artifact in sorted(artifacts.values(), key=lambda a: (a.timestamp, a.artifact_id)):
        graph.insert(artifact)
    grafts = []
    for agent_dir in agent_dirs:
        mut_path = agent_dir / MUTATIONS_FILE
        if not mut_path.exists():
            continue
        with open(mut_path, "r", encoding="utf-8") as handle:
            for seq, raw in enumerate(handle):
                event = MutationEvent.from_dict(json.loads(raw))
                if event.kind == "graft":
                    grafts.append((event.cycle, agent_dir.name, seq, event))
    for _, _, _, event in sorted(grafts, key=lambda g: (g[0], g[1], g[2])):
        graph.set_parents(event.inputs[0], (event.new_parent,))
    return graph, artifacts


def export_dag(graph: LineageGraph, fmt: str) -> str:
    if fmt == "graph-text":
        return graph.to_dot()
    if fmt == "structured-dump":
        return canonicalize(graph.to_dump()).decode("utf-8") + "\n"
    raise InvalidFormat(f"unknown export format {fmt!r}; "
                        f"use graph-text or structured-dump")


# ---------------------------------------------------------------------------
# Invariant verification
# ---------------------------------------------------------------------------

def verify_output(out_dir: str | Path) -> list[str]:
    """Re-check the core invariants from the files a run left behind.

    Returns a list of violation descriptions; empty means all checks passed.
    """
    from .ledger import verify_integrity
    from .reactor import REACTIONS_FILE
    from .skills import allowed_types

    out = Path(out_dir)
    violations: list[str] = []
    graph, artifacts = load_world_dag(out)

    if not graph.is_acyclic():
        violations.append("lineage graph contains a cycle")

    for artifact in artifacts.values():
        if not verify_integrity(artifact):
            violations.append(f"hash mismatch for artifact {artifact.artifact_id}")

    report_path = out / "report.json"
    scenario = None
    if report_path.exists():
        with open(report_path, "r", encoding="utf-8") as handle:
            report = json.load(handle)
        scenario = Scenario.from_dict(report["scenario"])
        recomputed = graph.metrics()
        reported = report["dag_metrics"]
        if abs(recomputed.avg_dag_depth - reported["avg_dag_depth"]) > 1e-9:
            violations.append(
                f"avg_dag_depth mismatch: reported {reported['avg_dag_depth']}, "
                f"recomputed {recomputed.avg_dag_depth}"
            )
        if recomputed.artifact_count != reported["artifact_count"]:
            violations.append("artifact_count mismatch between report and stores")

    registry = None
    profiles: dict[str, AgentProfile] = {}
    if scenario is not None:
        registry = default_registry() if scenario.registry == "default" \
            else load_registry(scenario.registry)
        for raw in scenario.agents:
            profile = load_profile(raw, registry)
            profiles[profile.name] = profile

    consumed_by: dict[str, str] = {}
    agent_dirs = sorted((out / "agents").iterdir()) if (out / "agents").exists() else []
    for agent_dir in agent_dirs:
        agent = agent_dir.name
        reactions_path = agent_dir / REACTIONS_FILE
        if not reactions_path.exists():
            continue
        with open(reactions_path, "r", encoding="utf-8") as handle:
            for raw in handle:
                record = json.loads(raw)
                for consumed in record["consumed_ids"]:
                    if consumed in consumed_by:
                        violations.append(
                            f"artifact {consumed} consumed twice "
                            f"({consumed_by[consumed]} and {agent})"
                        )
                    consumed_by[consumed] = agent
                    producer = artifacts.get(consumed)
                    if producer is not None and producer.producer_agent == agent:
                        violations.append(
                            f"{agent} consumed its own artifact {consumed}"
                        )
                    if producer is not None and registry is not None and agent in profiles:
                        allowed = allowed_types(profiles[agent], registry)
                        if producer.artifact_type not in allowed:
                            violations.append(
                                f"{agent} consumed out-of-domain type "
                                f"{producer.artifact_type} ({consumed})"
                            )
    return violations
