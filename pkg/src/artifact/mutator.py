"""Topology self-modification: fork stagnant leaves, merge redundancy,
resolve conflicts, all under a drifting policy.

Artifact records stay immutable throughout. Forks and merges add new
artifacts; grafts re-parent through the lineage graph's overlay and are
persisted as mutation events so a rebuilt graph reaches the same shape.
Policy snapshots live in the ordinary store as mutation_policy artifacts,
each parented to its predecessor.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping

from .canonical import Payload, canonical_line
from .errors import CycleRejected, NotForkable, NotSiblings
from .ledger import Artifact
from .lineage import LineageGraph
from .reactor import merge_payloads

MUTATIONS_FILE = "mutations.jsonl"

STAGNATION_BOUNDS = (1, 10)
REDUNDANCY_BOUNDS = (0.3, 0.95)

MUTATION_KINDS = ("fork", "merge", "graft")

POLICY_TYPE = "mutation_policy"


@dataclass(frozen=True)
class MutationPolicy:
    stagnation_cycles: int = 3
    redundancy_threshold: float = 0.7
    max_mutations_per_cycle: int = 2
    drift_step: float = 0.05

    def __post_init__(self):
        lo, hi = STAGNATION_BOUNDS
        if not lo <= self.stagnation_cycles <= hi:
            raise ValueError(f"stagnation_cycles out of bounds {STAGNATION_BOUNDS}")
        lo, hi = REDUNDANCY_BOUNDS
        if not lo <= self.redundancy_threshold <= hi:
            raise ValueError(f"redundancy_threshold out of bounds {REDUNDANCY_BOUNDS}")

    def to_payload(self) -> Payload:
        return {
            "stagnation_cycles": self.stagnation_cycles,
            "redundancy_threshold": self.redundancy_threshold,
            "max_mutations_per_cycle": self.max_mutations_per_cycle,
            "drift_step": self.drift_step,
        }

    @classmethod
    def from_payload(cls, payload: Mapping) -> "MutationPolicy":
        return cls(
            stagnation_cycles=payload["stagnation_cycles"],
            redundancy_threshold=payload["redundancy_threshold"],
            max_mutations_per_cycle=payload["max_mutations_per_cycle"],
            drift_step=payload["drift_step"],
        )


@dataclass(frozen=True)
class MutationEvent:
    kind: str
    inputs: tuple
    outputs: tuple
    cycle: int
    new_parent: str | None = None

    def __post_init__(self):
        if self.kind not in MUTATION_KINDS:
            raise ValueError(f"unknown mutation kind {self.kind!r}")
        if self.kind == "fork" and (len(self.inputs) != 1 or len(self.outputs) != 2):
            raise ValueError("fork takes one input and yields two outputs")
        if self.kind == "merge" and (len(self.inputs) < 2 or len(self.outputs) != 1):
            raise ValueError("merge takes >=2 inputs and yields one output")
        if self.kind == "graft" and (len(self.inputs) != 1 or self.new_parent is None):
            raise ValueError("graft takes one input and records its new parent")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "cycle": self.cycle,
            "new_parent": self.new_parent,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MutationEvent":
        return cls(
            kind=data["kind"],
            inputs=tuple(data["inputs"]),
            outputs=tuple(data["outputs"]),
            cycle=data["cycle"],
            new_parent=data.get("new_parent"),
        )


def _clamp(value: float, bounds: tuple) -> float:
    lo, hi = bounds
    return min(hi, max(lo, value))


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


def drift(
    policy: MutationPolicy,
    conflict_rate: float,
    redundancy_rate: float,
    rng: random.Random,
) -> MutationPolicy:
    """One stochastic threshold step in response to observed rates.

    Rates above the 0.2 working point tighten the corresponding threshold,
    rates below loosen it; uniform noise of half a step keeps the walk from
    locking onto a boundary. Deterministic for a seeded rng.
    """
    noise = rng.uniform(-policy.drift_step / 2, policy.drift_step / 2)
    threshold = _clamp(
        policy.redundancy_threshold
        - policy.drift_step * _sign(redundancy_rate - 0.2)
        + noise,
        REDUNDANCY_BOUNDS,
    )
    cycles = int(_clamp(
        round(policy.stagnation_cycles - _sign(conflict_rate - 0.2)),
        STAGNATION_BOUNDS,
    ))
    return replace(policy, redundancy_threshold=threshold, stagnation_cycles=cycles)


def fork_payloads(payload: Payload) -> tuple[Payload, Payload]:
    """Split a payload into two disjoint, jointly exhaustive key subsets."""
    keys = sorted(payload)
    if len(keys) < 2:
        raise NotForkable(f"payload has {len(keys)} top-level key(s), need >= 2")
    child_a = {k: payload[k] for k in keys[0::2]}
    child_b = {k: payload[k] for k in keys[1::2]}
    return child_a, child_b


def jaccard(a: frozenset, b: frozenset) -> float:
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


class Mutator:
    """Per-agent mutation layer run inside the owning agent's cycle.

    ``emit`` creates and publishes an artifact on the agent's behalf and
    returns it; ``resolve`` maps an artifact id to its full record.
    """

    def __init__(
        self,
        agent_name: str,
        graph: LineageGraph,
        resolve: Callable[[str], Artifact | None],
        emit: Callable[..., Artifact],
        policy: MutationPolicy | None = None,
        rng: random.Random | None = None,
        birth_cycles: dict | None = None,
        data_dir: str | Path | None = None,
    ):
        self.agent_name = agent_name
        self.graph = graph
        self.resolve = resolve
        self.emit = emit
        self.policy = policy or MutationPolicy()
        self.rng = rng or random.Random()
        self.birth_cycles = birth_cycles if birth_cycles is not None else {}
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.events: list[MutationEvent] = []
        self.policy_artifact_id: str | None = None
        self.last_rates: tuple[float, float] = (0.0, 0.0)

    # -- bookkeeping ----------------------------------------------------

    def _log_event(self, event: MutationEvent) -> None:
        self.events.append(event)
        if self.data_dir is not None:
            path = self.data_dir / MUTATIONS_FILE
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a", encoding="utf-8") as handle:
                handle.write(canonical_line(event.to_dict()))

    def _payload_keys(self, artifact_id: str) -> frozenset | None:
        artifact = self.resolve(artifact_id)
        if artifact is None:
            return None
        return frozenset(artifact.payload)

    def _sibling_pairs(self) -> list[tuple[str, str]]:
        """Distinct id pairs sharing at least one effective parent."""
        children: dict[str, list[str]] = {}
        for node_id in self.graph.node_ids():
            if self.graph.node(node_id).artifact_type == POLICY_TYPE:
                continue
            for parent in self.graph.parents(node_id):
                children.setdefault(parent, []).append(node_id)
        pairs = set()
        for sibling_ids in children.values():
            ordered = sorted(sibling_ids)
            for i, first in enumerate(ordered):
                for second in ordered[i + 1:]:
                    pairs.add((first, second))
        return sorted(pairs)

    def _share_parent(self, a_id: str, b_id: str) -> bool:
        return bool(set(self.graph.parents(a_id)) & set(self.graph.parents(b_id)))

    # -- detection ------------------------------------------------------

    def detect_stagnation(self, current_cycle: int) -> list[str]:
        """Leaves older than stagnation_cycles (strictly more) with no children."""
        flagged = []
        for leaf in self.graph.leaves():
            if self.graph.node(leaf).artifact_type == POLICY_TYPE:
                continue
            born = self.birth_cycles.get(leaf, 0)
            if current_cycle - born > self.policy.stagnation_cycles:
                flagged.append(leaf)
        return sorted(flagged)

    def detect_redundancy(self) -> list[tuple[str, str]]:
        """Sibling pairs whose payload key sets exceed the Jaccard threshold."""
        flagged = []
        for a_id, b_id in self._sibling_pairs():
            keys_a = self._payload_keys(a_id)
            keys_b = self._payload_keys(b_id)
            if keys_a is None or keys_b is None:
                continue
            if jaccard(keys_a, keys_b) > self.policy.redundancy_threshold:
                flagged.append((a_id, b_id))
        return flagged

    def detect_conflict(self) -> list[tuple[str, str, str]]:
        """(pair, key) rows where siblings disagree on a shared top-level key."""
        flagged = []
        for a_id, b_id in self._sibling_pairs():
            art_a = self.resolve(a_id)
            art_b = self.resolve(b_id)
            if art_a is None or art_b is None:
                continue
            for key in sorted(set(art_a.payload) & set(art_b.payload)):
                if art_a.payload[key] != art_b.payload[key]:
                    flagged.append((a_id, b_id, key))
        return flagged

    # -- operations -----------------------------------------------------

    def fork(self, artifact: Artifact, cycle: int = 0) -> tuple[Artifact, Artifact]:
        payload_a, payload_b = fork_payloads(artifact.payload)
        child_a = self.emit(
            artifact_type=artifact.artifact_type,
            skill="mutator",
            payload=payload_a,
            parents=(artifact.artifact_id,),
            investigation_id=artifact.investigation_id,
        )
        child_b = self.emit(
            artifact_type=artifact.artifact_type,
            skill="mutator",
            payload=payload_b,
            parents=(artifact.artifact_id,),
            investigation_id=artifact.investigation_id,
        )
        self._log_event(MutationEvent(
            kind="fork",
            inputs=(artifact.artifact_id,),
            outputs=(child_a.artifact_id, child_b.artifact_id),
            cycle=cycle,
        ))
        return child_a, child_b

    def merge_siblings(self, a: Artifact, b: Artifact, cycle: int = 0) -> Artifact:
        if not self._share_parent(a.artifact_id, b.artifact_id):
            raise NotSiblings(f"{a.artifact_id} and {b.artifact_id} share no parent")
        ordered = sorted((a, b), key=lambda x: (x.timestamp, x.artifact_id))
        merged_payload = merge_payloads(ordered)
        merged = self.emit(
            artifact_type="synthesis",
            skill="mutator",
            payload=merged_payload,
            parents=tuple(x.artifact_id for x in ordered),
            investigation_id=a.investigation_id if a.investigation_id == b.investigation_id else "",
        )
        self._log_event(MutationEvent(
            kind="merge",
            inputs=tuple(x.artifact_id for x in ordered),
            outputs=(merged.artifact_id,),
            cycle=cycle,
        ))
        return merged

    def graft(self, sibling_id: str, new_parent_id: str, cycle: int = 0) -> None:
        if self.graph.would_create_cycle(sibling_id, new_parent_id):
            raise CycleRejected(
                f"grafting {sibling_id} onto {new_parent_id} would create a cycle"
            )
        self.graph.set_parents(sibling_id, (new_parent_id,))
        self._log_event(MutationEvent(
            kind="graft",
            inputs=(sibling_id,),
            outputs=(),
            cycle=cycle,
            new_parent=new_parent_id,
        ))

    # -- the cycle --------------------------------------------------------

    def mutate_cycle(self, cycle: int) -> list[MutationEvent]:
        """Apply at most max_mutations_per_cycle events: conflicts first,
        then redundancy, then stagnation; smallest ids win within each class.
        """
        budget = self.policy.max_mutations_per_cycle
        applied: list[MutationEvent] = []
        touched: set[str] = set()
        sibling_pairs = self._sibling_pairs()
        conflicts = self.detect_conflict()
        redundant = self.detect_redundancy()
        denominator = max(1, len(sibling_pairs))
        conflict_pairs = sorted({(a, b) for a, b, _ in conflicts})
        self.last_rates = (
            len(conflict_pairs) / denominator,
            len(redundant) / denominator,
        )

        for a_id, b_id in conflict_pairs:
            if len(applied) >= budget:
                return applied
            if a_id in touched or b_id in touched:
                continue
            try:
                self.graft(b_id, a_id, cycle=cycle)
                applied.append(self.events[-1])
            except CycleRejected:
                art_a, art_b = self.resolve(a_id), self.resolve(b_id)
                if art_a is None or art_b is None:
                    continue
                self.merge_siblings(art_a, art_b, cycle=cycle)
                applied.append(self.events[-1])
            touched.update((a_id, b_id))

        for a_id, b_id in redundant:
            if len(applied) >= budget:
                return applied
            if a_id in touched or b_id in touched:
                continue
            if not self._share_parent(a_id, b_id):
                continue
            art_a, art_b = self.resolve(a_id), self.resolve(b_id)
            if art_a is None or art_b is None:
                continue
            self.merge_siblings(art_a, art_b, cycle=cycle)
            applied.append(self.events[-1])
            touched.update((a_id, b_id))

        for leaf in self.detect_stagnation(cycle):
            if len(applied) >= budget:
                return applied
            if leaf in touched:
                continue
            artifact = self.resolve(leaf)
            if artifact is None or len(artifact.payload) < 2:
                continue
            child_a, child_b = self.fork(artifact, cycle=cycle)
            applied.append(self.events[-1])
            touched.update((leaf, child_a.artifact_id, child_b.artifact_id))
            self.birth_cycles.setdefault(child_a.artifact_id, cycle)
            self.birth_cycles.setdefault(child_b.artifact_id, cycle)

        return applied

    def record_policy(self) -> Artifact:
        """Persist the current policy as a mutation_policy artifact."""
        parents = (self.policy_artifact_id,) if self.policy_artifact_id else ()
        artifact = self.emit(
            artifact_type=POLICY_TYPE,
            skill="mutator",
            payload=self.policy.to_payload(),
            parents=parents,
            investigation_id="",
        )
        self.policy_artifact_id = artifact.artifact_id
        return artifact

    def drift_policy(self) -> Artifact:
        """Drift thresholds from the last observed rates and persist the result."""
        conflict_rate, redundancy_rate = self.last_rates
        self.policy = drift(self.policy, conflict_rate, redundancy_rate, self.rng)
        return self.record_policy()
