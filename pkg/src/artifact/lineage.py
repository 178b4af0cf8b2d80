"""Cross-agent DAG of parent references.

Depth is the length of the longest path from a node to any root (a node with
no parents); roots sit at depth 0. Graft operations never touch the immutable
artifact records: they live in an overlay of replacement parent lists that
every query consults.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .errors import CycleRejected, DanglingParent, UnknownArtifact


@dataclass(frozen=True)
class NodeInfo:
    artifact_id: str
    artifact_type: str
    producer_agent: str
    timestamp: str
    parent_ids: tuple


@dataclass
class DagMetrics:
    artifact_count: int
    synthesis_count: int
    avg_dag_depth: float
    per_agent: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "artifact_count": self.artifact_count,
            "synthesis_count": self.synthesis_count,
            "avg_dag_depth": self.avg_dag_depth,
            "per_agent": dict(self.per_agent),
        }


class LineageGraph:
    def __init__(self):
        self._nodes: dict[str, NodeInfo] = {}
        self._overlay: dict[str, tuple] = {}
        self._depth_memo: dict[str, int] = {}
        # Serializes structural writes and depth memoization; queries on a
        # quiescent graph stay lock-cheap.
        self._lock = threading.RLock()

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, artifact_id: str) -> NodeInfo:
        try:
            return self._nodes[artifact_id]
        except KeyError:
            raise UnknownArtifact(f"artifact {artifact_id} not in lineage graph")

    def parents(self, artifact_id: str) -> tuple:
        """Effective parent list: overlay replacement when one exists."""
        info = self.node(artifact_id)
        return self._overlay.get(artifact_id, info.parent_ids)

    def node_ids(self) -> list[str]:
        return list(self._nodes)

    def insert(self, artifact) -> None:
        """Add a node; every parent must already be present.

        Accepts anything with artifact_id / artifact_type / producer_agent /
        timestamp / parent_artifact_ids attributes (artifacts and index
        entries both qualify).
        """
        parent_ids = tuple(artifact.parent_artifact_ids)
        with self._lock:
            for parent in parent_ids:
                if parent not in self._nodes:
                    raise DanglingParent(
                        f"artifact {artifact.artifact_id} references missing parent {parent}"
                    )
            self._nodes[artifact.artifact_id] = NodeInfo(
                artifact_id=artifact.artifact_id,
                artifact_type=artifact.artifact_type,
                producer_agent=artifact.producer_agent,
                timestamp=artifact.timestamp,
                parent_ids=parent_ids,
            )
            # A fresh node cannot be anyone's parent yet, so existing depths stand.

    def depth(self, artifact_id: str) -> int:
        """Longest path from the node to any root; roots are depth 0."""
        with self._lock:
            if artifact_id not in self._nodes:
                raise UnknownArtifact(f"artifact {artifact_id} not in lineage graph")
            memo = self._depth_memo
            stack = [artifact_id]
            while stack:
                current = stack[-1]
                if current in memo:
                    stack.pop()
                    continue
                pending = [p for p in self.parents(current) if p not in memo]
                if pending:
                    stack.extend(pending)
                    continue
                parents = self.parents(current)
                memo[current] = (1 + max(memo[p] for p in parents)) if parents else 0
                stack.pop()
            return memo[artifact_id]

    def would_create_cycle(self, node_id: str, proposed_parent: str) -> bool:
        """True iff re-parenting node onto proposed_parent closes a loop.

        That happens exactly when the proposed parent is the node itself or
        one of its descendants, i.e. the node is reachable by walking parent
        edges upward from the proposed parent.
        """
        self.node(node_id)
        self.node(proposed_parent)
        if proposed_parent == node_id:
            return True
        seen = set()
        stack = [proposed_parent]
        while stack:
            current = stack.pop()
            if current == node_id:
                return True
            if current in seen:
                continue
            seen.add(current)
            stack.extend(self.parents(current))
        return False

    def set_parents(self, node_id: str, new_parents: tuple) -> None:
        """Install an overlay parent list, refusing cycles.

        Check and install happen under one lock so concurrent grafts cannot
        jointly close a loop that each check alone would miss.
        """
        with self._lock:
            self.node(node_id)
            for parent in new_parents:
                if parent not in self._nodes:
                    raise DanglingParent(f"overlay parent {parent} not in graph")
                if self.would_create_cycle(node_id, parent):
                    raise CycleRejected(
                        f"re-parenting {node_id} onto {parent} would create a cycle"
                    )
            self._overlay[node_id] = tuple(new_parents)
            self._depth_memo.clear()

    def children(self, artifact_id: str) -> list[str]:
        return [nid for nid in self._nodes if artifact_id in self.parents(nid)]

    def leaves(self) -> list[str]:
        """Ids of nodes with no children, in insertion order."""
        referenced = set()
        for nid in self._nodes:
            referenced.update(self.parents(nid))
        return [nid for nid in self._nodes if nid not in referenced]

    def is_acyclic(self) -> bool:
        """Brute-force three-color DFS over effective parent edges."""
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {nid: WHITE for nid in self._nodes}
        for start in self._nodes:
            if color[start] != WHITE:
                continue
            stack = [(start, iter(self.parents(start)))]
            color[start] = GRAY
            while stack:
                node_id, edges = stack[-1]
                advanced = False
                for parent in edges:
                    if color[parent] == GRAY:
                        return False
                    if color[parent] == WHITE:
                        color[parent] = GRAY
                        stack.append((parent, iter(self.parents(parent))))
                        advanced = True
                        break
                if not advanced:
                    color[node_id] = BLACK
                    stack.pop()
        return True

    def metrics(self) -> DagMetrics:
        """Structural Table-style metrics over the current graph."""
        per_agent: dict[str, int] = {}
        synthesis = 0
        depths = []
        for node_id in sorted(self._nodes):
            info = self._nodes[node_id]
            per_agent[info.producer_agent] = per_agent.get(info.producer_agent, 0) + 1
            parents = self.parents(node_id)
            if len(parents) >= 2 or info.artifact_type == "synthesis":
                synthesis += 1
            if parents:
                depths.append(self.depth(node_id))
        avg = sum(depths) / len(depths) if depths else 0.0
        return DagMetrics(
            artifact_count=len(self._nodes),
            synthesis_count=synthesis,
            avg_dag_depth=avg,
            per_agent=dict(sorted(per_agent.items())),
        )

    def _ordered_ids(self) -> list[str]:
        return sorted(self._nodes, key=lambda nid: (self._nodes[nid].timestamp, nid))

    def to_dot(self) -> str:
        """Graphviz rendering with deterministic node order."""
        lines = ["digraph lineage {"]
        for nid in self._ordered_ids():
            info = self._nodes[nid]
            lines.append(f'  "{nid}" [label="{info.artifact_type}\\n{info.producer_agent}"];')
        for nid in self._ordered_ids():
            for parent in self.parents(nid):
                lines.append(f'  "{nid}" -> "{parent}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_dump(self) -> dict:
        """Structured nodes-plus-edges dump with deterministic ordering."""
        nodes = []
        edges = []
        for nid in self._ordered_ids():
            info = self._nodes[nid]
            nodes.append({
                "artifact_id": nid,
                "artifact_type": info.artifact_type,
                "producer_agent": info.producer_agent,
                "timestamp": info.timestamp,
                "parent_artifact_ids": list(self.parents(nid)),
            })
            for parent in self.parents(nid):
                edges.append({"child": nid, "parent": parent})
        return {"nodes": nodes, "edges": edges}
