"""Diagnosis and repair-plan domain types shared by the pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

from fgdm.graph import FlowEdge, FlowGraph

FAULT_CATEGORIES = (
    "broken_dependency",
    "flow_mismatch",
    "semantic_inconsistency",
    "other",
)

EDGE_OPS = ("add", "remove", "retarget")


@dataclass(frozen=True)
class Finding:
    reason: str
    category: str = "other"


@dataclass(frozen=True)
class Diagnosis:
    """Fault localizer output: faulty node ids with per-node findings."""

    faulty_node_ids: frozenset[str]
    findings: dict[str, Finding] = field(default_factory=dict)

    def __post_init__(self):
        assert set(self.findings) == set(self.faulty_node_ids)

    @property
    def is_empty(self) -> bool:
        return not self.faulty_node_ids


EMPTY_DIAGNOSIS = Diagnosis(faulty_node_ids=frozenset(), findings={})


@dataclass(frozen=True)
class EdgeOp:
    op: str  # add | remove | retarget
    edge: FlowEdge
    replacement: FlowEdge | None = None


@dataclass(frozen=True)
class NodeRewrite:
    faulty_lines: tuple[int, ...]
    replacement_code: str


@dataclass(frozen=True)
class RepairPlan:
    edge_ops: tuple[EdgeOp, ...]
    node_rewrites: dict[str, NodeRewrite]
    rectified_graph: FlowGraph
    rationale: str = ""

    def touched_node_ids(self) -> frozenset[str]:
        """Nodes 'addressed' by the plan: rewritten or an edge-op endpoint."""
        touched = set(self.node_rewrites)
        for op in self.edge_ops:
            touched.update((op.edge.src, op.edge.dst))
            if op.replacement is not None:
                touched.update((op.replacement.src, op.replacement.dst))
        return frozenset(touched)


def identity_plan(graph: FlowGraph) -> RepairPlan:
    return RepairPlan(edge_ops=(), node_rewrites={}, rectified_graph=graph, rationale="")
