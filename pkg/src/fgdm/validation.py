"""Checker for the three structural constraints on a rectified graph.

A repair is acceptable when (i) every original node survives, (ii) every
diagnosed node is touched by the plan, and (iii) the number of modified
edges stays within the number of defective vertices. A declared retarget
costs one modification, not a remove plus an add.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from fgdm.errors import InconsistentPlan
from fgdm.graph import FlowEdge, FlowGraph
from fgdm.plan import Diagnosis, RepairPlan

CHECK_NAMES = ("structure_preservation", "defect_coverage", "minimal_edge_manipulation")


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    checks: Mapping[str, CheckResult]
    modified_edge_count: int
    defective_vertex_count: int

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {
                name: {"passed": c.passed, "detail": c.detail}
                for name, c in self.checks.items()
            },
            "modified_edge_count": self.modified_edge_count,
            "defective_vertex_count": self.defective_vertex_count,
        }


def apply_edge_ops(edges: frozenset[FlowEdge], plan: RepairPlan) -> frozenset[FlowEdge]:
    out = set(edges)
    for op in plan.edge_ops:
        if op.op == "add":
            out.add(op.edge)
        elif op.op == "remove":
            out.discard(op.edge)
        elif op.op == "retarget":
            out.discard(op.edge)
            if op.replacement is not None:
                out.add(op.replacement)
        else:
            raise InconsistentPlan(f"unknown edge op {op.op!r}")
    return frozenset(out)


def validate_repair(
    original: FlowGraph,
    repaired: FlowGraph,
    plan: RepairPlan,
    diagnosis: Diagnosis,
) -> ValidationReport:
    """Run the three constraint checks over a proposed repair.

    Raises InconsistentPlan when applying plan.edge_ops to the original does
    not reproduce the repaired edge set; the plan and the rectified graph
    must tell the same story before any constraint is judged.
    """
    derived = apply_edge_ops(original.edge_set(), plan)
    if derived != repaired.edge_set():
        missing = sorted(
            f"{e.src}->{e.dst}[{e.relation}]" for e in repaired.edge_set() - derived
        )
        extra = sorted(
            f"{e.src}->{e.dst}[{e.relation}]" for e in derived - repaired.edge_set()
        )
        raise InconsistentPlan(
            f"edge ops do not reproduce the repaired graph; missing={missing}, extra={extra}"
        )

    orig_ids = original.node_ids()
    rep_ids = repaired.node_ids()
    dropped = sorted(orig_ids - rep_ids)
    structure = CheckResult(
        passed=not dropped,
        detail="all original nodes retained" if not dropped else f"dropped nodes: {dropped}",
    )

    touched = plan.touched_node_ids()
    unaddressed = sorted(diagnosis.faulty_node_ids - touched)
    coverage = CheckResult(
        passed=not unaddressed,
        detail="all faulty nodes addressed"
        if not unaddressed
        else f"unaddressed faulty nodes: {unaddressed}",
    )

    removed = original.edge_set() - repaired.edge_set()
    added = repaired.edge_set() - original.edge_set()
    modified = len(removed) + len(added)
    # A single declared retarget moves one edge; count it once.
    for op in plan.edge_ops:
        if (
            op.op == "retarget"
            and op.replacement is not None
            and op.edge in removed
            and op.replacement in added
        ):
            modified -= 1
    budget = len(diagnosis.faulty_node_ids)
    minimal = CheckResult(
        passed=modified <= budget,
        detail=f"{modified} modified edges vs {budget} defective vertices",
    )

    checks = {
        "structure_preservation": structure,
        "defect_coverage": coverage,
        "minimal_edge_manipulation": minimal,
    }
    return ValidationReport(
        passed=all(c.passed for c in checks.values()),
        checks=checks,
        modified_edge_count=modified,
        defective_vertex_count=budget,
    )
