"""The four-agent repair pipeline and its per-file orchestrator.

Agent 1 builds the flow graph, Agent 2 localizes faulty nodes, Agent 3
repairs the graph under the structural constraints, Agent 4 reconstructs the
source. One prompting strategy (standard / cot / tot) applies to the whole
run; the only fixed exception is Agent 1's single CoT retry when the first
graph comes back with fewer than 3 nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template

from fgdm.errors import (
    Agent1Failed,
    EmptyGraph,
    FgdmError,
    InconsistentPlan,
    InvariantViolation,
    NoPayloadFound,
    SchemaViolation,
)
from fgdm.gateway import (
    CompletionRequest,
    Gateway,
    extract_structured,
    first_fenced_block,
    request_digest,
)
from fgdm.graph import (
    NODE_KINDS,
    BuildResult,
    CodeNode,
    FlowEdge,
    FlowGraph,
    build_graph,
    clean_dot,
    compute_graph_stats,
    make_graph,
    write_dot,
)
from fgdm.metrics import MetricsRecord, cosine_sim, levenshtein, line_dist
from fgdm.plan import (
    EMPTY_DIAGNOSIS,
    Diagnosis,
    EdgeOp,
    Finding,
    NodeRewrite,
    RepairPlan,
    identity_plan,
)
from fgdm.segment import SegmentResult, coverage_check, dialect_for_path, segment
from fgdm.store import KnowledgeRecord, KnowledgeStore, embed_graph
from fgdm.validation import CheckResult, ValidationReport, validate_repair

STRATEGIES = ("standard", "cot", "tot")

MIN_NODES = 3  # below this, Agent 1 gets its one CoT retry


def load_template(agent: int, strategy: str) -> tuple[str, Template]:
    text = (
        resources.files("fgdm.prompts")
        .joinpath(f"agent{agent}_{strategy}.txt")
        .read_text("utf-8")
    )
    _, _, rest = text.partition("[system]\n")
    system_text, _, user_text = rest.partition("\n[user]\n")
    return system_text.strip(), Template(user_text.strip())


@dataclass
class PipelineContext:
    gateway: Gateway
    store: KnowledgeStore
    store_snapshot: KnowledgeStore
    retrieval_k: int = 3
    out_dir: Path | None = None

    def artifact_dir(self, stage: str) -> Path | None:
        if self.out_dir is None:
            return None
        d = self.out_dir / stage
        d.mkdir(parents=True, exist_ok=True)
        return d


@dataclass
class PipelineRecord:
    file: str
    strategy: str
    graph: FlowGraph | None = None
    diagnosis: Diagnosis = EMPTY_DIAGNOSIS
    repair: RepairPlan | None = None
    fixed_code: str | None = None
    recommendations: list[str] = field(default_factory=list)
    validation: ValidationReport | None = None
    metrics: list[MetricsRecord] = field(default_factory=list)
    transcripts: list[tuple[str, str]] = field(default_factory=list)
    retry_count_agent1: int = 0
    warnings: list[str] = field(default_factory=list)
    error: str | None = None


# --- prompt rendering helpers ---


def numbered_source(source: str) -> str:
    lines = source.split("\n")
    width = len(str(len(lines)))
    return "\n".join(f"{i:>{width}} | {line}" for i, line in enumerate(lines, start=1))


def render_segments(seg: SegmentResult) -> str:
    if not seg.candidates:
        return "(none)"
    return "\n".join(
        f"- lines {c.span[0]}-{c.span[1]}: {c.kind_hint} (depth {c.nesting_depth})"
        for c in seg.candidates
    )


def format_faults(diagnosis: Diagnosis, graph: FlowGraph) -> str:
    parts = []
    for nid in sorted(diagnosis.faulty_node_ids):
        finding = diagnosis.findings[nid]
        span = graph.node_by_id(nid).span
        parts.append(f"- {nid} (lines {span[0]}-{span[1]}): [{finding.category}] {finding.reason}")
    return "\n".join(parts) if parts else "(none)"


def render_retrieved(retrieved: list[tuple[KnowledgeRecord, float]]) -> str:
    if not retrieved:
        return "(none)"
    return "\n".join(
        f"- {rec.record_id} (score {score:.4f}): bug: {rec.bug_description}; "
        f"fix: {rec.fix_description}"
        for rec, score in retrieved
    )


def render_repair(plan: RepairPlan) -> str:
    doc = {
        "rationale": plan.rationale,
        "edge_ops": [
            {
                "op": op.op,
                "edge": {"src": op.edge.src, "dst": op.edge.dst, "relation": op.edge.relation},
                **(
                    {
                        "replacement": {
                            "src": op.replacement.src,
                            "dst": op.replacement.dst,
                            "relation": op.replacement.relation,
                        }
                    }
                    if op.replacement
                    else {}
                ),
            }
            for op in plan.edge_ops
        ],
        "node_rewrites": {
            nid: {"faulty_lines": list(rw.faulty_lines), "replacement_code": rw.replacement_code}
            for nid, rw in sorted(plan.node_rewrites.items())
        },
    }
    return json.dumps(doc, indent=2) + "\nRectified graph:\n" + clean_dot(plan.rectified_graph)


# --- gateway interaction ---


def _ask(
    gw: Gateway,
    system_text: str,
    user_text: str,
    tag: str,
    schema_id: str,
    transcripts: list[tuple[str, str]],
) -> dict:
    """One completion with a single automatic re-ask on contract failure."""
    req = CompletionRequest(system_text=system_text, user_text=user_text, tag=tag)
    resp = gw.complete(req)
    transcripts.append((tag, request_digest(req)))
    try:
        return extract_structured(resp.text, schema_id)
    except (SchemaViolation, NoPayloadFound) as exc:
        retry_user = (
            user_text
            + "\n\nYour previous reply did not satisfy the output contract:\n"
            + str(exc)
            + "\nReply again with a single corrected JSON object."
        )
        req2 = CompletionRequest(system_text=system_text, user_text=retry_user, tag=tag + ":reask")
        resp2 = gw.complete(req2)
        transcripts.append((req2.tag, request_digest(req2)))
        return extract_structured(resp2.text, schema_id)


def _complete_raw(
    gw: Gateway, system_text: str, user_text: str, tag: str, transcripts: list[tuple[str, str]]
) -> str:
    req = CompletionRequest(system_text=system_text, user_text=user_text, tag=tag)
    resp = gw.complete(req)
    transcripts.append((tag, request_digest(req)))
    return resp.text


# --- agents ---


def agent1_build(
    source: str,
    filename: str,
    dialect: str,
    strategy: str,
    gw: Gateway,
    segments: SegmentResult,
    transcripts: list[tuple[str, str]],
) -> tuple[BuildResult, int]:
    """Flow-graph construction with the fixed <3-node CoT retry.

    Hard-fails (Agent1Failed) if the retry also yields an unusable graph:
    the pipeline is graph-mandatory and never degrades to plain-text
    analysis.
    """

    def attempt(attempt_strategy: str, attempt_no: int) -> BuildResult:
        system_text, template = load_template(1, attempt_strategy)
        user_text = template.substitute(
            filename=filename,
            dialect=dialect,
            source=numbered_source(source),
            segments=render_segments(segments),
        )
        tag = f"{filename}:agent1:{strategy}:attempt{attempt_no}"
        payload = _ask(gw, system_text, user_text, tag, "graph_spec", transcripts)
        return build_graph(payload, source=source, file=filename)

    first_error: FgdmError | None = None
    result: BuildResult | None = None
    try:
        result = attempt(strategy, 1)
    except (SchemaViolation, NoPayloadFound, EmptyGraph, InvariantViolation) as exc:
        first_error = exc
    if result is not None and len(result.graph.nodes) >= MIN_NODES:
        return result, 0

    try:
        retry = attempt("cot", 2)
    except (SchemaViolation, NoPayloadFound, EmptyGraph, InvariantViolation) as exc:
        raise Agent1Failed(
            f"retry failed ({exc}); first attempt: "
            f"{first_error or f'{len(result.graph.nodes)} nodes'}"
        ) from exc
    if len(retry.graph.nodes) < MIN_NODES:
        raise Agent1Failed(
            f"retry produced {len(retry.graph.nodes)} nodes (< {MIN_NODES})"
        )
    return retry, 1


def agent2_localize(
    graph: FlowGraph,
    stats_text: str,
    retrieved: list[tuple[KnowledgeRecord, float]],
    strategy: str,
    gw: Gateway,
    filename: str,
    transcripts: list[tuple[str, str]],
) -> tuple[Diagnosis, list[str]]:
    system_text, template = load_template(2, strategy)
    user_text = template.substitute(
        stats=stats_text,
        graph_dot=clean_dot(graph),
        retrieved=render_retrieved(retrieved),
    )
    tag = f"{filename}:agent2:{strategy}"
    payload = _ask(gw, system_text, user_text, tag, "diagnosis", transcripts)
    warnings: list[str] = []
    known = graph.node_ids()
    findings: dict[str, Finding] = {}
    for entry in payload["faulty_nodes"]:
        nid = entry["id"]
        if nid not in known:
            warnings.append(f"diagnosis names unknown node {nid}, dropped")
            continue
        findings[nid] = Finding(
            reason=entry.get("reason", ""), category=entry.get("category", "other")
        )
    return Diagnosis(faulty_node_ids=frozenset(findings), findings=findings), warnings


def _graph_from_payload(payload: dict, file: str) -> FlowGraph:
    """Rectified-graph parse that trusts the agent's node ids.

    No renumbering here: the ids must line up with the original graph for
    validation, and the prompt showed the agent the normalized ids.
    """
    nodes = []
    for decl in payload.get("nodes", []):
        kind = decl.get("kind", "statement-group")
        if kind not in NODE_KINDS:
            kind = "statement-group"
        span = decl.get("span", [1, 1])
        nodes.append(
            CodeNode(
                id=str(decl["id"]),
                kind=kind,
                label=str(decl.get("label", decl["id"])),
                span=(int(span[0]), int(span[1])),
            )
        )
    edges = [
        FlowEdge(src=str(d["src"]), dst=str(d["dst"]), relation=str(d["relation"]))
        for d in payload.get("edges", [])
    ]
    return make_graph(file, nodes, edges)


def _plan_from_payload(payload: dict, file: str) -> RepairPlan:
    edge_ops = []
    for raw in payload["edge_ops"]:
        edge = FlowEdge(**raw["edge"])
        replacement = FlowEdge(**raw["replacement"]) if raw.get("replacement") else None
        edge_ops.append(EdgeOp(op=raw["op"], edge=edge, replacement=replacement))
    rewrites = {
        raw["id"]: NodeRewrite(
            faulty_lines=tuple(raw["faulty_lines"]),
            replacement_code=raw["replacement_code"],
        )
        for raw in payload["node_rewrites"]
    }
    rectified = _graph_from_payload(payload["rectified_graph"], file)
    return RepairPlan(
        edge_ops=tuple(edge_ops),
        node_rewrites=rewrites,
        rectified_graph=rectified,
        rationale=payload.get("rationale", ""),
    )


def _failed_report(detail: str, diagnosis: Diagnosis) -> ValidationReport:
    checks = {
        name: CheckResult(passed=False, detail=f"not evaluated: {detail}")
        for name in ("structure_preservation", "defect_coverage", "minimal_edge_manipulation")
    }
    return ValidationReport(
        passed=False,
        checks=checks,
        modified_edge_count=0,
        defective_vertex_count=len(diagnosis.faulty_node_ids),
    )


def agent3_repair(
    graph: FlowGraph,
    diagnosis: Diagnosis,
    retrieved: list[tuple[KnowledgeRecord, float]],
    strategy: str,
    gw: Gateway,
    filename: str,
    transcripts: list[tuple[str, str]],
) -> tuple[RepairPlan, ValidationReport]:
    """Graph repair with one validation-driven re-ask.

    A second validation failure marks the result failed but still returns it:
    reconstruction proceeds report-only.
    """
    system_text, template = load_template(3, strategy)
    base_user = template.substitute(
        faults=format_faults(diagnosis, graph),
        graph_dot=clean_dot(graph),
        retrieved=render_retrieved(retrieved),
    )

    def attempt(user_text: str, tag: str) -> tuple[RepairPlan, ValidationReport | None, str]:
        payload = _ask(gw, system_text, user_text, tag, "repair", transcripts)
        try:
            plan = _plan_from_payload(payload, filename)
        except (InvariantViolation, KeyError, TypeError, ValueError) as exc:
            return identity_plan(graph), None, f"unusable repair payload: {exc}"
        try:
            report = validate_repair(graph, plan.rectified_graph, plan, diagnosis)
        except InconsistentPlan as exc:
            return plan, None, str(exc)
        return plan, report, ""

    tag1 = f"{filename}:agent3:{strategy}"
    plan, report, problem = attempt(base_user, tag1)
    if report is not None and report.passed:
        return plan, report
    violation = problem or "; ".join(
        f"{name}: {check.detail}"
        for name, check in (report.checks.items() if report else [])
        if not check.passed
    )
    retry_user = (
        base_user
        + "\n\nYour previous repair violated the structural constraints:\n"
        + violation
        + "\nProduce a corrected repair."
    )
    plan2, report2, problem2 = attempt(retry_user, tag1 + ":revalidate")
    if report2 is None:
        return plan2, _failed_report(problem2, diagnosis)
    return plan2, report2


def agent4_reconstruct(
    source: str,
    repair: RepairPlan,
    strategy: str,
    gw: Gateway,
    filename: str,
    transcripts: list[tuple[str, str]],
) -> tuple[str, list[str]]:
    system_text, template = load_template(4, strategy)
    user_text = template.substitute(
        filename=filename,
        source=source,
        repair=render_repair(repair),
    )
    tag = f"{filename}:agent4:{strategy}"
    raw = _complete_raw(gw, system_text, user_text, tag, transcripts)
    try:
        payload = extract_structured(raw, "reconstruction")
        fixed = payload["fixed_code"]
        recommendations = [str(r) for r in payload.get("recommendations", [])]
    except NoPayloadFound:
        # Some responses come back as a plain fenced code block.
        block = first_fenced_block(raw)
        if block is None:
            raise
        fixed = block
        recommendations = []
    fenced = first_fenced_block(fixed)
    if fenced is not None and fixed.strip().startswith("```") and fixed.strip().endswith("```"):
        fixed = fenced
    return fixed, recommendations


# --- per-file orchestration ---


def _read_source(path) -> str:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        return fh.read()


def _compute_metrics(source: str, fixed: str, truth: str | None) -> list[MetricsRecord]:
    out = [
        MetricsRecord(
            levenshtein=levenshtein(source, fixed),
            line_dist=line_dist(source, fixed),
            cosine=cosine_sim(source, fixed),
            baseline="source_vs_fixed",
        )
    ]
    if truth is not None:
        out.append(
            MetricsRecord(
                levenshtein=levenshtein(fixed, truth),
                line_dist=line_dist(fixed, truth),
                cosine=cosine_sim(fixed, truth),
                baseline="fixed_vs_truth",
            )
        )
    return out


def run_pipeline(
    file,
    strategy: str,
    ctx: PipelineContext,
    truth_path=None,
    dialect: str | None = None,
) -> PipelineRecord:
    """Run Agents 1-4 plus metrics for one file; failures land in .error."""
    file = Path(file)
    filename = file.name
    record = PipelineRecord(file=str(file), strategy=strategy)
    source = _read_source(file)
    dialect = dialect or dialect_for_path(file)
    seg = segment(source, dialect)
    record.warnings.extend(seg.issues)

    try:
        built, retries = agent1_build(
            source, filename, dialect, strategy, ctx.gateway, seg, record.transcripts
        )
        record.retry_count_agent1 = retries
        record.warnings.extend(built.warnings)
        graph = built.graph
        record.graph = graph
    except FgdmError as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        return record

    g1 = ctx.artifact_dir("G1")
    if g1 is not None:
        write_dot(graph, g1 / f"{filename}.dot")

    try:
        coverage = coverage_check(source, seg, graph, dialect)
        if coverage.uncovered_lines:
            record.warnings.append(
                f"graph leaves lines uncovered: {list(coverage.uncovered_lines)}"
            )
        for nid, span in coverage.out_of_bounds:
            record.warnings.append(f"node {nid} span {span} outside file bounds")

        stats = compute_graph_stats(graph)
        stats_text = json.dumps(stats.as_dict(), sort_keys=True)
        embedding = embed_graph(graph)
        retrieved = (
            ctx.store_snapshot.query(embedding, ctx.retrieval_k)
            if len(ctx.store_snapshot)
            else []
        )

        diagnosis, warn2 = agent2_localize(
            graph, stats_text, retrieved, strategy, ctx.gateway, filename, record.transcripts
        )
        record.warnings.extend(warn2)
        record.diagnosis = diagnosis

        g2 = ctx.artifact_dir("G2")
        if g2 is not None:
            diag_doc = {
                "faulty_nodes": [
                    {
                        "id": nid,
                        "reason": diagnosis.findings[nid].reason,
                        "category": diagnosis.findings[nid].category,
                    }
                    for nid in sorted(diagnosis.faulty_node_ids)
                ]
            }
            (g2 / f"{filename}.json").write_text(
                json.dumps(diag_doc, indent=2) + "\n", encoding="utf-8"
            )

        if diagnosis.is_empty:
            # Clean program: no repair, no reconstruction, no LLM calls.
            plan = identity_plan(graph)
            report = validate_repair(graph, graph, plan, diagnosis)
            fixed, recommendations = source, []
        else:
            plan, report = agent3_repair(
                graph, diagnosis, retrieved, strategy, ctx.gateway, filename, record.transcripts
            )
            fixed, recommendations = agent4_reconstruct(
                source, plan, strategy, ctx.gateway, filename, record.transcripts
            )

        record.repair = plan
        record.validation = report
        record.fixed_code = fixed
        record.recommendations = recommendations

        g3 = ctx.artifact_dir("G3")
        if g3 is not None:
            plan_doc = {
                "rationale": plan.rationale,
                "edge_ops": [
                    {
                        "op": op.op,
                        "edge": {
                            "src": op.edge.src,
                            "dst": op.edge.dst,
                            "relation": op.edge.relation,
                        },
                        **(
                            {
                                "replacement": {
                                    "src": op.replacement.src,
                                    "dst": op.replacement.dst,
                                    "relation": op.replacement.relation,
                                }
                            }
                            if op.replacement
                            else {}
                        ),
                    }
                    for op in plan.edge_ops
                ],
                "node_rewrites": {
                    nid: {
                        "faulty_lines": list(rw.faulty_lines),
                        "replacement_code": rw.replacement_code,
                    }
                    for nid, rw in sorted(plan.node_rewrites.items())
                },
                "validation": report.as_dict(),
            }
            (g3 / f"{filename}.json").write_text(
                json.dumps(plan_doc, indent=2) + "\n", encoding="utf-8"
            )
            write_dot(plan.rectified_graph, g3 / f"{filename}.dot")

        g4 = ctx.artifact_dir("G4")
        if g4 is not None:
            (g4 / filename).write_text(fixed, encoding="utf-8")

        truth = _read_source(truth_path) if truth_path else None
        record.metrics = _compute_metrics(source, fixed, truth)

        if report.passed and not diagnosis.is_empty:
            ctx.store.insert(
                KnowledgeRecord(
                    record_id=f"{file}:{strategy}",
                    embedding=embedding,
                    graph_summary=stats_text,
                    bug_description=format_faults(diagnosis, graph),
                    fix_description=plan.rationale,
                    source_file=str(file),
                )
            )
    except FgdmError as exc:
        record.error = f"{type(exc).__name__}: {exc}"
    return record
