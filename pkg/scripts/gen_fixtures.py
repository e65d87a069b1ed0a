#!/usr/bin/env python3
"""Regenerate the scripted-backend fixtures for the demo corpus.

The responses below are authored by hand per corpus file; this script runs
the real pipeline against a rule-driven backend and records every
(request digest -> response) pair, so the checked-in fixture file always
matches the current prompt templates. Rerun after any template change:

    python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fgdm.gateway import CompletionRequest, CompletionResponse, FixtureStore, Gateway, request_digest
from fgdm.harness import discover_corpus
from fgdm.pipeline import STRATEGIES, PipelineContext, run_pipeline
from fgdm.store import KnowledgeStore

CORPUS = ROOT / "tests" / "data" / "corpus"
FIXTURES_OUT = ROOT / "tests" / "data" / "fixtures" / "scripted_fixtures.json"


def _read(name: str) -> str:
    return (CORPUS / "demo" / name).read_text(encoding="utf-8")


def graph_json(nodes, edges) -> str:
    return json.dumps(
        {
            "nodes": [
                {"id": i, "kind": k, "label": lb, "span": [s, e]} for i, k, lb, s, e in nodes
            ],
            "edges": [{"src": a, "dst": b, "relation": r} for a, b, r in edges],
        },
        indent=2,
    )


ALPHA_NODES = [
    ("n0", "routine", "scale", 3, 7),
    ("n1", "loop", "scale loop", 5, 6),
    ("n2", "routine", "total", 9, 13),
    ("n3", "loop", "total loop", 11, 12),
    ("n4", "branch", "main guard", 15, 16),
]
ALPHA_EDGES = [
    ("n0", "n1", "containment"),
    ("n2", "n3", "containment"),
    ("n4", "n0", "call"),
    ("n4", "n2", "call"),
]

CLEAN_NODES = [
    ("n0", "routine", "greet", 1, 2),
    ("n1", "routine", "farewell", 4, 5),
    ("n2", "statement-group", "top-level print", 7, 7),
]
CLEAN_EDGES = [("n2", "n0", "call"), ("n2", "n1", "call")]

RETRY_NODES_SMALL = [
    ("n0", "routine", "parse", 1, 3),
    ("n1", "routine", "count", 5, 6),
]
RETRY_EDGES_SMALL = [("n1", "n0", "call")]
RETRY_NODES = RETRY_NODES_SMALL + [("n2", "statement-group", "top-level print", 8, 8)]
RETRY_EDGES = RETRY_EDGES_SMALL + [("n2", "n1", "call")]

OVER_NODES = [
    ("n0", "routine", "window", 1, 5),
    ("n1", "loop", "window loop", 3, 4),
    ("n2", "statement-group", "top-level print", 7, 7),
]
OVER_EDGES = [("n0", "n1", "containment"), ("n2", "n0", "call")]

BETA_NODES = [
    ("n0", "statement-group", "includes", 1, 1),
    ("n1", "routine", "sum", 3, 9),
    ("n2", "loop", "sum loop", 5, 7),
    ("n3", "routine", "main", 11, 15),
]
BETA_EDGES = [("n1", "n2", "containment"), ("n3", "n1", "call")]


def diagnosis_json(entries) -> str:
    return json.dumps({"faulty_nodes": entries}, indent=2)


def repair_json(edge_ops, rewrites, nodes, edges, rationale) -> str:
    return json.dumps(
        {
            "edge_ops": edge_ops,
            "node_rewrites": rewrites,
            "rectified_graph": {
                "nodes": [
                    {"id": i, "kind": k, "label": lb, "span": [s, e]}
                    for i, k, lb, s, e in nodes
                ],
                "edges": [{"src": a, "dst": b, "relation": r} for a, b, r in edges],
            },
            "rationale": rationale,
        },
        indent=2,
    )


def reconstruction_json(fixed: str, recommendations) -> str:
    return json.dumps({"fixed_code": fixed, "recommendations": recommendations}, indent=2)


def build_responses() -> dict[tuple[str, int, int], str]:
    r: dict[tuple[str, int, int], str] = {}

    r[("alpha", 1, 1)] = graph_json(ALPHA_NODES, ALPHA_EDGES)
    r[("alpha", 2, 1)] = diagnosis_json(
        [
            {
                "id": "n2",
                "reason": "accumulator initialized to 1 instead of 0",
                "category": "broken_dependency",
            }
        ]
    )
    r[("alpha", 3, 1)] = repair_json(
        [{"op": "add", "edge": {"src": "n2", "dst": "n3", "relation": "data_flow"}}],
        [{"id": "n2", "faulty_lines": [10], "replacement_code": "    acc = 0"}],
        ALPHA_NODES,
        ALPHA_EDGES + [("n2", "n3", "data_flow")],
        "Initialize the accumulator to zero and make the dependency on the loop explicit.",
    )
    r[("alpha", 4, 1)] = reconstruction_json(
        _read("alpha.fixed.py"),
        ["Initialize accumulators to zero before summation loops."],
    )

    r[("clean", 1, 1)] = graph_json(CLEAN_NODES, CLEAN_EDGES)
    r[("clean", 2, 1)] = diagnosis_json([])

    r[("retry", 1, 1)] = graph_json(RETRY_NODES_SMALL, RETRY_EDGES_SMALL)
    r[("retry", 1, 2)] = graph_json(RETRY_NODES, RETRY_EDGES)
    r[("retry", 2, 1)] = diagnosis_json(
        [
            {
                "id": "n1",
                "reason": "subtracts one from the element count",
                "category": "flow_mismatch",
            }
        ]
    )
    r[("retry", 3, 1)] = repair_json(
        [{"op": "add", "edge": {"src": "n1", "dst": "n0", "relation": "data_flow"}}],
        [
            {
                "id": "n1",
                "faulty_lines": [6],
                "replacement_code": "    return len(parse(text))",
            }
        ],
        RETRY_NODES,
        RETRY_EDGES + [("n1", "n0", "data_flow")],
        "Return the element count without the off-by-one subtraction.",
    )
    r[("retry", 4, 1)] = reconstruction_json(_read("retry.fixed.py"), [])

    r[("overbudget", 1, 1)] = graph_json(OVER_NODES, OVER_EDGES)
    r[("overbudget", 2, 1)] = diagnosis_json(
        [
            {
                "id": "n1",
                "reason": "loop drops the final window",
                "category": "semantic_inconsistency",
            }
        ]
    )
    # Two edge ops for one faulty node: over the minimal-edge budget, on both
    # the first attempt and the validation re-ask.
    over_repair = repair_json(
        [
            {"op": "add", "edge": {"src": "n0", "dst": "n1", "relation": "data_flow"}},
            {"op": "add", "edge": {"src": "n1", "dst": "n2", "relation": "control_flow"}},
        ],
        [
            {
                "id": "n1",
                "faulty_lines": [3],
                "replacement_code": "    for i in range(len(xs) - k + 1):",
            }
        ],
        OVER_NODES,
        OVER_EDGES + [("n0", "n1", "data_flow"), ("n1", "n2", "control_flow")],
        "Extend the loop bound to include the final window.",
    )
    r[("overbudget", 3, 1)] = over_repair
    r[("overbudget", 3, 2)] = over_repair
    r[("overbudget", 4, 1)] = (
        "Here is the corrected file.\n\n```python\n"
        + _read("overbudget.fixed.py")
        + "```\nNo further recommendations."
    )

    r[("beta", 1, 1)] = graph_json(BETA_NODES, BETA_EDGES)
    r[("beta", 2, 1)] = diagnosis_json(
        [
            {
                "id": "n2",
                "reason": "iteration starts at index 1, skipping the first element",
                "category": "flow_mismatch",
            }
        ]
    )
    r[("beta", 3, 1)] = repair_json(
        [{"op": "add", "edge": {"src": "n2", "dst": "n1", "relation": "data_flow"}}],
        [
            {
                "id": "n2",
                "faulty_lines": [5],
                "replacement_code": "    for (int i = 0; i < n; i++) {",
            }
        ],
        BETA_NODES,
        BETA_EDGES + [("n2", "n1", "data_flow")],
        "Start the summation at the first element.",
    )
    r[("beta", 4, 1)] = reconstruction_json(_read("beta.fixed.c"), [])

    return r


class RuleBackend:
    """Answers from the authored response table, recording fixtures."""

    name = "rule"

    def __init__(self, responses, sink: FixtureStore):
        self.responses = responses
        self.sink = sink

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        parts = req.tag.split(":")
        stem = parts[0].split(".")[0]
        agent = int(parts[1].removeprefix("agent"))
        attempt = 2 if parts[-1] in ("attempt2", "revalidate", "reask") else 1
        text = self.responses.get((stem, agent, attempt))
        if text is None:
            raise KeyError(f"no authored response for tag {req.tag!r}")
        self.sink.put(request_digest(req), text)
        return CompletionResponse(text=text, latency_ms=0, backend="scripted")


def main() -> None:
    responses = build_responses()
    sink = FixtureStore()
    entries = discover_corpus(CORPUS)
    for strategy in STRATEGIES:
        store = KnowledgeStore()
        ctx = PipelineContext(
            gateway=Gateway(backend=RuleBackend(responses, sink)),
            store=store,
            store_snapshot=store.snapshot(),
        )
        for entry in entries:
            record = run_pipeline(
                entry.buggy_path, strategy, ctx, truth_path=entry.truth_path,
                dialect=entry.dialect,
            )
            if record.error is not None:
                raise SystemExit(f"unexpected error for {entry.key} [{strategy}]: {record.error}")
    FIXTURES_OUT.parent.mkdir(parents=True, exist_ok=True)
    sink.save(FIXTURES_OUT)
    print(f"wrote {len(sink)} fixtures to {FIXTURES_OUT}")


if __name__ == "__main__":
    main()
