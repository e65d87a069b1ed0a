"""Command-line entry point: corpus runs, one-off checks, single-file graphs."""

from __future__ import annotations

import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from fgdm.errors import FgdmError
from fgdm.gateway import FixtureStore, Gateway, LiveBackend, ScriptedBackend
from fgdm.graph import clean_dot, parse_dot, write_dot
from fgdm.harness import RunConfig, run_corpus
from fgdm.metrics import cosine_sim, levenshtein, line_dist
from fgdm.pipeline import STRATEGIES, agent1_build, _plan_from_payload
from fgdm.plan import Diagnosis, Finding
from fgdm.segment import dialect_for_path, segment
from fgdm.validation import validate_repair

API_KEY_ENV = "FGDM_API_KEY"


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _default_out_dir() -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return Path("runs") / stamp


@click.group()
def main():
    """Flow-graph-driven multi-agent bug localization and repair."""


@main.command("run")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--strategy", "strategy_csv", default="cot", show_default=True,
              help="Comma-separated subset of standard,cot,tot.")
@click.option("--backend", type=click.Choice(["live", "scripted"]), default=None)
@click.option("--fixtures", "fixtures_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--concurrency", type=int, default=None)
@click.option("--retrieval-k", type=int, default=None)
@click.option("--knowledge-store", "knowledge_store_path",
              type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML config file; CLI flags win over config keys.")
def run_cmd(corpus_dir, strategy_csv, backend, fixtures_path, out_dir, concurrency,
            retrieval_k, knowledge_store_path, config_path):
    """Run the pipeline over a corpus for one or more strategies."""
    cfg = _load_config_file(config_path)
    strategies = tuple(s.strip() for s in strategy_csv.split(",") if s.strip())
    for s in strategies:
        if s not in STRATEGIES:
            raise click.BadParameter(f"unknown strategy {s!r}")
    try:
        config = RunConfig(
            corpus_dir=Path(corpus_dir),
            out_dir=Path(out_dir) if out_dir else _default_out_dir(),
            strategies=strategies,
            backend=backend or cfg.get("backend", "live"),
            fixtures_path=Path(fixtures_path)
            if fixtures_path
            else (Path(cfg["fixtures_path"]) if "fixtures_path" in cfg else None),
            knowledge_store_path=Path(knowledge_store_path)
            if knowledge_store_path
            else (
                Path(cfg["knowledge_store_path"]) if "knowledge_store_path" in cfg else None
            ),
            concurrency=concurrency or cfg.get("concurrency", 4),
            retrieval_k=retrieval_k or cfg.get("retrieval_k", 3),
            provider_url=cfg.get("provider_url", ""),
            model=cfg.get("model", ""),
            api_key=os.environ.get(API_KEY_ENV, ""),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        result = run_corpus(config)
    except FgdmError as exc:
        raise click.ClickException(str(exc))
    for line in result.errors:
        click.echo(f"error: {line}", err=True)
    click.echo(f"artifacts written to {result.out_dir}")
    sys.exit(result.exit_code)


@main.command("validate-repair")
@click.option("--original", required=True, type=click.Path(exists=True))
@click.option("--repaired", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--diagnosis", "diagnosis_path", required=True, type=click.Path(exists=True))
def validate_repair_cmd(original, repaired, plan_path, diagnosis_path):
    """Check a repair plan against the three structural constraints."""
    original_g = parse_dot(original)
    repaired_g = parse_dot(repaired)
    with open(plan_path, "r", encoding="utf-8") as fh:
        plan_doc = json.load(fh)
    plan_doc.setdefault("rectified_graph", {"nodes": [], "edges": []})
    plan = _plan_from_payload(plan_doc, str(repaired))
    # The repaired DOT file, not the plan payload, is the rectified graph here.
    plan = type(plan)(
        edge_ops=plan.edge_ops,
        node_rewrites=plan.node_rewrites,
        rectified_graph=repaired_g,
        rationale=plan.rationale,
    )
    with open(diagnosis_path, "r", encoding="utf-8") as fh:
        diag_doc = json.load(fh)
    findings = {
        entry["id"]: Finding(
            reason=entry.get("reason", ""), category=entry.get("category", "other")
        )
        for entry in diag_doc.get("faulty_nodes", [])
    }
    diagnosis = Diagnosis(faulty_node_ids=frozenset(findings), findings=findings)
    try:
        report = validate_repair(original_g, repaired_g, plan, diagnosis)
    except FgdmError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(report.as_dict(), indent=2))
    sys.exit(0 if report.passed else 1)


@main.command("metrics")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True))
def metrics_cmd(path_a, path_b):
    """Edit-distance and cosine similarity between two files."""
    text_a = Path(path_a).read_text(encoding="utf-8", errors="replace")
    text_b = Path(path_b).read_text(encoding="utf-8", errors="replace")
    click.echo(
        json.dumps(
            {
                "levenshtein": levenshtein(text_a, text_b),
                "line_dist": line_dist(text_a, text_b),
                "cosine": cosine_sim(text_a, text_b),
            },
            indent=2,
        )
    )


@main.command("graph")
@click.option("--file", "src_path", required=True, type=click.Path(exists=True))
@click.option("--backend", type=click.Choice(["live", "scripted"]), required=True)
@click.option("--fixtures", "fixtures_path", type=click.Path(exists=True), default=None)
@click.option("--strategy", type=click.Choice(list(STRATEGIES)), default="cot")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write DOT here instead of stdout.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def graph_cmd(src_path, backend, fixtures_path, strategy, out_path, config_path):
    """Run the graph-builder agent only and emit the DOT graph."""
    cfg = _load_config_file(config_path)
    if backend == "scripted":
        if not fixtures_path:
            raise click.UsageError("scripted backend requires --fixtures")
        be = ScriptedBackend(FixtureStore.from_file(fixtures_path))
    else:
        be = LiveBackend(
            url=cfg.get("provider_url", ""),
            model=cfg.get("model", ""),
            api_key=os.environ.get(API_KEY_ENV, ""),
        )
    gw = Gateway(backend=be)
    src = Path(src_path)
    source = src.read_text(encoding="utf-8", errors="replace")
    dialect = dialect_for_path(src)
    try:
        built, _ = agent1_build(
            source, src.name, dialect, strategy, gw, segment(source, dialect), []
        )
    except FgdmError as exc:
        raise click.ClickException(str(exc))
    if out_path:
        write_dot(built.graph, out_path)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(clean_dot(built.graph), nl=False)


if __name__ == "__main__":
    main()
