"""Corpus discovery, multi-strategy runs, and report assembly.

A corpus is any directory tree of ``<name>.buggy.<ext>`` files, each
optionally paired with a ``<name>.fixed.<ext>`` ground truth. Every selected
strategy runs the full pipeline over every entry; artifacts land under
``out_dir/<strategy>/{G1,G2,G3,G4,results}`` plus a combined text report and
a plot-ready summary.csv at the output root.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fgdm.errors import EmptyCorpus
from fgdm.gateway import FixtureStore, Gateway, LiveBackend, ScriptedBackend, TranscriptWriter
from fgdm.metrics import MetricsRecord, aggregate
from fgdm.pipeline import STRATEGIES, PipelineContext, PipelineRecord, run_pipeline
from fgdm.segment import dialect_for_path
from fgdm.store import KnowledgeStore

REPORT_METRICS = ("levenshtein", "line_dist", "cosine")


@dataclass(frozen=True)
class CorpusEntry:
    buggy_path: Path
    truth_path: Path | None
    project: str
    dialect: str
    key: str  # corpus-relative posix path, the stable identifier in reports


@dataclass
class RunConfig:
    corpus_dir: Path
    out_dir: Path
    strategies: tuple[str, ...] = ("cot",)
    backend: str = "scripted"  # scripted | live
    fixtures_path: Path | None = None
    knowledge_store_path: Path | None = None
    concurrency: int = 4
    retrieval_k: int = 3
    provider_url: str = ""
    model: str = ""
    api_key: str = ""

    def __post_init__(self):
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")
        if self.backend == "scripted" and self.fixtures_path is None:
            raise ValueError("scripted backend requires a fixtures path")


@dataclass
class RunResult:
    exit_code: int
    records: dict[str, dict[str, PipelineRecord]]  # strategy -> entry key -> record
    out_dir: Path
    errors: list[str] = field(default_factory=list)


def discover_corpus(corpus_dir) -> list[CorpusEntry]:
    corpus_dir = Path(corpus_dir)
    entries: list[CorpusEntry] = []
    for buggy in sorted(corpus_dir.rglob("*.buggy.*")):
        rel = buggy.relative_to(corpus_dir)
        truth = buggy.with_name(buggy.name.replace(".buggy.", ".fixed.", 1))
        entries.append(
            CorpusEntry(
                buggy_path=buggy,
                truth_path=truth if truth.exists() else None,
                project=rel.parts[0] if len(rel.parts) > 1 else "",
                dialect=dialect_for_path(buggy),
                key=rel.as_posix(),
            )
        )
    if not entries:
        raise EmptyCorpus(f"no *.buggy.* files under {corpus_dir}")
    return sorted(entries, key=lambda e: e.key)


def _build_gateway(config: RunConfig, strategy_dir: Path) -> Gateway:
    if config.backend == "scripted":
        backend = ScriptedBackend(FixtureStore.from_file(config.fixtures_path))
    elif config.backend == "live":
        backend = LiveBackend(url=config.provider_url, model=config.model, api_key=config.api_key)
    else:
        raise ValueError(f"unknown backend {config.backend!r}")
    transcript = TranscriptWriter(strategy_dir / "transcript.jsonl")
    return Gateway(backend=backend, transcript=transcript, in_flight_limit=config.concurrency)


def preferred_metrics(record: PipelineRecord) -> MetricsRecord | None:
    """The metrics row the comparison report uses for a record.

    Ground-truth comparison when a truth file exists, otherwise
    source-vs-fixed. Error records have no metrics.
    """
    by_baseline = {m.baseline: m for m in record.metrics}
    return by_baseline.get("fixed_vs_truth") or by_baseline.get("source_vs_fixed")


def _result_rows(records: dict[str, PipelineRecord], strategy: str) -> list[dict]:
    rows: list[dict] = []
    for key in sorted(records):
        record = records[key]
        if record.error is not None:
            rows.append({"file": key, "strategy": strategy, "error": record.error})
            continue
        for m in record.metrics:
            rows.append(
                {
                    "file": key,
                    "strategy": strategy,
                    "levenshtein": m.levenshtein,
                    "line_dist": m.line_dist,
                    "cosine": m.cosine,
                    "baseline": m.baseline,
                    "validation_passed": record.validation.passed
                    if record.validation
                    else False,
                }
            )
    return rows


def _summary_rows(records: dict[str, PipelineRecord], strategy: str) -> list[dict]:
    picked = [
        preferred_metrics(r)
        for r in records.values()
        if r.error is None and preferred_metrics(r) is not None
    ]
    rows = []
    for metric in REPORT_METRICS:
        values = [getattr(m, metric) for m in picked]
        if not values:
            continue
        stats = aggregate(values)
        rows.append(
            {
                "strategy": strategy,
                "metric": metric,
                "mean": stats.mean,
                "median": stats.median,
                "std_population": stats.std_population,
                "std_sample": stats.std_sample,
            }
        )
    return rows


def _write_output_json(path: Path, records: dict[str, PipelineRecord], strategy: str) -> None:
    doc = {
        "results": _result_rows(records, strategy),
        "summary": _summary_rows(records, strategy),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _write_summary_csv(path: Path, all_records: dict[str, dict[str, PipelineRecord]]) -> None:
    fields = ["strategy", "metric", "mean", "median", "std_population", "std_sample"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for strategy in sorted(all_records):
            for row in _summary_rows(all_records[strategy], strategy):
                writer.writerow(row)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}".rstrip("0").rstrip(".") or "0"
    return str(value)


def _write_report(path: Path, all_records: dict[str, dict[str, PipelineRecord]]) -> None:
    """Plain-text comparison table: per-file LD/cosine per strategy, with a
    MEAN / MEDIAN / STD DEV footer per column."""
    strategies = sorted(all_records)
    keys = sorted({k for recs in all_records.values() for k in recs})
    header = ["Name"]
    for s in strategies:
        header += [f"{s} LD", f"{s} Cosine"]
    table: list[list[str]] = [header]
    columns: dict[tuple[str, str], list[float]] = {}
    for key in keys:
        row = [key]
        for s in strategies:
            record = all_records[s].get(key)
            m = preferred_metrics(record) if record and record.error is None else None
            if m is None:
                row += ["-", "-"]
            else:
                row += [_format_cell(m.levenshtein), _format_cell(m.cosine)]
                columns.setdefault((s, "ld"), []).append(m.levenshtein)
                columns.setdefault((s, "cos"), []).append(m.cosine)
        table.append(row)
    for label, attr in (("MEAN", "mean"), ("MEDIAN", "median"), ("STD DEV", "std_sample")):
        row = [label]
        for s in strategies:
            for col in ("ld", "cos"):
                values = columns.get((s, col))
                row.append(_format_cell(getattr(aggregate(values), attr)) if values else "-")
        table.append(row)
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for idx, row in enumerate(table):
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if idx == 0 or idx == len(table) - 4:
            lines.append("-+-".join("-" * w for w in widths))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_corpus(config: RunConfig) -> RunResult:
    entries = discover_corpus(config.corpus_dir)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    all_records: dict[str, dict[str, PipelineRecord]] = {}
    errors: list[str] = []

    for strategy in config.strategies:
        strategy_dir = out_dir / strategy
        strategy_dir.mkdir(parents=True, exist_ok=True)
        gateway = _build_gateway(config, strategy_dir)
        store = (
            KnowledgeStore.load(config.knowledge_store_path)
            if config.knowledge_store_path
            else KnowledgeStore()
        )
        # Queries see the store as of run start; insertions from this run are
        # committed to the store but only become visible to later runs. This
        # keeps results independent of corpus file order and concurrency.
        ctx = PipelineContext(
            gateway=gateway,
            store=store,
            store_snapshot=store.snapshot(),
            retrieval_k=config.retrieval_k,
            out_dir=strategy_dir,
        )

        def job(entry: CorpusEntry) -> tuple[str, PipelineRecord]:
            record = run_pipeline(
                entry.buggy_path,
                strategy,
                ctx,
                truth_path=entry.truth_path,
                dialect=entry.dialect,
            )
            return entry.key, record

        if config.concurrency > 1:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
                results = dict(pool.map(job, entries))
        else:
            results = dict(job(e) for e in entries)
        all_records[strategy] = results
        for key in sorted(results):
            if results[key].error is not None:
                errors.append(f"[{strategy}] {key}: {results[key].error}")

        _write_output_json(strategy_dir / "results" / "output.json", results, strategy)
        store.save(strategy_dir / "knowledge_store.json")

    _write_summary_csv(out_dir / "summary.csv", all_records)
    _write_report(out_dir / "report.txt", all_records)
    return RunResult(
        exit_code=0 if not errors else 1,
        records=all_records,
        out_dir=out_dir,
        errors=errors,
    )
