"""Vector knowledge base of prior flow graphs with exact cosine search.

The index is a flat exact scan (stores hold at most hundreds of records), and
the embedding is a deterministic structural feature vector, so retrieval is
reproducible offline: no learned weights, no approximate index.
"""

from __future__ import annotations

import hashlib
import json
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from fgdm.errors import CorruptFile, DuplicateRecordId, VersionMismatch
from fgdm.graph import EDGE_RELATIONS, NODE_KINDS, FlowGraph, compute_graph_stats

DIMENSION = 32
_HASH_BINS = 16
STORE_VERSION = 1


def _triple_bin(src_kind: str, relation: str, dst_kind: str) -> int:
    digest = hashlib.sha256(f"{src_kind}|{relation}|{dst_kind}".encode()).hexdigest()
    return int(digest[:8], 16) % _HASH_BINS


def _containment_depth(g: FlowGraph) -> int:
    children: dict[str, list[str]] = {n.id: [] for n in g.nodes}
    has_parent: set[str] = set()
    for e in g.edges:
        if e.relation == "containment":
            children[e.src].append(e.dst)
            has_parent.add(e.dst)
    if not has_parent:
        return 0

    def depth(nid: str, seen: frozenset[str]) -> int:
        if nid in seen:  # defensive: valid graphs are cycle-free
            return 0
        kids = children[nid]
        if not kids:
            return 0
        return 1 + max(depth(k, seen | {nid}) for k in kids)

    roots = [nid for nid in children if nid not in has_parent]
    return max(depth(r, frozenset()) for r in roots)


def embed_graph(g: FlowGraph) -> np.ndarray:
    """Structural feature vector: id-free, order-free, L2-normalized.

    Layout (32 components): node count, edge count, per-relation counts,
    per-kind counts, max out-degree, isolated count, mean span length,
    containment depth, and a 16-bin hash histogram of (src_kind, relation,
    dst_kind) edge triples. Each component passes through log1p before
    normalization so large graphs do not drown the shape features.
    """
    stats = compute_graph_stats(g)
    kinds = {n.id: n.kind for n in g.nodes}
    hist = [0.0] * _HASH_BINS
    for e in g.edges:
        hist[_triple_bin(kinds[e.src], e.relation, kinds[e.dst])] += 1.0
    mean_span = sum(n.span[1] - n.span[0] + 1 for n in g.nodes) / len(g.nodes)
    features = [
        float(stats.node_count),
        float(stats.edge_count),
        *(float(stats.counts_per_relation.get(r, 0)) for r in EDGE_RELATIONS),
        *(float(stats.counts_per_kind.get(k, 0)) for k in NODE_KINDS),
        float(stats.max_out_degree),
        float(stats.isolated_node_count),
        mean_span,
        float(_containment_depth(g)),
        *hist,
    ]
    vec = np.log1p(np.asarray(features, dtype=np.float64))
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0.0 else vec


@dataclass(frozen=True)
class KnowledgeRecord:
    record_id: str
    embedding: np.ndarray
    graph_summary: str
    bug_description: str
    fix_description: str
    source_file: str

    def __post_init__(self):
        assert self.embedding.shape == (DIMENSION,)


@dataclass
class KnowledgeStore:
    records: dict[str, KnowledgeRecord] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    def insert(self, record: KnowledgeRecord) -> None:
        with self._lock:
            if record.record_id in self.records:
                raise DuplicateRecordId(record.record_id)
            self.records[record.record_id] = record

    def query(self, vector: np.ndarray, k: int) -> list[tuple[KnowledgeRecord, float]]:
        """Top-k by cosine score, ties broken by record_id ascending."""
        if k < 1:
            raise ValueError("k must be >= 1")
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            warnings.warn("zero-vector query: cosine undefined, returning no results")
            return []
        unit = np.asarray(vector, dtype=np.float64) / norm
        scored = []
        for record in self.records.values():
            rnorm = float(np.linalg.norm(record.embedding))
            score = 0.0 if rnorm == 0.0 else float(np.dot(record.embedding, unit) / rnorm)
            scored.append((record, score))
        scored.sort(key=lambda pair: (-pair[1], pair[0].record_id))
        return scored[:k]

    def snapshot(self) -> "KnowledgeStore":
        """Read-only copy of the current records (queries during a run)."""
        return KnowledgeStore(records=dict(self.records))

    def save(self, path) -> None:
        doc = {
            "version": STORE_VERSION,
            "dimension": DIMENSION,
            "records": [
                {
                    "record_id": r.record_id,
                    "embedding": [float(x) for x in r.embedding],
                    "graph_summary": r.graph_summary,
                    "bug_description": r.bug_description,
                    "fix_description": r.fix_description,
                    "source_file": r.source_file,
                }
                for r in sorted(self.records.values(), key=lambda r: r.record_id)
            ],
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "KnowledgeStore":
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptFile(exc.msg, exc.pos) from exc
        if not isinstance(doc, dict) or "version" not in doc:
            raise CorruptFile("missing version field", 0)
        if doc["version"] != STORE_VERSION:
            raise VersionMismatch(f"store version {doc['version']}, expected {STORE_VERSION}")
        if doc.get("dimension") != DIMENSION:
            raise VersionMismatch(f"dimension {doc.get('dimension')}, expected {DIMENSION}")
        store = cls()
        try:
            for raw in doc["records"]:
                store.insert(
                    KnowledgeRecord(
                        record_id=raw["record_id"],
                        embedding=np.asarray(raw["embedding"], dtype=np.float64),
                        graph_summary=raw["graph_summary"],
                        bug_description=raw["bug_description"],
                        fix_description=raw["fix_description"],
                        source_file=raw["source_file"],
                    )
                )
        except (KeyError, TypeError) as exc:
            raise CorruptFile(f"malformed record: {exc}", 0) from exc
        return store
