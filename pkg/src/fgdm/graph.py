"""Flow-graph data model, statistics, and canonical DOT serialization.

The graph is the shared program representation: nodes are code blocks with
line spans, edges are typed dependencies. Graphs are immutable after
construction and always kept in canonical order (nodes by start line then id,
edges by src/dst/relation), so serialization is reproducible byte-for-byte.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from fgdm.errors import EmptyGraph, InvariantViolation, ParseError

NODE_KINDS = (
    "routine",
    "type-declaration",
    "loop",
    "branch",
    "statement-group",
    "module-root",
)

EDGE_RELATIONS = ("containment", "data_flow", "control_flow", "call")


@dataclass(frozen=True)
class CodeNode:
    """One code block: id, kind, label, 1-based inclusive line span, text."""

    id: str
    kind: str
    label: str
    span: tuple[int, int]
    code: str = ""


@dataclass(frozen=True)
class FlowEdge:
    src: str
    dst: str
    relation: str


@dataclass(frozen=True)
class FlowGraph:
    file: str
    nodes: tuple[CodeNode, ...]
    edges: tuple[FlowEdge, ...]

    def node_ids(self) -> frozenset[str]:
        return frozenset(n.id for n in self.nodes)

    def edge_set(self) -> frozenset[FlowEdge]:
        return frozenset(self.edges)

    def node_by_id(self, node_id: str) -> CodeNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def structurally_equal(self, other: "FlowGraph") -> bool:
        """Equality over node attributes and edge sets.

        Ignores node ordering, source text, and the file path: those are not
        part of the serialized DOT surface.
        """
        mine = {(n.id, n.kind, n.label, n.span) for n in self.nodes}
        theirs = {(n.id, n.kind, n.label, n.span) for n in other.nodes}
        return mine == theirs and self.edge_set() == other.edge_set()


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    counts_per_relation: Mapping[str, int]
    counts_per_kind: Mapping[str, int]
    max_out_degree: int
    isolated_node_count: int
    has_containment_cycle: bool

    def as_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "counts_per_relation": dict(self.counts_per_relation),
            "counts_per_kind": dict(self.counts_per_kind),
            "max_out_degree": self.max_out_degree,
            "isolated_node_count": self.isolated_node_count,
            "has_containment_cycle": self.has_containment_cycle,
        }


@dataclass
class BuildResult:
    """Graph plus the noise report from normalizing agent output."""

    graph: FlowGraph
    warnings: list[str] = field(default_factory=list)
    id_map: dict[str, str] = field(default_factory=dict)


def _containment_parents(edges: Iterable[FlowEdge]) -> dict[str, list[str]]:
    parents: dict[str, list[str]] = {}
    for e in edges:
        if e.relation == "containment":
            parents.setdefault(e.dst, []).append(e.src)
    return parents


def _has_containment_cycle(node_ids: Iterable[str], edges: Iterable[FlowEdge]) -> bool:
    adj: dict[str, list[str]] = {nid: [] for nid in node_ids}
    for e in edges:
        if e.relation == "containment":
            adj[e.src].append(e.dst)
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def visit(nid: str) -> bool:
        if state.get(nid) == 0:
            return True
        if state.get(nid) == 1:
            return False
        state[nid] = 0
        for child in adj[nid]:
            if visit(child):
                return True
        state[nid] = 1
        return False

    return any(visit(nid) for nid in adj)


def make_graph(file: str, nodes: Iterable[CodeNode], edges: Iterable[FlowEdge]) -> FlowGraph:
    """Canonicalize and validate a graph.

    Raises InvariantViolation for duplicate ids, dangling edge endpoints,
    containment self-edges, multiple containment parents, or containment
    cycles. Duplicate (src, dst, relation) triples are an error here; callers
    that tolerate them (build_graph) dedup first.
    """
    node_list = sorted(nodes, key=lambda n: (n.span[0], n.id))
    ids = [n.id for n in node_list]
    if len(set(ids)) != len(ids):
        raise InvariantViolation("duplicate node ids")
    for n in node_list:
        if not n.id:
            raise InvariantViolation("empty node id")
        if not (1 <= n.span[0] <= n.span[1]):
            raise InvariantViolation(f"bad span {n.span} on node {n.id}")
    id_set = set(ids)
    edge_list = sorted(set(edges), key=lambda e: (e.src, e.dst, e.relation))
    for e in edge_list:
        if e.src not in id_set or e.dst not in id_set:
            raise InvariantViolation(f"edge {e.src}->{e.dst} references unknown node")
        if e.relation == "containment" and e.src == e.dst:
            raise InvariantViolation(f"containment self-edge on {e.src}")
    for child, parents in _containment_parents(edge_list).items():
        if len(parents) > 1:
            raise InvariantViolation(f"node {child} has {len(parents)} containment parents")
    if _has_containment_cycle(ids, edge_list):
        raise InvariantViolation("containment cycle")
    return FlowGraph(file=file, nodes=tuple(node_list), edges=tuple(edge_list))


def build_graph(result: Mapping, source: str | None = None, file: str = "") -> BuildResult:
    """Build a FlowGraph from Agent 1's structured output.

    ``result`` carries ``nodes`` / ``edges`` declaration lists. LLM output is
    noisy, so this normalizes rather than rejects: duplicate edges collapse,
    edges with unknown endpoints are dropped, unknown kinds map to
    statement-group, and node ids are renumbered to ``n<k>`` in span order
    (the mapping is returned so transcripts stay traceable). Hard failures
    are EmptyGraph (zero usable nodes) and InvariantViolation (containment
    forest broken even after cleanup).
    """
    warnings: list[str] = []
    raw_nodes: list[CodeNode] = []
    seen_ids: set[str] = set()
    for decl in result.get("nodes", []):
        nid = str(decl.get("id", "")).strip()
        if not nid:
            warnings.append("node with empty id dropped")
            continue
        if nid in seen_ids:
            warnings.append(f"duplicate node id {nid} dropped")
            continue
        span = decl.get("span", None)
        try:
            start, end = int(span[0]), int(span[1])
        except (TypeError, ValueError, IndexError):
            warnings.append(f"node {nid} has unusable span {span!r}, dropped")
            continue
        if start < 1 or end < start:
            warnings.append(f"node {nid} has invalid span ({start}, {end}), dropped")
            continue
        kind = decl.get("kind", "statement-group")
        if kind not in NODE_KINDS:
            warnings.append(f"node {nid}: unknown kind {kind!r} mapped to statement-group")
            kind = "statement-group"
        label = str(decl.get("label", nid))
        seen_ids.add(nid)
        raw_nodes.append(CodeNode(id=nid, kind=kind, label=label, span=(start, end)))

    if not raw_nodes:
        raise EmptyGraph("no usable node declarations")

    raw_nodes.sort(key=lambda n: (n.span[0], n.id))
    id_map = {n.id: f"n{k}" for k, n in enumerate(raw_nodes)}

    lines = source.split("\n") if source is not None else None
    nodes: list[CodeNode] = []
    for n in raw_nodes:
        code = ""
        if lines is not None:
            code = "\n".join(lines[n.span[0] - 1 : n.span[1]])
        nodes.append(CodeNode(id=id_map[n.id], kind=n.kind, label=n.label, span=n.span, code=code))

    edges: set[FlowEdge] = set()
    for decl in result.get("edges", []):
        src = id_map.get(str(decl.get("src", "")))
        dst = id_map.get(str(decl.get("dst", "")))
        relation = decl.get("relation", "")
        if src is None or dst is None:
            warnings.append(
                f"edge {decl.get('src')!r}->{decl.get('dst')!r} references unknown node, dropped"
            )
            continue
        if relation not in EDGE_RELATIONS:
            warnings.append(f"edge {src}->{dst}: unknown relation {relation!r}, dropped")
            continue
        if relation == "containment" and src == dst:
            warnings.append(f"containment self-edge on {src} dropped")
            continue
        edge = FlowEdge(src=src, dst=dst, relation=relation)
        if edge in edges:
            warnings.append(f"duplicate edge {src}->{dst} [{relation}] collapsed")
            continue
        edges.add(edge)

    # The forest invariant is reported, never silently repaired.
    for child, parents in _containment_parents(edges).items():
        if len(parents) > 1:
            raise InvariantViolation(f"node {child} has {len(parents)} containment parents")
    if _has_containment_cycle(id_map.values(), edges):
        raise InvariantViolation("containment cycle in agent output")

    graph = make_graph(file, nodes, edges)
    return BuildResult(graph=graph, warnings=warnings, id_map=id_map)


def compute_graph_stats(g: FlowGraph) -> GraphStats:
    per_relation = Counter(e.relation for e in g.edges)
    per_kind = Counter(n.kind for n in g.nodes)
    out_degree = Counter(e.src for e in g.edges)
    touched = {e.src for e in g.edges} | {e.dst for e in g.edges}
    return GraphStats(
        node_count=len(g.nodes),
        edge_count=len(g.edges),
        counts_per_relation=dict(per_relation),
        counts_per_kind=dict(per_kind),
        max_out_degree=max(out_degree.values(), default=0),
        isolated_node_count=sum(1 for n in g.nodes if n.id not in touched),
        has_containment_cycle=_has_containment_cycle(
            (n.id for n in g.nodes), g.edges
        ),
    )


# --- DOT subset ---
#
# digraph G {
#   n0 [kind="routine", label="...", span="12-40"];
#   n0 -> n1 [relation="containment"];
# }
#
# Strings are double-quoted; backslash escapes for \ " and newline.


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def clean_dot(g: FlowGraph) -> str:
    """Canonical DOT text: no comments, sorted attributes, canonical order.

    This is the exact text embedded in repair prompts and written by
    write_dot, so two graphs that are structurally equal always produce
    identical bytes.
    """
    out = ["digraph G {"]
    for n in g.nodes:
        out.append(
            f'  {n.id} [kind="{_escape(n.kind)}", label="{_escape(n.label)}", '
            f'span="{n.span[0]}-{n.span[1]}"];'
        )
    for e in g.edges:
        out.append(f'  {e.src} -> {e.dst} [relation="{_escape(e.relation)}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def write_dot(g: FlowGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(clean_dot(g))


class _DotScanner:
    """Hand-rolled tokenizer for the DOT subset, tracking line/column."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.line, self.col)

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text):
                if self.text[self.pos] == "\n":
                    self.line += 1
                    self.col = 1
                else:
                    self.col += 1
                self.pos += 1

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c in " \t\r\n":
                self._advance()
            elif c == "#" or self.text.startswith("//", self.pos):
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            else:
                return

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, literal: str) -> None:
        self.skip_ws()
        if not self.text.startswith(literal, self.pos):
            raise self.error(f"expected {literal!r}")
        self._advance(len(literal))

    def try_literal(self, literal: str) -> bool:
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self._advance(len(literal))
            return True
        return False

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_."
        ):
            self._advance()
        if self.pos == start:
            raise self.error("expected identifier")
        return self.text[start : self.pos]

    def string(self) -> str:
        self.skip_ws()
        if self.peek() != '"':
            raise self.error("expected string")
        self._advance()
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string")
            c = self.text[self.pos]
            if c == "\\":
                self._advance()
                esc = self.peek()
                if esc == "n":
                    out.append("\n")
                elif esc in ('"', "\\"):
                    out.append(esc)
                else:
                    raise self.error(f"bad escape \\{esc}")
                self._advance()
            elif c == '"':
                self._advance()
                return "".join(out)
            else:
                out.append(c)
                self._advance()


def _parse_attrs(sc: _DotScanner) -> dict[str, str]:
    attrs: dict[str, str] = {}
    sc.expect("[")
    while True:
        name = sc.ident()
        sc.expect("=")
        attrs[name] = sc.string()
        if sc.try_literal("]"):
            return attrs
        sc.expect(",")


def parse_dot_text(text: str, file: str = "") -> FlowGraph:
    sc = _DotScanner(text)
    sc.expect("digraph")
    sc.skip_ws()
    if sc.peek() != "{":
        sc.ident()  # optional graph name
    sc.expect("{")
    nodes: list[CodeNode] = []
    edges: list[FlowEdge] = []
    declared: set[str] = set()
    while True:
        if sc.try_literal("}"):
            break
        sc.skip_ws()
        if sc.pos >= len(sc.text):
            raise sc.error("unexpected end of input")
        name = sc.ident()
        sc.skip_ws()
        if sc.text.startswith("->", sc.pos):
            sc.expect("->")
            dst = sc.ident()
            attrs = _parse_attrs(sc)
            sc.expect(";")
            relation = attrs.get("relation", "")
            if relation not in EDGE_RELATIONS:
                raise sc.error(f"unknown relation {relation!r}")
            if name not in declared or dst not in declared:
                missing = name if name not in declared else dst
                raise sc.error(f"edge endpoint {missing!r} not declared")
            edges.append(FlowEdge(src=name, dst=dst, relation=relation))
        else:
            attrs = _parse_attrs(sc)
            sc.expect(";")
            kind = attrs.get("kind", "")
            if kind not in NODE_KINDS:
                raise sc.error(f"unknown kind {kind!r}")
            span_text = attrs.get("span", "")
            try:
                start_s, _, end_s = span_text.partition("-")
                span = (int(start_s), int(end_s))
            except ValueError:
                raise sc.error(f"bad span {span_text!r}") from None
            if name in declared:
                raise sc.error(f"node {name!r} declared twice")
            declared.add(name)
            nodes.append(
                CodeNode(id=name, kind=kind, label=attrs.get("label", name), span=span)
            )
    sc.skip_ws()
    if sc.pos != len(sc.text):
        raise sc.error("trailing content after graph")
    if not nodes:
        raise sc.error("graph has no nodes")
    try:
        return make_graph(file, nodes, edges)
    except InvariantViolation as exc:
        raise ParseError(str(exc), sc.line, sc.col) from exc


def parse_dot(path) -> FlowGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dot_text(fh.read(), file=str(path))
