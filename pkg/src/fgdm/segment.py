"""Deterministic structural segmentation of source files into code blocks.

This is not a parser: indentation analysis for Python-style sources and
delimiter matching for C-style sources produce candidate blocks with line
spans. The spans ground the graph-builder prompt and let us verify that an
agent-reported graph actually covers the file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from fgdm.graph import FlowGraph

INDENTATION = "indentation-structured"
BRACE = "brace-structured"
DIALECTS = (INDENTATION, BRACE)

_BRACE_SUFFIXES = {".c", ".h", ".cc", ".cpp", ".cxx", ".hpp", ".hh"}


def dialect_for_path(path) -> str:
    suffix = str(path)[str(path).rfind(".") :].lower() if "." in str(path) else ""
    return BRACE if suffix in _BRACE_SUFFIXES else INDENTATION


@dataclass(frozen=True)
class BlockCandidate:
    span: tuple[int, int]
    kind_hint: str
    nesting_depth: int


@dataclass
class SegmentResult:
    candidates: list[BlockCandidate]
    issues: list[str] = field(default_factory=list)

    def at_depth(self, depth: int) -> list[BlockCandidate]:
        return [c for c in self.candidates if c.nesting_depth == depth]


@dataclass(frozen=True)
class CoverageReport:
    uncovered_lines: tuple[int, ...]
    out_of_bounds: tuple[tuple[str, tuple[int, int]], ...]

    @property
    def is_clean(self) -> bool:
        return not self.uncovered_lines and not self.out_of_bounds


def segment(source: str, dialect: str) -> SegmentResult:
    """Split source into candidate blocks; pure and total.

    Unbalanced delimiters in the brace dialect are reported in
    ``SegmentResult.issues`` (with line numbers) while segmentation still
    returns best-effort blocks.
    """
    if not source.strip():
        return SegmentResult(candidates=[])
    if dialect == INDENTATION:
        return _segment_indentation(source)
    if dialect == BRACE:
        return _segment_brace(source)
    raise ValueError(f"unknown dialect {dialect!r}")


# --- indentation dialect ---

_HEADER_RE = re.compile(
    r"^(?:async\s+)?(def|class|for|while|if|elif|else|try|except|finally|with|match)\b"
)
_CONTINUATION_KEYWORDS = {"elif", "else", "except", "finally"}
_KIND_FOR_KEYWORD = {
    "def": "routine",
    "class": "type-declaration",
    "for": "loop",
    "while": "loop",
    "if": "branch",
}
_COMPOUND_KINDS = {"routine", "type-declaration", "loop", "branch"}


@dataclass(frozen=True)
class _Line:
    lineno: int
    indent: int
    text: str  # stripped


def _code_lines_indent(source: str) -> list[_Line]:
    out = []
    for lineno, raw in enumerate(source.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        expanded = raw.expandtabs(8)
        out.append(_Line(lineno, len(expanded) - len(expanded.lstrip()), stripped))
    return out


def _header_keyword(text: str) -> str | None:
    if text.startswith("@"):
        return "@"
    m = _HEADER_RE.match(text)
    return m.group(1) if m else None


def _group_indent(lines: list[_Line], depth: int, out: list[BlockCandidate]) -> None:
    if not lines:
        return
    base = min(line.indent for line in lines)
    blocks: list[list[_Line]] = []
    current: list[_Line] = []
    current_compound = False
    for line in lines:
        if line.indent > base:
            current.append(line)
            continue
        kw = _header_keyword(line.text)
        starts_new = (
            not current
            or kw == "@"
            or (kw is not None and kw not in _CONTINUATION_KEYWORDS)
            or (current_compound and kw not in _CONTINUATION_KEYWORDS)
        )
        # Decorators glue to the following def/class.
        if starts_new and current and all(l.text.startswith("@") for l in current):
            starts_new = False
        if starts_new:
            if current:
                blocks.append(current)
            current = [line]
            current_compound = kw is not None and kw != "@"
        else:
            current.append(line)
            if kw is not None and kw != "@":
                current_compound = True
    if current:
        blocks.append(current)

    for block in blocks:
        head = next((l for l in block if not l.text.startswith("@")), block[0])
        kw = _header_keyword(head.text)
        kind = _KIND_FOR_KEYWORD.get(kw, "statement-group") if kw else "statement-group"
        out.append(
            BlockCandidate(
                span=(block[0].lineno, block[-1].lineno),
                kind_hint=kind,
                nesting_depth=depth,
            )
        )
        if kind in _COMPOUND_KINDS:
            suite = [l for l in block if l.indent > base]
            _group_indent(suite, depth + 1, out)


def _segment_indentation(source: str) -> SegmentResult:
    out: list[BlockCandidate] = []
    _group_indent(_code_lines_indent(source), 0, out)
    return SegmentResult(candidates=sorted(out, key=lambda c: (c.span[0], c.nesting_depth)))


# --- brace dialect ---


@dataclass
class _BraceLine:
    lineno: int
    depth_start: int
    depth_end: int
    depth_max: int  # catches one-line `{ ... }` bodies
    has_code: bool
    last_code_char: str
    text: str  # code text with comments blanked, stripped


def _scan_braces(source: str) -> tuple[list[_BraceLine], list[str]]:
    issues: list[str] = []
    records: list[_BraceLine] = []
    depth = 0
    state = "code"  # code | line_comment | block_comment | string | char
    for lineno, raw in enumerate(source.split("\n"), start=1):
        depth_start = depth
        depth_max = depth
        if state == "line_comment":
            state = "code"
        has_code = False
        last_code_char = ""
        code_chars: list[str] = []
        i = 0
        while i < len(raw):
            c = raw[i]
            nxt = raw[i + 1] if i + 1 < len(raw) else ""
            if state == "block_comment":
                if c == "*" and nxt == "/":
                    state = "code"
                    i += 2
                    continue
                i += 1
                continue
            if state == "line_comment":
                break
            if state == "string":
                if c == "\\":
                    i += 2
                    continue
                if c == '"':
                    state = "code"
                i += 1
                continue
            if state == "char":
                if c == "\\":
                    i += 2
                    continue
                if c == "'":
                    state = "code"
                i += 1
                continue
            # state == code
            if c == "/" and nxt == "/":
                state = "line_comment"
                break
            if c == "/" and nxt == "*":
                state = "block_comment"
                i += 2
                continue
            if c == '"':
                state = "string"
                has_code = True
                last_code_char = c
                code_chars.append(c)
                i += 1
                continue
            if c == "'":
                state = "char"
                has_code = True
                last_code_char = c
                code_chars.append(c)
                i += 1
                continue
            if not c.isspace():
                has_code = True
                last_code_char = c
                code_chars.append(c)
                if c == "{":
                    depth += 1
                    depth_max = max(depth_max, depth)
                elif c == "}":
                    if depth == 0:
                        issues.append(f"unexpected '}}' at line {lineno}")
                    else:
                        depth -= 1
            else:
                code_chars.append(" ")
            i += 1
        if state == "string" or state == "char":
            state = "code"  # unterminated literal: recover at line end
        records.append(
            _BraceLine(
                lineno=lineno,
                depth_start=depth_start,
                depth_end=depth,
                depth_max=depth_max,
                has_code=has_code,
                last_code_char=last_code_char,
                text="".join(code_chars).strip(),
            )
        )
    if depth > 0:
        opener = next(
            (r.lineno for r in reversed(records) if r.depth_end > r.depth_start), 1
        )
        issues.append(f"unclosed '{{' opened near line {opener}")
    return records, issues


_C_TYPE_KEYWORDS = ("typedef", "struct", "union", "enum")
_C_LOOP_KEYWORDS = ("for", "while", "do")
_C_BRANCH_KEYWORDS = ("if", "switch", "else")


def _c_kind(header: str, level: int) -> str:
    first = header.split("(")[0].split()
    first_word = first[0] if first else ""
    if first_word in _C_TYPE_KEYWORDS:
        return "type-declaration"
    if first_word in _C_LOOP_KEYWORDS:
        return "loop"
    if first_word in _C_BRANCH_KEYWORDS:
        return "branch"
    if level == 0 and "(" in header:
        return "routine"
    return "statement-group"


def _group_brace(recs: list[_BraceLine], level: int, depth: int, out: list[BlockCandidate]) -> None:
    group_start: int | None = None
    group_end: int | None = None
    pending: list[_BraceLine] = []

    def flush_group():
        nonlocal group_start, group_end
        if group_start is not None:
            out.append(BlockCandidate((group_start, group_end), "statement-group", depth))
        group_start = group_end = None

    i = 0
    while i < len(recs):
        r = recs[i]
        if not r.has_code:
            i += 1
            continue
        if r.depth_start <= level < r.depth_max:
            # compound statement opens here; any unterminated header lines
            # in `pending` belong to it
            start = pending[0].lineno if pending else r.lineno
            header = " ".join(p.text for p in pending) + " " + r.text
            j = i
            while j < len(recs) and recs[j].depth_end > level:
                j += 1
            end_idx = min(j, len(recs) - 1)
            flush_group()
            out.append(
                BlockCandidate((start, recs[end_idx].lineno), _c_kind(header.strip(), level), depth)
            )
            _group_brace(recs[i + 1 : end_idx], level + 1, depth + 1, out)
            pending = []
            i = end_idx + 1
            continue
        if r.depth_start == level:
            pending.append(r)
            # preprocessor directives are complete without a terminator
            if r.last_code_char in ";}" or r.text.startswith("#"):
                if group_start is None:
                    group_start = pending[0].lineno
                group_end = r.lineno
                pending = []
        i += 1
    if pending:
        if group_start is None:
            group_start = pending[0].lineno
        group_end = pending[-1].lineno
    flush_group()


def _segment_brace(source: str) -> SegmentResult:
    records, issues = _scan_braces(source)
    out: list[BlockCandidate] = []
    _group_brace(records, 0, 0, out)
    return SegmentResult(
        candidates=sorted(out, key=lambda c: (c.span[0], c.nesting_depth)), issues=issues
    )


# --- coverage ---


def code_line_numbers(source: str, dialect: str) -> set[int]:
    """Lines that matter for coverage: non-blank, non-comment-only."""
    if dialect == INDENTATION:
        return {line.lineno for line in _code_lines_indent(source)}
    records, _ = _scan_braces(source)
    return {r.lineno for r in records if r.has_code}


def coverage_check(
    source: str, candidates: SegmentResult, agent_graph: FlowGraph, dialect: str
) -> CoverageReport:
    """Report source lines claimed by no graph node and out-of-range spans."""
    n_lines = len(source.split("\n"))
    covered: set[int] = set()
    oob: list[tuple[str, tuple[int, int]]] = []
    for node in agent_graph.nodes:
        start, end = node.span
        if start < 1 or end > n_lines:
            oob.append((node.id, node.span))
        covered.update(range(max(start, 1), min(end, n_lines) + 1))
    interesting = code_line_numbers(source, dialect)
    uncovered = tuple(sorted(interesting - covered))
    return CoverageReport(uncovered_lines=uncovered, out_of_bounds=tuple(oob))
