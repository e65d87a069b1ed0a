"""Block segmentation for both dialects and graph coverage checking."""

import textwrap

import pytest

from fgdm.graph import CodeNode, FlowEdge, make_graph
from fgdm.segment import (
    BRACE,
    INDENTATION,
    code_line_numbers,
    coverage_check,
    dialect_for_path,
    segment,
)


@pytest.mark.parametrize(
    "path,expected",
    [
        ("a.py", INDENTATION),
        ("a.c", BRACE),
        ("a.H", BRACE),
        ("dir/b.cpp", BRACE),
        ("a.hh", BRACE),
        ("noext", INDENTATION),
        ("a.txt", INDENTATION),
    ],
)
def test_dialect_for_path(path, expected):
    assert dialect_for_path(path) == expected


def spans(result, depth=None):
    cands = result.candidates if depth is None else result.at_depth(depth)
    return [(c.span, c.kind_hint) for c in cands]


# --- indentation dialect ---

TWO_ROUTINES = '''\
"""doc"""

def scale(xs):
    out = []
    for v in xs:
        out.append(2 * v)
    return out


class Box:
    def get(self):
        return 1
'''


def test_indentation_two_routines():
    result = segment(TWO_ROUTINES, INDENTATION)
    assert not result.issues
    top = spans(result, depth=0)
    assert ((3, 7), "routine") in top
    assert ((10, 12), "type-declaration") in top
    assert ((5, 6), "loop") in spans(result, depth=1)
    assert ((11, 12), "routine") in spans(result, depth=1)


def test_indentation_continuation_and_decorator():
    src = textwrap.dedent(
        """\
        @wraps(f)
        def g(x):
            if x:
                return 1
            elif x is None:
                return 2
            else:
                return 3
        """
    )
    result = segment(src, INDENTATION)
    top = spans(result, depth=0)
    # decorator glues to the def; the if/elif/else chain is one branch block
    assert top == [((1, 8), "routine")]
    assert spans(result, depth=1) == [((3, 8), "branch")]


def test_indentation_statement_groups_split_on_compound():
    src = "x = 1\ny = 2\nfor i in range(3):\n    x += i\nz = x\n"
    result = segment(src, INDENTATION)
    assert spans(result, depth=0) == [
        ((1, 2), "statement-group"),
        ((3, 4), "loop"),
        ((5, 5), "statement-group"),
    ]


def test_empty_and_comment_only_sources():
    assert segment("", INDENTATION).candidates == []
    assert segment("   \n\t\n", INDENTATION).candidates == []
    assert segment("# nothing\n# here\n", INDENTATION).candidates == []
    assert segment("", BRACE).candidates == []


def test_empty_body_routine():
    src = "def f():\n    pass\n"
    result = segment(src, INDENTATION)
    assert spans(result, depth=0) == [((1, 2), "routine")]


def test_unknown_dialect_rejected():
    with pytest.raises(ValueError):
        segment("x", "token-structured")


# --- brace dialect ---

C_SOURCE = """\
#include <stdio.h>

int sum(const int *xs, int n) {
    int acc = 0;
    for (int i = 0; i < n; i++) {
        acc += xs[i];
    }
    return acc;
}

int main(void) {
    int xs[] = {1, 2, 3};
    printf("%d\\n", sum(xs, 3));
    return 0;
}
"""


def test_brace_routines_and_loop():
    result = segment(C_SOURCE, BRACE)
    assert not result.issues
    top = spans(result, depth=0)
    assert ((1, 2), "statement-group") in top or ((1, 1), "statement-group") in top
    assert ((3, 9), "routine") in top
    assert ((11, 15), "routine") in top
    assert ((5, 7), "loop") in spans(result, depth=1)


def test_brace_ignores_braces_in_strings_and_comments():
    src = (
        'const char *s = "{{{";\n'
        "// } comment brace\n"
        "/* { block\n"
        "   } */\n"
        "int f(void) { return '}'; }\n"
    )
    result = segment(src, BRACE)
    assert not result.issues
    assert ((5, 5), "routine") in spans(result, depth=0)


def test_brace_unbalanced_reported_not_raised():
    result = segment("int f(void) {\n  return 1;\n", BRACE)
    assert any("unclosed" in issue for issue in result.issues)
    assert result.candidates  # best-effort blocks still come back

    result = segment("}\nint x = 1;\n", BRACE)
    assert any("unexpected '}'" in issue and "line 1" in issue for issue in result.issues)


def test_brace_multiline_header_glued():
    src = "static int helper(int a,\n                  int b)\n{\n    return a + b;\n}\n"
    result = segment(src, BRACE)
    assert spans(result, depth=0) == [((1, 5), "routine")]


# --- coverage ---


def _graph(nodes, edges=()):
    return make_graph("f", nodes, edges)


def test_code_line_numbers_skips_blank_and_comments():
    src = "x = 1\n\n# comment\ny = 2\n"
    assert code_line_numbers(src, INDENTATION) == {1, 4}
    c = "int x;\n\n// c\n/* b */\nint y;\n"
    assert code_line_numbers(c, BRACE) == {1, 5}


def test_coverage_clean():
    src = "def f():\n    return 1\n"
    seg = segment(src, INDENTATION)
    g = _graph([CodeNode(id="n0", kind="routine", label="f", span=(1, 2))])
    report = coverage_check(src, seg, g, INDENTATION)
    assert report.is_clean


def test_coverage_uncovered_and_out_of_bounds():
    src = "a = 1\nb = 2\nc = 3\n"
    seg = segment(src, INDENTATION)
    g = _graph(
        [
            CodeNode(id="n0", kind="statement-group", label="top", span=(1, 1)),
            CodeNode(id="n1", kind="statement-group", label="ghost", span=(7, 9)),
        ]
    )
    report = coverage_check(src, seg, g, INDENTATION)
    assert report.uncovered_lines == (2, 3)
    assert report.out_of_bounds == (("n1", (7, 9)),)
    assert not report.is_clean


def test_segment_spans_cover_all_code_lines(rng):
    """Every code line must land inside some candidate block."""
    for src, dialect in ((TWO_ROUTINES, INDENTATION), (C_SOURCE, BRACE)):
        result = segment(src, dialect)
        covered = set()
        for c in result.candidates:
            covered.update(range(c.span[0], c.span[1] + 1))
        assert code_line_numbers(src, dialect) <= covered
