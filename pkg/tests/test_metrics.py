"""Edit-distance correctness against the naive recursion, plus axioms and
aggregation conventions."""

import math
import random
from functools import lru_cache

import pytest

from fgdm.errors import EmptyInput
from fgdm.metrics import aggregate, cosine_sim, levenshtein, line_dist, split_lines, tokenize


def recursive_edit_distance(a, b):
    """Textbook recursion: the independent oracle for the DP implementation."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
            d(i - 1, j - 1) + (0 if a[i - 1] == b[j - 1] else 1),
        )

    return d(len(a), len(b))


ALPHABET = "abé世 \n"


def test_levenshtein_known_values():
    assert levenshtein("", "") == 0
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("flaw", "lawn") == 2
    assert levenshtein("", "abc") == 3
    assert levenshtein("acc = 1", "acc = 0") == 1


def test_levenshtein_unicode_scalars_not_bytes():
    # one scalar substitution even though the UTF-8 byte diff is larger
    assert levenshtein("café", "cafe") == 1
    assert levenshtein("世界", "世") == 1


def test_levenshtein_matches_recursion_randomized(rng):
    for _ in range(300):
        a = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 10)))
        b = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 10)))
        assert levenshtein(a, b) == recursive_edit_distance(a, b)


def test_split_lines_strips_one_trailing_cr():
    assert split_lines("a\r\nb\n") == ["a", "b", ""]
    assert split_lines("a\r\r\nb") == ["a\r", "b"]
    assert split_lines("") == [""]


def test_line_dist_whole_lines():
    assert line_dist("a\nb\nc", "a\nx\nc") == 1
    assert line_dist("a\nb", "a\nb\nc") == 1
    assert line_dist("a\nb\nc", "c\nb\na") == 2
    # CRLF vs LF line endings compare equal per line
    assert line_dist("a\r\nb", "a\nb") == 0


def test_line_dist_matches_recursion_randomized(rng):
    pool = ["x = 1", "y = 2", "", "return x", "print(y)"]
    for _ in range(200):
        a = "\n".join(rng.choice(pool) for _ in range(rng.randint(0, 8)))
        b = "\n".join(rng.choice(pool) for _ in range(rng.randint(0, 8)))
        assert line_dist(a, b) == recursive_edit_distance(split_lines(a), split_lines(b))


def test_tokenize_identifiers_and_punctuation():
    assert tokenize("acc += x_1;") == ["acc", "+", "=", "x_1", ";"]
    assert tokenize("   \n\t") == []


def test_cosine_basics():
    assert cosine_sim("a b c", "a b c") == pytest.approx(1.0, abs=1e-12)
    assert cosine_sim("aaa", "bbb") == 0.0
    assert cosine_sim("", "anything") == 0.0
    # doubling every count scales the vector, not the angle; the trailing
    # newline keeps the seam from merging two identifier tokens into one
    s = "def f(x): return x + 1\n"
    assert cosine_sim(s, s + s) == pytest.approx(1.0, abs=1e-12)


def test_cosine_range_and_symmetry(rng):
    pool = "ab+ ;\n"
    for _ in range(200):
        a = "".join(rng.choice(pool) for _ in range(rng.randint(0, 15)))
        b = "".join(rng.choice(pool) for _ in range(rng.randint(0, 15)))
        s = cosine_sim(a, b)
        assert 0.0 <= s <= 1.0 + 1e-12
        assert s == pytest.approx(cosine_sim(b, a), abs=1e-15)


def test_aggregate_conventions():
    stats = aggregate([9, 1, 9])
    assert stats.mean == pytest.approx(19 / 3)
    assert stats.median == 9  # midpoint of sorted order statistics, odd n
    stats = aggregate([1, 2, 3, 4])
    assert stats.median == 2.5
    assert stats.std_population == pytest.approx(math.sqrt(1.25))
    assert stats.std_sample == pytest.approx(math.sqrt(5 / 3))


def test_aggregate_single_value_sample_std_zero():
    stats = aggregate([7.0])
    assert stats.mean == 7.0
    assert stats.median == 7.0
    assert stats.std_population == 0.0
    assert stats.std_sample == 0.0


def test_aggregate_empty_rejected():
    with pytest.raises(EmptyInput):
        aggregate([])


def test_aggregate_matches_statistics_module(rng):
    import statistics

    for _ in range(50):
        values = [rng.uniform(-5, 50) for _ in range(rng.randint(2, 40))]
        stats = aggregate(values)
        assert stats.mean == pytest.approx(statistics.fmean(values), rel=1e-12)
        assert stats.median == pytest.approx(statistics.median(values), rel=1e-12)
        assert stats.std_population == pytest.approx(statistics.pstdev(values), rel=1e-9)
        assert stats.std_sample == pytest.approx(statistics.stdev(values), rel=1e-9)
