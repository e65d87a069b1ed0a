"""Edit-distance and similarity scoring plus corpus aggregation statistics."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from collections import Counter
from typing import Sequence

from fgdm.errors import EmptyInput

# Identifier runs stick together; every other non-space glyph is its own token.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class MetricsRecord:
    levenshtein: int
    line_dist: int
    cosine: float
    baseline: str  # source_vs_fixed | fixed_vs_truth


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    std_population: float
    std_sample: float
    n: int


def _edit_distance(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance, two-row scheme (memory ~ shorter input)."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, sub)
        prev, cur = cur, prev
    return prev[len(b)]


def levenshtein(a: str, b: str) -> int:
    """Minimum single-character insert/delete/substitute count.

    The alphabet is Unicode scalar values, not bytes.
    """
    return _edit_distance(a, b)


def split_lines(text: str) -> list[str]:
    """Split on newline, stripping one trailing carriage return per line."""
    return [line[:-1] if line.endswith("\r") else line for line in text.split("\n")]


def line_dist(a: str, b: str) -> int:
    """Edit distance where the alphabet symbols are whole lines."""
    return _edit_distance(split_lines(a), split_lines(b))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def cosine_sim(a: str, b: str) -> float:
    """Cosine of token-frequency count vectors; 0 if either vector is zero.

    Counts are non-negative, so the result lies in [0, 1].
    """
    ca = Counter(tokenize(a))
    cb = Counter(tokenize(b))
    if not ca or not cb:
        return 0.0
    dot = sum(count * cb[token] for token, count in ca.items())
    norm_a = math.sqrt(sum(c * c for c in ca.values()))
    norm_b = math.sqrt(sum(c * c for c in cb.values()))
    return dot / (norm_a * norm_b)


def aggregate(values: Sequence[float]) -> SummaryStats:
    """Mean, midpoint median, and both standard deviation conventions.

    The midpoint median averages the two central order statistics for even n.
    Sample std is 0 for n == 1 rather than undefined.
    """
    n = len(values)
    if n == 0:
        raise EmptyInput("aggregate requires at least one value")
    ordered = sorted(values)
    mean = sum(ordered) / n
    mid = n // 2
    median = float(ordered[mid]) if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2
    var_pop = sum((v - mean) ** 2 for v in ordered) / n
    std_population = math.sqrt(var_pop)
    std_sample = math.sqrt(var_pop * n / (n - 1)) if n > 1 else 0.0
    return SummaryStats(
        mean=mean,
        median=median,
        std_population=std_population,
        std_sample=std_sample,
        n=n,
    )
