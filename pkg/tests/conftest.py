"""Shared fixtures: data paths and a seeded random graph generator."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from fgdm.graph import NODE_KINDS, CodeNode, FlowEdge, FlowGraph, make_graph

DATA_DIR = Path(__file__).parent / "data"
CORPUS_DIR = DATA_DIR / "corpus"
FIXTURES_PATH = DATA_DIR / "fixtures" / "scripted_fixtures.json"
GOLDEN_DIR = DATA_DIR / "golden"

_NON_CONTAINMENT = ("data_flow", "control_flow", "call")

_LABEL_POOL = (
    "plain",
    'quotes "inside"',
    "back\\slash",
    "multi\nline",
    'mix "a\\b"\nend',
    "unicode: приём λ",
    "",
)


def random_graph(rng: random.Random, max_nodes: int = 12) -> FlowGraph:
    """A valid random graph: containment edges form a forest by construction."""
    n = rng.randint(1, max_nodes)
    nodes = []
    for i in range(n):
        start = rng.randint(1, 200)
        nodes.append(
            CodeNode(
                id=f"n{i}",
                kind=rng.choice(NODE_KINDS),
                label=rng.choice(_LABEL_POOL),
                span=(start, start + rng.randint(0, 40)),
            )
        )
    edges = set()
    # parents only among strictly earlier nodes: acyclic, at most one parent
    for i in range(1, n):
        if rng.random() < 0.6:
            edges.add(FlowEdge(src=f"n{rng.randrange(i)}", dst=f"n{i}", relation="containment"))
    for _ in range(rng.randint(0, 2 * n)):
        a, b = rng.randrange(n), rng.randrange(n)
        edges.add(FlowEdge(src=f"n{a}", dst=f"n{b}", relation=rng.choice(_NON_CONTAINMENT)))
    return make_graph("random", nodes, edges)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20250823)


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture
def fixtures_path() -> Path:
    return FIXTURES_PATH
