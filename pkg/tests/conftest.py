import sys
import logging

import numpy as np
import pytest

from recipdelay.analytics import extract_reciprocal_relations
from recipdelay.features import build_dataset
from recipdelay.synth import SynthConfig, generate
from recipdelay.temporal_graph import TemporalEdge, ingest_edges


@pytest.fixture(autouse=True)
def _quiet_solver_logs():
    logging.getLogger("recipdelay").setLevel(logging.ERROR)
    yield


def random_edges(n_nodes: int, n_edges: int, max_day: int, seed: int) -> list[TemporalEdge]:
    """Random stream with duplicates and reversed pairs, no self-loops."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_edges:
        a, b = rng.integers(n_nodes, size=2)
        if a != b:
            out.append(TemporalEdge(f"n{a}", f"n{b}", int(rng.integers(max_day + 1))))
    return out


@pytest.fixture(scope="session")
def small_synth():
    res = generate(SynthConfig(n_users=150, horizon=150, follow_rate=0.2, seed=3))
    g = ingest_edges(res.edges)
    rels = extract_reciprocal_relations(g)
    return res, g, rels


@pytest.fixture(scope="session")
def small_dataset(small_synth):
    _, g, rels = small_synth
    return build_dataset(g, rels, standardize=False)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
