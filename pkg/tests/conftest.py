from __future__ import annotations

import numpy as np
import pytest

from specsim import Dist, Rng


def random_dist(rng: Rng, size: int, sparse: bool = False) -> Dist:
    """Random distribution; optionally with some zero entries."""
    raw = rng.exponentials(size)
    if sparse and size > 2:
        kill = rng.index_from(np.ones(size))
        raw[kill] = 0.0
    return Dist(raw / raw.sum())


def enumerate_trees(k: int, max_index: int) -> list[frozenset]:
    """Every prefix- and sibling-closed node set of size exactly k.

    Exhaustive-search oracle for the greedy construction.  Trees grow by
    appending nodes lexicographically above the current maximum, which
    reaches each tree exactly once (dropping the lex-largest node always
    leaves a valid tree).
    """
    out: list[frozenset] = []

    def candidates(tree: frozenset) -> list[tuple]:
        cand = set()
        for node in list(tree) + [()]:
            child = node + (1,)
            if child not in tree:
                cand.add(child)
        for node in tree:
            if node[-1] < max_index:
                sib = node[:-1] + (node[-1] + 1,)
                if sib not in tree:
                    cand.add(sib)
        return sorted(cand)

    def grow(tree: frozenset, last: tuple) -> None:
        if len(tree) == k:
            out.append(tree)
            return
        for cand in candidates(tree):
            if cand > last:
                grow(tree | {cand}, cand)

    grow(frozenset(), ())
    return out


@pytest.fixture
def rng() -> Rng:
    return Rng(20250809)


@pytest.fixture(scope="session")
def default_sweep():
    from specsim import ExperimentConfig, run_sweep_full

    return run_sweep_full(ExperimentConfig())


@pytest.fixture(scope="session")
def sweep_cells(default_sweep):
    cells: dict[tuple, list] = {}
    for r in default_sweep.rows:
        cells.setdefault((r.method, r.strategy), []).append(r)
    for group in cells.values():
        group.sort(key=lambda r: r.k)
    return cells
