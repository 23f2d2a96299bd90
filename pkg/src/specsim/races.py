"""Exponential races: shared Exp(1) variates, winners, and ordered arrivals.

A race assigns one Exp(1) variate per token; argmin_i e_i / p_i is a
sample from p, and the ascending order of e_i / q_i gives sampling
without replacement from q.  Sharing one realization between the draft
and the verifier is what couples their outcomes.
"""

from __future__ import annotations

import numpy as np

from .dists import Dist
from .errors import EmptySupportError, InsufficientSupportError
from .rng import Rng

TreeIndex = tuple[int, ...]


class RaceTable:
    """Per-node Exp(1) vectors, keyed by the parent whose children race.

    A node's vector is drawn once and never mutated; drafting and
    verification must see the same realization.
    """

    __slots__ = ("alphabet_size", "variates")

    def __init__(self, alphabet_size: int) -> None:
        self.alphabet_size = int(alphabet_size)
        self.variates: dict[TreeIndex, np.ndarray] = {}

    def ensure(self, node: TreeIndex, rng: Rng) -> np.ndarray:
        """Existing vector for node, or a fresh Exp(1) draw stored under it."""
        e = self.variates.get(node)
        if e is None:
            e = rng.exponentials(self.alphabet_size)
            e.setflags(write=False)
            self.variates[node] = e
        return e


def ensure_race(table: RaceTable, node: TreeIndex, rng: Rng) -> np.ndarray:
    return table.ensure(node, rng)


def winner(e: np.ndarray, d: Dist):
    """argmin over supported tokens of e_i / d_i.

    Zero-probability tokens are excluded from the argmin (not mapped to
    infinite ratios).  Ties break toward the smallest token id.  ``e`` may
    be a single vector or a batch with the race on the last axis; the
    return is an int or an int array accordingly.
    """
    support = d.support_indices()
    if support.size == 0:
        raise EmptySupportError("distribution has no positive entries")
    e = np.asarray(e)
    if support.size == d.mass.size:
        ratios = e / d.mass
        best = np.argmin(ratios, axis=-1)
        tokens = best + 1
    else:
        ratios = e[..., support] / d.mass[support]
        best = np.argmin(ratios, axis=-1)
        tokens = support[best] + 1
    if e.ndim == 1:
        return int(tokens)
    return tokens


def arrivals(e: np.ndarray, d: Dist, k: int) -> tuple[int, ...]:
    """First k race arrivals under d: the k tokens of smallest e_i / d_i.

    Ascending order; element 1 equals winner(e, d).
    """
    support = d.support_indices()
    if k > support.size:
        raise InsufficientSupportError(
            f"{k} arrivals requested from support of size {support.size}"
        )
    ratios = np.asarray(e)[support] / d.mass[support]
    order = np.argsort(ratios, kind="stable")[:k]
    return tuple(int(t) + 1 for t in support[order])
