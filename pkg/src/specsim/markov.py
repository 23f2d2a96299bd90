"""Order-m Markov sources acting as target (P) and draft (Q) models.

A source of order m conditions on the last m tokens of the context.
Positions before the start of the sequence are padded with the reserved
start symbol 0 (tokens proper are 1-based), so the table has a row for
every context reachable from the all-start context and lookups are total.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .dists import Dist, normalize
from .errors import BadParamError
from .rng import Rng, derive_seed

START = 0

Context = tuple[int, ...]


def context_key(ctx: Context, order: int) -> tuple[int, ...]:
    """Last ``order`` tokens of ctx, left-padded with the start symbol."""
    if order == 0:
        return ()
    tail = tuple(ctx[-order:])
    return (START,) * (order - len(tail)) + tail


def reachable_contexts(order: int, alphabet_size: int) -> list[tuple[int, ...]]:
    """All context keys reachable from the all-start context, in a fixed order."""
    out: list[tuple[int, ...]] = []
    for j in range(order + 1):
        for word in itertools.product(range(1, alphabet_size + 1), repeat=j):
            out.append((START,) * (order - j) + word)
    return out


@dataclass(frozen=True)
class MarkovSource:
    """Immutable conditional-distribution table over a token alphabet."""

    order: int
    alphabet_size: int
    rows: dict[tuple[int, ...], Dist] = field(repr=False)

    def __post_init__(self) -> None:
        if self.order < 0:
            raise BadParamError("order must be >= 0")
        if self.alphabet_size < 2:
            raise BadParamError("alphabet_size must be >= 2")
        for key in reachable_contexts(self.order, self.alphabet_size):
            row = self.rows.get(key)
            if row is None:
                raise BadParamError(f"missing row for context {key}")
            if len(row) != self.alphabet_size:
                raise BadParamError(f"row for {key} has wrong length")

    def conditional(self, ctx: Context) -> Dist:
        return self.rows[context_key(ctx, self.order)]

    def save(self, path) -> None:
        payload = {
            "order": self.order,
            "alphabet_size": self.alphabet_size,
            "rows": {
                ",".join(map(str, key)): row.mass.tolist()
                for key, row in sorted(self.rows.items())
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MarkovSource":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        rows = {}
        for key_str, masses in payload["rows"].items():
            key = tuple(int(t) for t in key_str.split(",")) if key_str else ()
            rows[key] = normalize(masses)
        return cls(int(payload["order"]), int(payload["alphabet_size"]), rows)


def random_source(
    seed: int, order: int, alphabet_size: int, concentration: float = 1.0
) -> MarkovSource:
    """Source with every row an independent symmetric Dirichlet draw.

    Fully determined by the seed: rows are drawn from one derived stream
    in the fixed reachable-context order.
    """
    if alphabet_size < 2:
        raise BadParamError("alphabet_size must be >= 2")
    if concentration <= 0:
        raise BadParamError("concentration must be positive")
    if order < 0:
        raise BadParamError("order must be >= 0")
    rng = Rng(derive_seed(seed, "markov-rows", order, alphabet_size))
    rows = {
        key: normalize(rng.dirichlet(concentration, alphabet_size))
        for key in reachable_contexts(order, alphabet_size)
    }
    return MarkovSource(order, alphabet_size, rows)


def perturb_draft(p_src: MarkovSource, mix: float, seed: int) -> MarkovSource:
    """Draft model q = (1-mix)*p + mix*(fresh Dirichlet row), rowwise.

    mix=0 returns a copy of p; mix=1 gives rows independent of p.  The mix
    knob controls how far Q sits from P (and so the KL divergence regime).
    """
    if not 0.0 <= mix <= 1.0:
        raise BadParamError("mix must lie in [0, 1]")
    if mix == 0.0:
        return MarkovSource(p_src.order, p_src.alphabet_size, dict(p_src.rows))
    rng = Rng(derive_seed(seed, "draft-perturb", p_src.order, p_src.alphabet_size))
    rows = {}
    for key in reachable_contexts(p_src.order, p_src.alphabet_size):
        noise = rng.dirichlet(1.0, p_src.alphabet_size)
        blended = (1.0 - mix) * p_src.rows[key].mass + mix * noise
        rows[key] = normalize(blended)
    return MarkovSource(p_src.order, p_src.alphabet_size, rows)


def autoregressive_sample(
    src: MarkovSource, ctx: Context, n: int, rng: Rng
) -> tuple[int, ...]:
    """Plain ancestral sampling; the ground-truth baseline for exactness."""
    out: list[int] = []
    cur = tuple(ctx)
    for _ in range(n):
        token = src.conditional(cur).sample(rng)
        out.append(token)
        cur = cur + (token,)
    return tuple(out)
