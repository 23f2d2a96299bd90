"""Acceptance engines for greedy (GSD) and exponential-race (ERSD)
speculative decoding, plus the full generation loop.

Every step emits the accepted root-descending path plus one extra token:
the residual sample for GSD, the last race winner (or a fresh frontier
sample) for ERSD.  Output therefore always advances by 1..k+1 tokens and
its law matches plain autoregressive sampling from the target source.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dists import residual_dist, without_replacement_update
from .errors import BadParamError, NoResidualMassError
from .markov import Context, MarkovSource
from .races import TreeIndex, winner
from .rng import Rng
from .trees import DraftedTokens, DraftTree, draft_ersd, draft_gsd

GSD = "gsd"
ERSD = "ersd"
METHODS = (GSD, ERSD)


@dataclass(frozen=True)
class StepResult:
    emitted: tuple[int, ...]
    accepted_nodes: tuple[TreeIndex, ...]
    accepted_count: int

    def __post_init__(self) -> None:
        if len(self.emitted) != self.accepted_count + 1:
            raise ValueError("a step emits exactly one token beyond the accepted path")


def verify_gsd(
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    drafted: DraftedTokens,
    tree: DraftTree,
    rng: Rng,
) -> StepResult:
    """Accept/reject cascade over the drafted tree.

    At each node, children are considered in sibling order: child token t
    is accepted with probability min(1, P_target(t) / Q_draft(t)); on
    rejection the target becomes its residual and the draft drops the
    rejected token.  Acceptance descends and restarts the cascade with
    fresh conditionals.  When no child remains, one token is sampled from
    the current target.  A vanishing residual (possible only through
    numerical drift) is handled by accepting the pending token.
    """
    base = tuple(ctx)
    emitted: list[int] = []
    path: list[TreeIndex] = []
    cur: TreeIndex = ()
    p_target = p.conditional(base)
    q_draft = q.conditional(base)
    nodes = tree.nodes
    assignment = drafted.assignment
    while True:
        descended = False
        i = 1
        child = cur + (1,)
        while child in nodes:
            t = assignment[child]
            pt = p_target.prob(t)
            qd = q_draft.prob(t)
            accept = rng.uniform() * qd < pt
            if not accept:
                try:
                    p_target = residual_dist(p_target, q_draft)
                except NoResidualMassError:
                    accept = True
            if accept:
                emitted.append(t)
                path.append(child)
                cur = child
                newctx = base + tuple(emitted)
                p_target = p.conditional(newctx)
                q_draft = q.conditional(newctx)
                descended = True
                break
            i += 1
            child = cur + (i,)
            if child in nodes:
                q_draft = without_replacement_update(q_draft, t)
        if not descended:
            break
    emitted.append(p_target.sample(rng))
    return StepResult(tuple(emitted), tuple(path), len(path))


def verify_ersd(
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    drafted: DraftedTokens,
    tree: DraftTree,
    rng: Rng,
) -> StepResult:
    """Race verification: descend while the target-side race winner matches
    a drafted child.

    At each node on the path the winner of the shared race under the
    target conditional is emitted; if it coincides with a drafted child
    the walk descends there.  A frontier node (no children in the tree)
    emits the winner of a fresh race instead, which is distributionally a
    plain sample from the target.
    """
    if drafted.races is None:
        raise BadParamError("verify_ersd needs race-drafted tokens")
    base = tuple(ctx)
    emitted: list[int] = []
    path: list[TreeIndex] = []
    cur: TreeIndex = ()
    curctx = base
    variates = drafted.races.variates
    assignment = drafted.assignment
    while True:
        p_row = p.conditional(curctx)
        nchild = tree.children_count(cur)
        if nchild == 0:
            e = rng.exponentials(p.alphabet_size)
            emitted.append(winner(e, p_row))
            break
        w = winner(variates[cur], p_row)
        emitted.append(w)
        nxt = None
        for i in range(1, nchild + 1):
            if assignment[cur + (i,)] == w:
                nxt = cur + (i,)
                break
        if nxt is None:
            break
        path.append(nxt)
        cur = nxt
        curctx = curctx + (w,)
    return StepResult(tuple(emitted), tuple(path), len(path))


def decode_step(
    method: str,
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    tree: DraftTree,
    rng: Rng,
) -> tuple[DraftedTokens, StepResult]:
    """One draft + verify round with the given method."""
    if method == GSD:
        drafted = draft_gsd(q, ctx, tree, rng)
        return drafted, verify_gsd(p, q, ctx, drafted, tree, rng)
    if method == ERSD:
        drafted = draft_ersd(q, ctx, tree, rng)
        return drafted, verify_ersd(p, q, ctx, drafted, tree, rng)
    raise BadParamError(f"unknown method {method!r}; expected one of {METHODS}")


def generate(
    method: str,
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    tree: DraftTree,
    n_tokens: int,
    rng: Rng,
) -> tuple[tuple[int, ...], list[int]]:
    """Draft + verify until at least n_tokens are emitted, then truncate.

    Returns the token sequence and the accepted count per step (the step
    that crosses n_tokens is recorded untruncated).
    """
    if n_tokens < 1:
        raise BadParamError("n_tokens must be >= 1")
    out: list[int] = []
    stats: list[int] = []
    cur = tuple(ctx)
    while len(out) < n_tokens:
        _, res = decode_step(method, p, q, cur, tree, rng)
        out.extend(res.emitted)
        stats.append(res.accepted_count)
        cur = cur + res.emitted
    return tuple(out[:n_tokens]), stats
