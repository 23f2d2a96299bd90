"""Optimal drafting-tree construction from an acceptance model.

The acceptance model is the 0-th order approximation of the acceptance
function: a vector a(1) >= a(2) >= ... of per-sibling-index acceptance
probabilities, under which a node (j1..jl) is accepted with probability
prod_m a(jm).  The greedy construction pops the highest-probability
candidate k times from a priority queue, which is exactly a Tunstall-tree
expansion of the acceptance distribution.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .dists import Dist, entropy_of_masses, hm_distance, tv_distance
from .errors import BadParamError, NoDataError, TooLargeError
from .markov import Context, MarkovSource
from .races import TreeIndex
from .rng import Rng
from .trees import DraftTree
from .verify import ERSD, GSD, StepResult


@dataclass(frozen=True)
class AcceptanceModel:
    """Non-increasing per-index acceptance probabilities, summing to <= 1.

    ``order`` is kept for interface symmetry with context-dependent
    acceptance functions; only order 0 is implemented.
    """

    a: tuple[float, ...]
    order: int = 0

    def __post_init__(self) -> None:
        if self.order != 0:
            raise BadParamError("only the 0-th order acceptance model is implemented")
        if not self.a:
            raise BadParamError("acceptance vector must be non-empty")
        if any(not 0.0 <= x <= 1.0 for x in self.a):
            raise BadParamError("acceptance entries must lie in [0, 1]")
        if any(self.a[i] < self.a[i + 1] for i in range(len(self.a) - 1)):
            raise BadParamError("acceptance entries must be non-increasing")

    @property
    def residual(self) -> float:
        return max(0.0, 1.0 - sum(self.a))

    def is_distribution(self) -> bool:
        """Whether the entries plus residual form a probability vector.

        Pooled empirical estimates can sum slightly above 1 (the sequence
        and batch phases measure index 1 under different dynamics); such a
        model still ranks trees but cannot feed entropy or bound math
        until capped.
        """
        return sum(self.a) <= 1.0 + 1e-9

    def capped(self) -> "AcceptanceModel":
        """Scaled proportionally so the entries sum to at most 1."""
        total = sum(self.a)
        if total <= 1.0:
            return self
        return AcceptanceModel(tuple(x / total for x in self.a), self.order)

    def node_prob(self, node: TreeIndex) -> float:
        """R(j) = prod over path entries of a(index); 0 beyond the vector."""
        r = 1.0
        for i in node:
            if i > len(self.a):
                return 0.0
            r *= self.a[i - 1]
        return r

    def entropy_bits(self) -> float:
        """Entropy of (a(1), ..., a(d), residual) in bits."""
        if not self.is_distribution():
            raise BadParamError("entries sum above 1; cap the model first")
        return entropy_of_masses(np.array(self.a + (self.residual,)))

    def serialize(self) -> str:
        return "\n".join(repr(x) for x in self.a) + "\n"

    @classmethod
    def parse(cls, text: str) -> "AcceptanceModel":
        values = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            values.append(float(line))
        return cls(tuple(values))


@dataclass(frozen=True)
class ScoredTree:
    tree: DraftTree
    score: float
    per_node: dict[TreeIndex, float]


# Bulk construction pays off once the queue outgrows the cache; chain-heavy
# shapes (a(1) near 1) keep the queue path, whose cost does not depend on
# tree depth.
_BULK_MIN_K = 4096
_BULK_MAX_A1 = 0.9
_BULK_MAX_LEVELS = 512


def optimal_tree(r: AcceptanceModel, k: int) -> ScoredTree:
    """Greedy tree of k nodes maximizing the summed acceptance probability.

    Semantics are those of a priority queue seeded with the root's first
    child: pop the best candidate k times, each pop pushing the popped
    node's first child and its next sibling (while the sibling index stays
    within the model).  Ties break toward shorter, then lexicographically
    smaller paths, so the result is deterministic.  O(k log k).

    Large trees are built by level-wise vectorized expansion with pruning,
    which yields the identical node set, probabilities, and tie order
    while touching memory sequentially; small or chain-heavy instances use
    the queue directly.
    """
    if k < 1:
        raise BadParamError("k must be >= 1")
    if r.a[0] <= 0.0:
        raise BadParamError("a(1) must be positive")
    a = r.a
    if k >= _BULK_MIN_K and len(a) >= 2 and a[0] <= _BULK_MAX_A1:
        result = _optimal_tree_bulk(a, k)
        if result is not None:
            return result
    return _optimal_tree_queue(a, k)


def _optimal_tree_queue(a: tuple[float, ...], k: int) -> ScoredTree:
    cap = len(a)
    # heap entries: (-R, depth, path, parent_R)
    heap: list[tuple[float, int, TreeIndex, float]] = [(-a[0], 1, (1,), 1.0)]
    per_node: dict[TreeIndex, float] = {}
    for _ in range(k):
        neg_r, depth, node, parent_r = heapq.heappop(heap)
        node_r = -neg_r
        per_node[node] = node_r
        heapq.heappush(heap, (-(node_r * a[0]), depth + 1, node + (1,), node_r))
        sib = node[-1]
        if sib < cap:
            sibling = node[:-1] + (sib + 1,)
            heapq.heappush(heap, (-(parent_r * a[sib]), depth, sibling, parent_r))
    tree = DraftTree._from_closed(per_node.keys())
    return ScoredTree(tree, float(sum(per_node.values())), per_node)


def _take_first_k(products: np.ndarray, k: int) -> np.ndarray:
    """Ascending indices of the first k entries of the stable
    (-product, position) order; position order encodes (depth, lex)."""
    n = products.size
    if n <= k:
        return np.arange(n, dtype=np.int64)
    kth = np.partition(products, n - k)[n - k]
    greater = np.flatnonzero(products > kth)
    equal = np.flatnonzero(products == kth)
    keep = np.concatenate([greater, equal[: k - greater.size]])
    keep.sort()
    return keep


_BULK_CHUNK_PARENTS = 4096


def _kth_largest(parts: list[np.ndarray], k: int) -> float | None:
    arr = np.concatenate(parts) if len(parts) > 1 else parts[0]
    if arr.size < k:
        return None
    return float(np.partition(arr, arr.size - k)[arr.size - k])


def _optimal_tree_bulk(a: tuple[float, ...], k: int) -> ScoredTree | None:
    """Level-wise expansion with pruning against a running k-th-best bound.

    Every node's probability is its parent's times a(sibling), exactly as
    the queue computes it, and candidate arrays are generated in (depth,
    lex) order so stable top-k cuts reproduce the queue's tie-breaking.
    Dropping candidates below the bound is safe: the bound only rises
    toward the final threshold, and both selected nodes and their
    ancestors sit at or above it.  Children are generated in parent
    chunks so a level is never materialized much beyond the bound; the
    bound is first set mid-level once k candidates have been seen.
    Returns None if the level budget runs out (pathologically deep shapes
    fall back to the queue).
    """
    av = np.asarray(a, dtype=np.float64)
    v = av.size
    a0 = float(av[0])
    sib_range = np.arange(1, v + 1, dtype=np.int64)
    lv_prod: list[np.ndarray] = []
    lv_parent: list[np.ndarray] = []
    lv_sib: list[np.ndarray] = []
    bound: float | None = None
    # level-1 candidates: the root's children
    cand_prod = av.copy()
    cand_parent = np.full(v, -1, dtype=np.int64)
    cand_sib = sib_range.copy()
    while True:
        keep = _take_first_k(cand_prod, k)
        lv_prod.append(cand_prod[keep])
        lv_parent.append(cand_parent[keep])
        lv_sib.append(cand_sib[keep])
        kept_prod = lv_prod[-1]
        new_bound = _kth_largest(lv_prod, k)
        if new_bound is not None:
            bound = new_bound
        if kept_prod.size == 0:
            break
        # deeper candidates lose ties, so equality with the k-th best stops too
        if bound is not None and float(kept_prod.max()) * a0 <= bound:
            break
        if len(lv_prod) >= _BULK_MAX_LEVELS:
            return None
        # children of the kept nodes, chunk by chunk under the bound
        acc_p: list[np.ndarray] = []
        acc_par: list[np.ndarray] = []
        acc_sib: list[np.ndarray] = []
        acc_size = 0
        prior_size = sum(p.size for p in lv_prod)
        for start in range(0, kept_prod.size, _BULK_CHUNK_PARENTS):
            stop = min(start + _BULK_CHUNK_PARENTS, kept_prod.size)
            parent_pos = np.arange(start, stop, dtype=np.int64)
            pp = kept_prod[start:stop]
            if bound is not None:
                viable = np.flatnonzero(pp * a0 >= bound)
                if viable.size == 0:
                    continue
                parent_pos = parent_pos[viable]
                pp = pp[viable]
            prods = (pp[:, None] * av[None, :]).ravel()
            pars = np.repeat(parent_pos, v)
            sibs = np.tile(sib_range, pp.size)
            if bound is not None:
                alive = np.flatnonzero(prods >= bound)
                if alive.size < prods.size:
                    prods = prods[alive]
                    pars = pars[alive]
                    sibs = sibs[alive]
            acc_p.append(prods)
            acc_par.append(pars)
            acc_sib.append(sibs)
            acc_size += prods.size
            if bound is None and prior_size + acc_size >= k:
                bound = _kth_largest(lv_prod + acc_p, k)
        if not acc_p:
            cand_prod = np.empty(0, dtype=np.float64)
            cand_parent = np.empty(0, dtype=np.int64)
            cand_sib = np.empty(0, dtype=np.int64)
        else:
            cand_prod = np.concatenate(acc_p)
            cand_parent = np.concatenate(acc_par)
            cand_sib = np.concatenate(acc_sib)

    all_prod = np.concatenate(lv_prod)
    sel = _take_first_k(all_prod, k)
    sel_prod = all_prod[sel]
    offsets = np.zeros(len(lv_prod) + 1, dtype=np.int64)
    np.cumsum([p.size for p in lv_prod], out=offsets[1:])
    sel_level = np.searchsorted(offsets, sel, side="right") - 1
    sel_pos = sel - offsets[sel_level]

    # materialize index paths by back-walking the per-level parent arrays
    paths: list[TreeIndex | None] = [None] * sel.size
    for level in np.unique(sel_level):
        where = np.flatnonzero(sel_level == level)
        columns = []
        cur = sel_pos[where]
        for lj in range(int(level), -1, -1):
            columns.append(lv_sib[lj][cur])
            cur = lv_parent[lj][cur]
        columns.reverse()
        rows = list(map(tuple, np.stack(columns, axis=1).tolist()))
        for out_idx, row in zip(where.tolist(), rows):
            paths[out_idx] = row

    pop_order = np.argsort(-sel_prod, kind="stable")
    ordered_paths = [paths[i] for i in pop_order.tolist()]
    per_node = dict(zip(ordered_paths, sel_prod[pop_order].tolist()))
    tree = DraftTree._from_closed(per_node)
    return ScoredTree(tree, float(sel_prod.sum()), per_node)


def expected_accepted(tree: DraftTree, r: AcceptanceModel) -> float:
    """Sum over tree nodes of the model acceptance probability."""
    probs: dict[TreeIndex, float] = {(): 1.0}
    total = 0.0
    for node in tree.sorted_nodes:
        p = probs[node[:-1]] * (r.a[node[-1] - 1] if node[-1] <= len(r.a) else 0.0)
        probs[node] = p
        total += p
    return total


# -- estimation from harness counts ---------------------------------------


class AcceptanceTally:
    """Per-sibling-index accept/trial counts from verification steps.

    A node gets a trial whenever its parent lies on the accepted path
    (the root always does) and an accept when the node itself does, which
    matches the marginal acceptance probability the 0-th order model
    factorizes over.
    """

    def __init__(self) -> None:
        self.accepts: dict[int, int] = {}
        self.trials: dict[int, int] = {}

    def record(self, tree: DraftTree, result: StepResult) -> None:
        on_path = set(result.accepted_nodes)
        on_path.add(())
        for node in tree.sorted_nodes:
            if node[:-1] in on_path:
                idx = node[-1]
                self.trials[idx] = self.trials.get(idx, 0) + 1
                if node in on_path:
                    self.accepts[idx] = self.accepts.get(idx, 0) + 1

    def counts(self) -> dict[int, tuple[int, int]]:
        return {i: (self.accepts.get(i, 0), t) for i, t in sorted(self.trials.items())}

    def merged(self, other: "AcceptanceTally") -> "AcceptanceTally":
        out = AcceptanceTally()
        for src in (self, other):
            for i, n in src.trials.items():
                out.trials[i] = out.trials.get(i, 0) + n
            for i, n in src.accepts.items():
                out.accepts[i] = out.accepts.get(i, 0) + n
        return out


def estimate_acceptance(
    counts: dict[int, tuple[int, int]], min_trials: int = 100
) -> AcceptanceModel:
    """Empirical a(i) = accepts/trials, projected to the non-increasing cone.

    Indices are kept contiguously from 1 while they have at least
    ``min_trials`` trials; the projection is pool-adjacent-violators on
    the pooled counts.  Raw estimates can invert through noise, which
    would break the sibling-closure logic of the greedy construction.
    """
    usable: list[tuple[int, int]] = []
    for i in itertools.count(1):
        if i not in counts:
            break
        acc, tri = counts[i]
        if tri < max(min_trials, 1):
            break
        if acc > tri:
            raise BadParamError(f"index {i}: accepts exceed trials")
        usable.append((acc, tri))
    if not usable:
        raise NoDataError("no index has enough trials")
    # PAV for a non-increasing fit: merge any block that rises above its
    # predecessor, pooling accept and trial counts.
    blocks: list[list[int]] = []  # [accepts, trials, width]
    for acc, tri in usable:
        blocks.append([acc, tri, 1])
        while len(blocks) > 1 and (
            blocks[-1][0] * blocks[-2][1] > blocks[-2][0] * blocks[-1][1]
        ):
            acc2, tri2, w2 = blocks.pop()
            blocks[-1][0] += acc2
            blocks[-1][1] += tri2
            blocks[-1][2] += w2
    rates: list[float] = []
    for acc, tri, width in blocks:
        rates.extend([acc / tri] * width)
    return AcceptanceModel(tuple(rates))


# -- exact / high-precision acceptance probabilities ----------------------

_ORACLE_MAX_ALPHABET = 6
_ORACLE_MAX_DEPTH = 3
_ORACLE_WORK_LIMIT = 2_000_000


def _sibling_closure(node: TreeIndex) -> list[TreeIndex]:
    """Prefix and earlier-sibling closure of a node, sorted lexicographically."""
    closure = set()
    for l in range(1, len(node) + 1):
        prefix = node[:l]
        for i in range(1, prefix[-1] + 1):
            closure.add(prefix[:-1] + (i,))
    return sorted(closure)


def _gsd_accept_given_assignment(
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    node: TreeIndex,
    tokens: dict[TreeIndex, int],
) -> float:
    """P[node accepted | drafted tokens], by walking the cascade arithmetic."""
    prob = 1.0
    curctx = tuple(ctx)
    for l in range(1, len(node) + 1):
        parent = node[: l - 1]
        p_t = p.conditional(curctx).mass.copy()
        q_d = q.conditional(curctx).mass.copy()
        for i in range(1, node[l - 1] + 1):
            t = tokens[parent + (i,)]
            ratio = 1.0 if p_t[t - 1] >= q_d[t - 1] else p_t[t - 1] / q_d[t - 1]
            if i == node[l - 1]:
                prob *= ratio
                break
            prob *= 1.0 - ratio
            if prob == 0.0:
                return 0.0
            res = np.maximum(p_t - q_d, 0.0)
            total = res.sum()
            if total <= 0.0:
                return 0.0  # certain acceptance upstream: this branch has measure 0
            p_t = res / total
            q_d[t - 1] = 0.0
            q_d = q_d / q_d.sum()
        curctx = curctx + (tokens[node[:l]],)
    return prob


def _gsd_oracle(
    p: MarkovSource, q: MarkovSource, ctx: Context, node: TreeIndex
) -> float:
    closure = _sibling_closure(node)
    total = 0.0
    work = 0

    def rec(idx: int, tokens: dict[TreeIndex, int], ctxs: dict[TreeIndex, Context], prob: float) -> None:
        nonlocal total, work
        if idx == len(closure):
            total += prob * _gsd_accept_given_assignment(p, q, ctx, node, tokens)
            return
        j = closure[idx]
        parent = j[:-1]
        masses = q.conditional(ctxs[parent]).mass.copy()
        for i in range(1, j[-1]):
            masses[tokens[parent + (i,)] - 1] = 0.0
        norm = masses.sum()
        for t0 in np.flatnonzero(masses > 0.0):
            work += 1
            if work > _ORACLE_WORK_LIMIT:
                raise TooLargeError("oracle enumeration exceeded its work budget")
            token = int(t0) + 1
            tokens[j] = token
            ctxs[j] = ctxs[parent] + (token,)
            rec(idx + 1, tokens, ctxs, prob * float(masses[t0]) / norm)
            del tokens[j], ctxs[j]

    rec(0, {}, {(): tuple(ctx)}, 1.0)
    return total


def _context_codec(src: MarkovSource):
    """Context-key encoder: row matrix plus a (code, token) -> code transition."""
    from .markov import context_key, reachable_contexts

    keys = reachable_contexts(src.order, src.alphabet_size)
    code_of = {key: i for i, key in enumerate(keys)}
    rows = np.stack([src.rows[key].mass for key in keys])
    v = src.alphabet_size
    trans = np.zeros((len(keys), v + 1), dtype=np.int64)
    for key, i in code_of.items():
        for t in range(1, v + 1):
            trans[i, t] = code_of[context_key(key + (t,), src.order)]
    return code_of, rows, trans


def _ersd_oracle_mc(
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    node: TreeIndex,
    rng: Rng,
    n_samples: int,
) -> float:
    """Monte Carlo over shared races: fraction of draws whose target-side
    winners descend exactly through ``node``."""
    from .markov import context_key

    v = p.alphabet_size
    p_codes, p_rows, p_trans = _context_codec(p)
    q_codes, q_rows, q_trans = _context_codec(q)
    pc = np.full(n_samples, p_codes[context_key(tuple(ctx), p.order)], dtype=np.int64)
    qc = np.full(n_samples, q_codes[context_key(tuple(ctx), q.order)], dtype=np.int64)
    alive = np.ones(n_samples, dtype=bool)
    for l in range(len(node)):
        e = rng.exponentials(n_samples * v).reshape(n_samples, v)
        q_mat = q_rows[qc]
        p_mat = p_rows[pc]
        order = np.argsort(e / q_mat, axis=1, kind="stable")
        branch_token = order[:, node[l] - 1] + 1
        p_winner = np.argmin(e / p_mat, axis=1) + 1
        alive &= p_winner == branch_token
        pc = p_trans[pc, branch_token]
        qc = q_trans[qc, branch_token]
    return float(alive.mean())


def exact_acceptance_oracle(
    method: str,
    p: MarkovSource,
    q: MarkovSource,
    ctx: Context,
    node: TreeIndex,
    rng: Rng | None = None,
    n_samples: int = 1_000_000,
) -> float:
    """Acceptance probability of a tree vertex, marginalized over drafts.

    GSD: exhaustive enumeration over the sibling closure of the node and
    the accept/reject branches.  ERSD: Monte Carlo over shared races.
    A test oracle, limited to alphabets <= 6 and depth <= 3.
    """
    if p.alphabet_size > _ORACLE_MAX_ALPHABET:
        raise TooLargeError("oracle limited to alphabets of size <= 6")
    if len(node) > _ORACLE_MAX_DEPTH or len(node) == 0:
        raise TooLargeError("oracle limited to nodes of depth 1..3")
    if method == GSD:
        return _gsd_oracle(p, q, ctx, node)
    if method == ERSD:
        if rng is None:
            rng = Rng(0)
        return _ersd_oracle_mc(p, q, ctx, node, rng, n_samples)
    raise BadParamError(f"unknown method {method!r}")


# -- full-batch acceptance-index distribution ------------------------------


def acceptance_index_distribution(
    method: str, p_row: Dist, q_row: Dist, rng: Rng, n_samples: int
) -> np.ndarray:
    """Monte Carlo law of the accepted sibling index for a full batch.

    With all |alphabet| candidates drafted without replacement, both
    methods always accept some index, so this is the acceptance
    distribution whose entropy enters the Tunstall bound.  Candidates are
    ordered by race arrivals (equivalent in law to sequential
    without-replacement sampling).
    """
    v = len(p_row)
    e = rng.exponentials(n_samples * v).reshape(n_samples, v)
    order = np.argsort(e / q_row.mass, axis=1, kind="stable")
    rows = np.arange(n_samples)
    if method == ERSD:
        p_winner = np.argmin(e / p_row.mass, axis=1)
        rank = np.empty((n_samples, v), dtype=np.int64)
        rank[rows[:, None], order] = np.arange(v)
        idx = rank[rows, p_winner]
        return np.bincount(idx, minlength=v) / n_samples
    if method != GSD:
        raise BadParamError(f"unknown method {method!r}")
    p_t = np.tile(p_row.mass, (n_samples, 1))
    q_d = np.tile(q_row.mass, (n_samples, 1))
    out = np.zeros(v, dtype=np.int64)
    alive = np.ones(n_samples, dtype=bool)
    for i in range(v):
        t = order[:, i]
        pt = p_t[rows, t]
        qd = q_d[rows, t]
        u = rng.uniforms(n_samples)
        accept = alive & (u * qd < pt)
        out[i] = int(accept.sum())
        alive &= ~accept
        if not alive.any():
            break
        res = np.maximum(p_t - q_d, 0.0)
        total = res.sum(axis=1)
        drained = alive & (total <= 1e-15)
        if drained.any():
            # numerical drift: mirrors the verifier's accept-on-empty-residual
            out[i] += int(drained.sum())
            alive &= ~drained
            if not alive.any():
                break
        safe = np.where(total > 0.0, total, 1.0)
        p_t = res / safe[:, None]
        q_d[rows, t] = 0.0
        q_d = q_d / q_d.sum(axis=1, keepdims=True)
    return out / n_samples


def simple_acceptance_bounds(p_row: Dist, q_row: Dist) -> tuple[float, float]:
    """(harmonic-mean lower, 1 - TV upper) bracket for first-token acceptance."""
    return hm_distance(p_row, q_row), 1.0 - tv_distance(p_row, q_row)
