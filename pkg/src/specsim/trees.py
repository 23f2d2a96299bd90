"""Draft-tree topologies and the two drafting procedures.

A tree index (j1, ..., jl) addresses the jl-th child of its parent
(j1, ..., j(l-1)); the empty tuple is the root.  Sibling indices are
1-based throughout.  A draft tree is a prefix- and sibling-closed set of
non-root indices: a node presupposes its parent and all earlier siblings,
because siblings are without-replacement candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import BadParamError, ExhaustedAlphabetError
from .markov import Context, MarkovSource
from .races import RaceTable, TreeIndex, arrivals
from .rng import Rng

_DRAFT_ZERO_TOL = 1e-12


class DraftTree:
    """Immutable drafting-tree topology.

    The sorted view and the per-node child counts are derived lazily:
    optimal trees can run to 10^5 nodes, and construction should not pay
    for views that only the drafting pass consumes.
    """

    __slots__ = ("nodes", "_sorted", "_child_counts")

    def __init__(self, nodes) -> None:
        node_set = frozenset(tuple(int(i) for i in n) for n in nodes)
        if not node_set:
            raise BadParamError("a draft tree needs at least one node")
        child_counts: dict[TreeIndex, int] = {}
        for node in node_set:
            if len(node) == 0:
                raise BadParamError("the root is implicit, not a tree node")
            if any(i < 1 for i in node):
                raise BadParamError(f"sibling indices are 1-based: {node}")
            parent = node[:-1]
            if parent and parent not in node_set:
                raise BadParamError(f"{node} lacks its parent {parent}")
            if node[-1] > 1 and parent + (node[-1] - 1,) not in node_set:
                raise BadParamError(f"{node} lacks its earlier sibling")
            child_counts[parent] = max(child_counts.get(parent, 0), node[-1])
        self.nodes = node_set
        self._sorted = None
        self._child_counts = child_counts

    @classmethod
    def _from_closed(cls, nodes) -> "DraftTree":
        """Construction bypass for node sets that are closed by construction
        (the greedy builder); skips the invariant re-verification."""
        tree = object.__new__(cls)
        tree.nodes = frozenset(nodes)
        tree._sorted = None
        tree._child_counts = None
        return tree

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node: TreeIndex) -> bool:
        return node in self.nodes

    def __eq__(self, other) -> bool:
        return isinstance(other, DraftTree) and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash(self.nodes)

    def __repr__(self) -> str:
        return f"DraftTree({list(self.sorted_nodes)!r})"

    @property
    def sorted_nodes(self) -> tuple[TreeIndex, ...]:
        if self._sorted is None:
            self._sorted = tuple(sorted(self.nodes))
        return self._sorted

    def children_count(self, node: TreeIndex) -> int:
        if self._child_counts is None:
            counts: dict[TreeIndex, int] = {}
            for n in self.nodes:
                parent = n[:-1]
                if n[-1] > counts.get(parent, 0):
                    counts[parent] = n[-1]
            self._child_counts = counts
        return self._child_counts.get(node, 0)

    def max_sibling_index(self) -> int:
        return max(n[-1] for n in self.nodes)

    def depth(self) -> int:
        return max(len(n) for n in self.nodes)

    def serialize(self) -> str:
        """Newline-separated index paths, e.g. '1,1,2'."""
        return "\n".join(",".join(map(str, n)) for n in self.sorted_nodes) + "\n"

    @classmethod
    def parse(cls, text: str) -> "DraftTree":
        nodes = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            nodes.append(tuple(int(t) for t in line.split(",")))
        return cls(nodes)


def topology_sequence(k: int) -> DraftTree:
    """Chain (1), (1,1), ..., depth k."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    return DraftTree([(1,) * l for l in range(1, k + 1)])


def topology_batch(k: int) -> DraftTree:
    """k sibling children of the root: (1), (2), ..., (k)."""
    if k < 1:
        raise BadParamError("k must be >= 1")
    return DraftTree([(i,) for i in range(1, k + 1)])


def topology_specinfer(width: int, depth: int) -> DraftTree:
    """Common prefix chain of ``depth`` tokens ending in ``width`` leaf children.

    width=3, depth=2 gives three length-3 continuations sharing their
    first two tokens.
    """
    if width < 1 or depth < 0 or width + depth < 1:
        raise BadParamError("need width >= 1 and depth >= 0 with k >= 1")
    nodes = [(1,) * l for l in range(1, depth + 1)]
    prefix = (1,) * depth
    nodes.extend(prefix + (i,) for i in range(1, width + 1))
    return DraftTree(nodes)


@dataclass
class DraftedTokens:
    """Token assignment for one drafting pass.

    ``contexts`` maps each node to the context its token was sampled
    under (base context plus ancestor tokens), so verification never
    re-derives paths.  ``races`` is populated by the exponential-race
    drafting procedure and shared with its verifier.
    """

    assignment: dict[TreeIndex, int]
    contexts: dict[TreeIndex, Context]
    races: RaceTable | None = field(default=None, repr=False)


def draft_gsd(q: MarkovSource, ctx: Context, tree: DraftTree, rng: Rng) -> DraftedTokens:
    """Sampling without replacement along the tree, in lexicographic order.

    Node (j1..jl) is drawn from q's conditional at its parent context with
    the tokens of siblings 1..jl-1 zeroed out and the rest renormalized.
    """
    assignment: dict[TreeIndex, int] = {}
    node_ctx: dict[TreeIndex, Context] = {(): tuple(ctx)}
    for node in tree.sorted_nodes:
        parent = node[:-1]
        pctx = node_ctx[parent]
        masses = q.conditional(pctx).mass
        if node[-1] > 1:
            masses = masses.copy()
            for i in range(1, node[-1]):
                masses[assignment[parent + (i,)] - 1] = 0.0
        total = float(masses.sum())
        if total < _DRAFT_ZERO_TOL:
            raise ExhaustedAlphabetError(
                f"node {node} has more children than q supports"
            )
        r = rng.uniform() * total
        cum = masses.cumsum()
        token = min(int(cum.searchsorted(r, side="right")), len(masses) - 1) + 1
        assignment[node] = token
        node_ctx[node] = pctx + (token,)
    contexts = {node: node_ctx[node[:-1]] for node in tree.sorted_nodes}
    return DraftedTokens(assignment, contexts)


def draft_ersd(q: MarkovSource, ctx: Context, tree: DraftTree, rng: Rng) -> DraftedTokens:
    """Race drafting: child i receives the i-th arrival under q's conditional.

    One race per parent node, generated when its first child is visited
    and retained for verification.
    """
    races = RaceTable(q.alphabet_size)
    assignment: dict[TreeIndex, int] = {}
    node_ctx: dict[TreeIndex, Context] = {(): tuple(ctx)}
    arrival_cache: dict[TreeIndex, tuple[int, ...]] = {}
    for node in tree.sorted_nodes:
        parent = node[:-1]
        pctx = node_ctx[parent]
        if parent not in arrival_cache:
            e = races.ensure(parent, rng)
            row = q.conditional(pctx)
            arrival_cache[parent] = arrivals(e, row, tree.children_count(parent))
        token = arrival_cache[parent][node[-1] - 1]
        assignment[node] = token
        node_ctx[node] = pctx + (token,)
    contexts = {node: node_ctx[node[:-1]] for node in tree.sorted_nodes}
    return DraftedTokens(assignment, contexts, races)
