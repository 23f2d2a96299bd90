"""Speculative decoding as channel simulation, at desk scale.

Greedy and exponential-race speculative decoding over arbitrary draft
trees, Markov-source stand-ins for language models, optimal drafting-tree
construction, and the bound arithmetic tying expected speed-up to the
entropy of the acceptance distribution.
"""

from .bounds import (
    BoundReport,
    bound_report,
    codeword_bits,
    entropy_sandwich,
    lemma_m_bound,
    min_lemma_m_bound,
    tunstall_bound,
    tunstall_bound_tight,
    tunstall_leaf_count,
)
from .dists import (
    Dist,
    entropy,
    hm_distance,
    kl_divergence,
    normalize,
    residual_dist,
    tv_distance,
    without_replacement_update,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    SweepOutputs,
    emit_csv,
    emit_svg_plot,
    exactness_suite,
    parse_csv,
    run_sweep,
    run_sweep_full,
)
from .markov import (
    Context,
    MarkovSource,
    autoregressive_sample,
    perturb_draft,
    random_source,
)
from .races import RaceTable, TreeIndex, arrivals, ensure_race, winner
from .rng import Rng, derive_seed
from .treeopt import (
    AcceptanceModel,
    AcceptanceTally,
    ScoredTree,
    acceptance_index_distribution,
    estimate_acceptance,
    exact_acceptance_oracle,
    expected_accepted,
    optimal_tree,
)
from .trees import (
    DraftedTokens,
    DraftTree,
    draft_ersd,
    draft_gsd,
    topology_batch,
    topology_sequence,
    topology_specinfer,
)
from .verify import ERSD, GSD, StepResult, decode_step, generate, verify_ersd, verify_gsd

__all__ = [
    "AcceptanceModel",
    "AcceptanceTally",
    "BoundReport",
    "Context",
    "Dist",
    "DraftTree",
    "DraftedTokens",
    "ERSD",
    "ExperimentConfig",
    "GSD",
    "MarkovSource",
    "RaceTable",
    "ResultRow",
    "Rng",
    "ScoredTree",
    "StepResult",
    "SweepOutputs",
    "TreeIndex",
    "acceptance_index_distribution",
    "arrivals",
    "autoregressive_sample",
    "bound_report",
    "codeword_bits",
    "decode_step",
    "derive_seed",
    "draft_ersd",
    "draft_gsd",
    "emit_csv",
    "emit_svg_plot",
    "ensure_race",
    "entropy",
    "entropy_sandwich",
    "estimate_acceptance",
    "exact_acceptance_oracle",
    "exactness_suite",
    "expected_accepted",
    "generate",
    "hm_distance",
    "kl_divergence",
    "lemma_m_bound",
    "min_lemma_m_bound",
    "normalize",
    "optimal_tree",
    "parse_csv",
    "perturb_draft",
    "random_source",
    "residual_dist",
    "run_sweep",
    "run_sweep_full",
    "topology_batch",
    "topology_sequence",
    "topology_specinfer",
    "tunstall_bound",
    "tunstall_bound_tight",
    "tunstall_leaf_count",
    "tv_distance",
    "verify_ersd",
    "verify_gsd",
    "winner",
    "without_replacement_update",
]
