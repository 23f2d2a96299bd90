"""Experiment driver: strategy sweeps, acceptance estimation, exactness checks.

A sweep has three phases.  Phase 1 runs the sequence and batch strategies
and pools their per-index accept/trial counts into an estimated acceptance
model per method.  Phase 2 builds optimal trees from those models.  Phase 3
runs every (method, strategy, k) cell, attaches bound arithmetic, and
returns one row per cell.  Everything is a pure function of the config:
every random stream is derived from the config seed and a cell label, so
reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .bounds import min_lemma_m_bound, tunstall_bound
from .dists import entropy_of_masses, kl_divergence
from .errors import BadParamError, ConfigError, TooLargeError, ZeroEntropyError
from .markov import (
    MarkovSource,
    autoregressive_sample,
    context_key,
    perturb_draft,
    random_source,
)
from .rng import Rng, derive_seed
from .treeopt import (
    AcceptanceModel,
    AcceptanceTally,
    ScoredTree,
    acceptance_index_distribution,
    estimate_acceptance,
    expected_accepted,
    optimal_tree,
)
from .trees import DraftTree, topology_batch, topology_sequence, topology_specinfer
from .verify import ERSD, GSD, METHODS, decode_step, generate

CSV_HEADER = (
    "method,strategy,k,empirical_mean,empirical_stderr,theoretical,"
    "tunstall_bound,lemma_m_bound,m_star,h_r_bits,kl_bits"
)

_STRATEGY_RE = re.compile(r"^specinfer\((\d+),(\d+)\)$")
_PLAIN_STRATEGIES = ("sequence", "batch", "optimal")

# Internal estimator knobs, recorded in sweep metadata.
PHASE1_SEQUENCE_K = 8
EXACT_R_SAMPLES = 100_000
CONTEXT_WEIGHT_TOKENS = 20_000


def parse_strategy(spec: str) -> tuple[str, tuple[int, ...]]:
    if spec in _PLAIN_STRATEGIES:
        return spec, ()
    m = _STRATEGY_RE.match(spec)
    if m:
        width, depth = int(m.group(1)), int(m.group(2))
        if width < 1 or depth < 0:
            raise ConfigError(f"strategies: bad specinfer shape {spec!r}")
        return "specinfer", (width, depth)
    raise ConfigError(f"strategies: unknown strategy {spec!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 7
    alphabet_size: int = 16
    markov_order: int = 1
    draft_mix: float = 0.3
    methods: tuple[str, ...] = (GSD, ERSD)
    strategies: tuple[str, ...] = ("sequence", "batch", "specinfer(3,2)", "optimal")
    k_values: tuple[int, ...] = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32)
    tokens_per_run: int = 200
    runs: int = 100
    context_length: int = 4

    def __post_init__(self) -> None:
        if self.alphabet_size < 2:
            raise ConfigError("alphabet_size: must be >= 2")
        if self.markov_order < 0:
            raise ConfigError("markov_order: must be >= 0")
        if not 0.0 <= self.draft_mix <= 1.0:
            raise ConfigError("draft_mix: must lie in [0, 1]")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"methods: must be a non-empty subset of {METHODS}")
        if not self.strategies:
            raise ConfigError("strategies: must be non-empty")
        for s in self.strategies:
            parse_strategy(s)
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("k_values: must be >= 1")
        if list(self.k_values) != sorted(set(self.k_values)):
            raise ConfigError("k_values: must be strictly ascending")
        if self.tokens_per_run < 1:
            raise ConfigError("tokens_per_run: must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs: must be >= 1")
        if self.context_length < 0:
            raise ConfigError("context_length: must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        coerced = dict(data)
        for key in ("methods", "strategies"):
            if key in coerced:
                coerced[key] = tuple(coerced[key])
        if "k_values" in coerced:
            coerced["k_values"] = tuple(int(k) for k in coerced["k_values"])
        return cls(**coerced)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ResultRow:
    method: str
    strategy: str
    k: int
    empirical_mean: float
    empirical_stderr: float
    theoretical: float
    tunstall_bound: float
    lemma_m_bound: float
    m_star: int
    h_r_bits: float
    kl_bits: float
    marginal_acceptance: tuple[float, ...] = field(default=(), compare=False)


@dataclass
class SweepOutputs:
    config: ExperimentConfig
    rows: list[ResultRow]
    estimated_models: dict[str, AcceptanceModel]
    exact_models: dict[str, AcceptanceModel]
    h_r_bits: dict[str, float]
    kl_bits: float
    phase1_counts: dict[str, dict[int, tuple[int, int]]]
    metadata: dict


def build_sources(cfg: ExperimentConfig) -> tuple[MarkovSource, MarkovSource]:
    p = random_source(
        derive_seed(cfg.seed, "target-source"), cfg.markov_order, cfg.alphabet_size
    )
    q = perturb_draft(p, cfg.draft_mix, derive_seed(cfg.seed, "draft-source"))
    return p, q


def cell_tree(
    strategy: str,
    params: tuple[int, ...],
    k: int,
    alphabet_size: int,
    model: AcceptanceModel | None,
) -> DraftTree | None:
    """Topology for one sweep cell, or None when the cell is infeasible.

    Batch needs k distinct siblings, and at k = |alphabet| every step
    accepts with certainty, so batch cells run only for k < |alphabet|.
    The specinfer family keeps its configured width and grows the common
    prefix with k.
    """
    if strategy == "sequence":
        return topology_sequence(k)
    if strategy == "batch":
        return topology_batch(k) if k < alphabet_size else None
    if strategy == "specinfer":
        width = params[0] if params else 3
        if k <= width or width >= alphabet_size:
            return None
        return topology_specinfer(width, k - width)
    if strategy == "optimal":
        assert model is not None
        return optimal_tree(model, k).tree
    raise BadParamError(f"unknown strategy {strategy!r}")


def _burned_context(p: MarkovSource, length: int, rng: Rng) -> tuple[int, ...]:
    return autoregressive_sample(p, (), length, rng)


def _run_cell(
    method: str,
    p: MarkovSource,
    q: MarkovSource,
    tree: DraftTree,
    cfg: ExperimentConfig,
    label: tuple,
    tally: AcceptanceTally | None = None,
) -> tuple[float, float]:
    """Mean and stderr of emitted tokens per step over runs*tokens_per_run."""
    emitted_counts: list[int] = []
    for run in range(cfg.runs):
        rng = Rng(derive_seed(cfg.seed, *label, "run", run))
        ctx = _burned_context(p, cfg.context_length, rng)
        produced = 0
        while produced < cfg.tokens_per_run:
            _, res = decode_step(method, p, q, ctx, tree, rng)
            emitted_counts.append(len(res.emitted))
            if tally is not None:
                tally.record(tree, res)
            ctx = ctx + res.emitted
            produced += len(res.emitted)
    arr = np.asarray(emitted_counts, dtype=np.float64)
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), stderr


def _context_weights(
    p: MarkovSource, cfg: ExperimentConfig
) -> dict[tuple[int, ...], float]:
    """Visitation frequency of context keys along a long target-model run."""
    rng = Rng(derive_seed(cfg.seed, "context-weights"))
    counts: dict[tuple[int, ...], int] = {}
    ctx: tuple[int, ...] = ()
    for _ in range(CONTEXT_WEIGHT_TOKENS):
        key = context_key(ctx, p.order)
        counts[key] = counts.get(key, 0) + 1
        token = p.conditional(ctx).sample(rng)
        ctx = (ctx + (token,))[-max(p.order, 1) :]
    total = sum(counts.values())
    return {key: n / total for key, n in counts.items()}


def _pav_non_increasing(values: np.ndarray) -> np.ndarray:
    blocks: list[list[float]] = []  # [sum, width]
    for v in values:
        blocks.append([float(v), 1.0])
        while len(blocks) > 1 and blocks[-1][0] * blocks[-2][1] > blocks[-2][0] * blocks[-1][1]:
            s, w = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += w
    out: list[float] = []
    for s, w in blocks:
        out.extend([s / w] * int(w))
    return np.asarray(out)


def _exact_acceptance(
    method: str,
    p: MarkovSource,
    q: MarkovSource,
    weights: dict[tuple[int, ...], float],
    cfg: ExperimentConfig,
) -> tuple[float, AcceptanceModel, float]:
    """(H[R], marginal acceptance model, KL bits) at high Monte Carlo precision.

    H[R] is the visitation-weighted average of per-context acceptance
    entropies (the Tunstall-bound quantity); the marginal model pools the
    per-context index distributions and backs the residual-spread bound.
    """
    v = p.alphabet_size
    h_avg = 0.0
    marginal = np.zeros(v)
    kl_bits = 0.0
    for key, w in sorted(weights.items()):
        rng = Rng(derive_seed(cfg.seed, "exact-r", method, key))
        dist = acceptance_index_distribution(
            method, p.rows[key], q.rows[key], rng, EXACT_R_SAMPLES
        )
        h_avg += w * entropy_of_masses(dist)
        marginal += w * dist
        kl_bits += w * kl_divergence(p.rows[key], q.rows[key])
    adjusted = _pav_non_increasing(marginal)
    adjusted = np.clip(adjusted, 0.0, 1.0)
    total = adjusted.sum()
    if total > 1.0:
        adjusted = adjusted / total
    model = AcceptanceModel(tuple(float(x) for x in adjusted))
    return h_avg, model, kl_bits


def run_sweep_full(cfg: ExperimentConfig) -> SweepOutputs:
    p, q = build_sources(cfg)
    v = cfg.alphabet_size

    # Phase 1: estimate the acceptance model per method from sequence+batch.
    estimated: dict[str, AcceptanceModel] = {}
    phase1_counts: dict[str, dict[int, tuple[int, int]]] = {}
    for method in cfg.methods:
        tally = AcceptanceTally()
        _run_cell(
            method, p, q, topology_sequence(PHASE1_SEQUENCE_K), cfg,
            ("phase1", method, "sequence"), tally,
        )
        _run_cell(
            method, p, q, topology_batch(v), cfg, ("phase1", method, "batch"), tally
        )
        counts = tally.counts()
        phase1_counts[method] = counts
        estimated[method] = estimate_acceptance(counts).capped()

    # High-precision acceptance distributions for the bound columns.
    weights = _context_weights(p, cfg)
    h_r_bits: dict[str, float] = {}
    exact_models: dict[str, AcceptanceModel] = {}
    kl_bits = 0.0
    for method in cfg.methods:
        h_avg, exact_model, kl_bits = _exact_acceptance(method, p, q, weights, cfg)
        h_r_bits[method] = h_avg
        exact_models[method] = exact_model

    # Phase 2: bound arithmetic per (method, k); d comes from the optimal
    # tree of the exact model, as the residual-spread bound requires.  A
    # zero-entropy acceptance distribution (certain acceptance, e.g. Q = P)
    # bounds nothing: the columns go to infinity.
    bounds_by_mk: dict[tuple[str, int], tuple[float, float, int]] = {}
    for method in cfg.methods:
        for k in cfg.k_values:
            if h_r_bits[method] > 0.0:
                tun = tunstall_bound(k, v, h_r_bits[method])
            else:
                tun = math.inf
            try:
                d = optimal_tree(exact_models[method], k).tree.max_sibling_index()
                lemma, m_star = min_lemma_m_bound(exact_models[method], k, d=d)
            except ZeroEntropyError:
                lemma, m_star = math.inf, 1
            bounds_by_mk[(method, k)] = (tun, lemma, m_star)

    # Phase 3: run every feasible cell.
    rows: list[ResultRow] = []
    for method in cfg.methods:
        model = estimated[method]
        for strat_spec in cfg.strategies:
            strategy, params = parse_strategy(strat_spec)
            for k in cfg.k_values:
                tree = cell_tree(strategy, params, k, v, model)
                if tree is None:
                    continue
                mean, stderr = _run_cell(
                    method, p, q, tree, cfg, ("cell", method, strategy, k)
                )
                theoretical = 1.0 + expected_accepted(tree, model)
                tun, lemma, m_star = bounds_by_mk[(method, k)]
                rows.append(
                    ResultRow(
                        method=method,
                        strategy=strategy,
                        k=k,
                        empirical_mean=mean,
                        empirical_stderr=stderr,
                        theoretical=theoretical,
                        tunstall_bound=tun,
                        lemma_m_bound=lemma,
                        m_star=m_star,
                        h_r_bits=h_r_bits[method],
                        kl_bits=kl_bits,
                        marginal_acceptance=model.a,
                    )
                )

    metadata = {
        "config": cfg.to_dict(),
        "h_r_estimator": {
            "kind": "visitation-weighted average of per-context entropies",
            "samples_per_context": EXACT_R_SAMPLES,
            "context_weight_tokens": CONTEXT_WEIGHT_TOKENS,
        },
        "phase1": {
            "sequence_k": PHASE1_SEQUENCE_K,
            "batch_k": v,
            "counts": {m: {str(i): c for i, c in cnt.items()} for m, cnt in phase1_counts.items()},
        },
        "h_r_bits": dict(h_r_bits),
        "kl_bits": kl_bits,
    }
    return SweepOutputs(
        config=cfg,
        rows=rows,
        estimated_models=estimated,
        exact_models=exact_models,
        h_r_bits=h_r_bits,
        kl_bits=kl_bits,
        phase1_counts=phase1_counts,
        metadata=metadata,
    )


def run_sweep(cfg: ExperimentConfig) -> list[ResultRow]:
    return run_sweep_full(cfg).rows


# -- exactness --------------------------------------------------------------


@dataclass(frozen=True)
class ExactnessCell:
    method: str
    strategy: str
    tv: float
    trials: int


@dataclass(frozen=True)
class ExactnessReport:
    cells: tuple[ExactnessCell, ...]

    @property
    def max_tv(self) -> float:
        return max(c.tv for c in self.cells)


def exactness_topologies(
    cfg: ExperimentConfig, p: MarkovSource, q: MarkovSource
) -> list[tuple[str, str, DraftTree]]:
    """Per-method topology battery: simple, sequence(3), batch(3),
    specinfer(3,2) and the optimal tree (k=6) from a quick estimation run."""
    battery: list[tuple[str, str, DraftTree]] = []
    v = cfg.alphabet_size
    for method in cfg.methods:
        tally = AcceptanceTally()
        est_cfg = dataclasses.replace(cfg, tokens_per_run=200, runs=20)
        _run_cell(
            method, p, q, topology_sequence(3), est_cfg,
            ("exactness-est", method, "sequence"), tally,
        )
        _run_cell(
            method, p, q, topology_batch(v), est_cfg,
            ("exactness-est", method, "batch"), tally,
        )
        model = estimate_acceptance(tally.counts()).capped()
        battery.append((method, "simple", topology_sequence(1)))
        battery.append((method, "sequence(3)", topology_sequence(3)))
        if v > 3:
            battery.append((method, "batch(3)", topology_batch(3)))
        if v > 3:
            battery.append((method, "specinfer(3,2)", topology_specinfer(3, 2)))
        battery.append((method, "optimal(6)", optimal_tree(model, 6).tree))
    return battery


def exactness_suite(
    cfg: ExperimentConfig,
    trials: int = 200_000,
    generate_fn=None,
) -> ExactnessReport:
    """TV between the empirical first-two-token law and exact enumeration.

    The oracle is exhaustive: P(t1, t2) = P(t1 | ctx) P(t2 | ctx||t1) from
    the target table directly.  ``generate_fn`` exists so tests can inject
    a corrupted generator and confirm the suite notices.
    """
    if cfg.alphabet_size > 5:
        raise TooLargeError("exactness enumeration limited to alphabets <= 5")
    if generate_fn is None:
        generate_fn = generate
    p, q = build_sources(cfg)
    v = cfg.alphabet_size
    first = p.conditional(()).mass
    exact = np.empty((v, v))
    for t1 in range(1, v + 1):
        exact[t1 - 1] = first[t1 - 1] * p.conditional((t1,)).mass

    cells: list[ExactnessCell] = []
    for method, label, tree in exactness_topologies(cfg, p, q):
        rng = Rng(derive_seed(cfg.seed, "exactness", method, label))
        counts = np.zeros((v, v), dtype=np.int64)
        for _ in range(trials):
            tokens, _ = generate_fn(method, p, q, (), tree, 2, rng)
            counts[tokens[0] - 1, tokens[1] - 1] += 1
        tv = 0.5 * float(np.abs(counts / trials - exact).sum())
        cells.append(ExactnessCell(method, label, tv, trials))
    return ExactnessReport(tuple(cells))


# -- artifacts ---------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_csv(rows: list[ResultRow], path) -> None:
    """Fixed-schema CSV; floats use repr so parsing round-trips exactly."""
    if not rows:
        raise BadParamError("no rows to emit")
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(x)
                for x in (
                    r.method, r.strategy, r.k, r.empirical_mean, r.empirical_stderr,
                    r.theoretical, r.tunstall_bound, r.lemma_m_bound, r.m_star,
                    r.h_r_bits, r.kl_bits,
                )
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_csv(path) -> list[ResultRow]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise BadParamError(f"unexpected CSV header in {path}")
    rows = []
    for ln in lines[1:]:
        f = ln.split(",")
        rows.append(
            ResultRow(
                method=f[0], strategy=f[1], k=int(f[2]),
                empirical_mean=float(f[3]), empirical_stderr=float(f[4]),
                theoretical=float(f[5]), tunstall_bound=float(f[6]),
                lemma_m_bound=float(f[7]), m_star=int(f[8]),
                h_r_bits=float(f[9]), kl_bits=float(f[10]),
            )
        )
    return rows


_SVG_QUANTITIES = ("empirical", "theoretical", "tunstall_bound", "lemma_m_bound")
_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
               "#e377c2", "#7f7f7f")


def emit_svg_plot(rows: list[ResultRow], path) -> None:
    """Line chart of empirical/theoretical/bound values against k.

    One polyline per (method, strategy, quantity), tagged with data-*
    attributes so the chart is machine-checkable.
    """
    if not rows:
        raise BadParamError("no rows to plot")
    width, height = 760, 460
    ml, mr, mt, mb = 60, 20, 20, 40
    series: dict[tuple[str, str], list[ResultRow]] = {}
    for r in rows:
        series.setdefault((r.method, r.strategy), []).append(r)
    ks = sorted({r.k for r in rows})
    values = [
        getattr(r, q if q != "empirical" else "empirical_mean")
        for r in rows
        for q in _SVG_QUANTITIES
    ]
    y_lo, y_hi = 1.0, max(values) * 1.05
    x_lo, x_hi = min(ks), max(ks)

    def sx(k: float) -> float:
        if x_hi == x_lo:
            return ml + (width - ml - mr) / 2
        return ml + (k - x_lo) / (x_hi - x_lo) * (width - ml - mr)

    def sy(v: float) -> float:
        return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb)

    dashes = {"empirical": "", "theoretical": "6,3", "tunstall_bound": "2,3",
              "lemma_m_bound": "8,2,2,2"}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height-mb}" x2="{width-mr}" y2="{height-mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height-mb}" stroke="black"/>',
        f'<text x="{(width+ml-mr)//2}" y="{height-8}" font-size="12">drafted tokens k</text>',
        f'<text x="12" y="{(height+mt-mb)//2}" font-size="12" transform="rotate(-90 12 {(height+mt-mb)//2})">expected generated tokens</text>',
    ]
    for k in ks:
        parts.append(
            f'<text x="{sx(k):.1f}" y="{height-mb+14}" font-size="10" text-anchor="middle">{k}</text>'
        )
    for idx, ((method, strategy), group) in enumerate(sorted(series.items())):
        group = sorted(group, key=lambda r: r.k)
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        for quantity in _SVG_QUANTITIES:
            attr = quantity if quantity != "empirical" else "empirical_mean"
            pts = " ".join(f"{sx(r.k):.2f},{sy(getattr(r, attr)):.2f}" for r in group)
            dash = dashes[quantity]
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            parts.append(
                f'<polyline fill="none" stroke="{color}"{dash_attr} '
                f'data-method="{method}" data-strategy="{strategy}" '
                f'data-quantity="{quantity}" points="{pts}"/>'
            )
        parts.append(
            f'<text x="{width-mr-150}" y="{mt+14*(idx+1)}" font-size="11" '
            f'fill="{color}">{method}/{strategy}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
