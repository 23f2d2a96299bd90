"""Matplotlib renderings of sweep results, written next to the CSV."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import ResultRow, SweepOutputs  # noqa: E402

_STRATEGY_COLORS = {
    "sequence": "#1f77b4",
    "batch": "#ff7f0e",
    "specinfer": "#2ca02c",
    "optimal": "#d62728",
}


def _by_cell(rows: list[ResultRow]) -> dict[tuple[str, str], list[ResultRow]]:
    cells: dict[tuple[str, str], list[ResultRow]] = {}
    for r in rows:
        cells.setdefault((r.method, r.strategy), []).append(r)
    for group in cells.values():
        group.sort(key=lambda r: r.k)
    return cells


def render_expected_tokens(rows: list[ResultRow], path: Path) -> None:
    """Empirical curves with error bars, theoretical dashes, bound dots."""
    cells = _by_cell(rows)
    methods = sorted({m for m, _ in cells})
    fig, axes = plt.subplots(1, len(methods), figsize=(6.0 * len(methods), 4.2),
                             squeeze=False, sharey=True)
    for ax, method in zip(axes[0], methods):
        bound_drawn = False
        for (m, strategy), group in sorted(cells.items()):
            if m != method:
                continue
            color = _STRATEGY_COLORS.get(strategy, "#7f7f7f")
            ks = [r.k for r in group]
            ax.errorbar(
                ks, [r.empirical_mean for r in group],
                yerr=[2 * r.empirical_stderr for r in group],
                color=color, marker="o", markersize=3, linewidth=1.2,
                label=f"{strategy} (empirical)", capsize=2,
            )
            ax.plot(
                ks, [r.theoretical for r in group], color=color,
                linestyle="--", linewidth=1.0, alpha=0.7,
                label=f"{strategy} (theoretical)",
            )
            if not bound_drawn:
                ax.plot(
                    ks, [r.lemma_m_bound for r in group], color="black",
                    linestyle=":", linewidth=1.2, label="residual-spread bound",
                )
                bound_drawn = True
        ax.set_title(method.upper())
        ax.set_xlabel("drafted tokens k")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("expected generated tokens")
    axes[0][-1].legend(fontsize=7, loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_marginal_acceptance(outputs: SweepOutputs, path: Path) -> None:
    """Per-strategy marginal gain per drafted token plus the estimated a(i)."""
    cells = _by_cell(outputs.rows)
    methods = sorted({m for m, _ in cells})
    fig, axes = plt.subplots(1, len(methods), figsize=(6.0 * len(methods), 4.2),
                             squeeze=False, sharey=True)
    for ax, method in zip(axes[0], methods):
        for (m, strategy), group in sorted(cells.items()):
            if m != method or len(group) < 2:
                continue
            color = _STRATEGY_COLORS.get(strategy, "#7f7f7f")
            ks = [r.k for r in group]
            means = [r.empirical_mean for r in group]
            mk = [(ks[i] + ks[i + 1]) / 2 for i in range(len(ks) - 1)]
            marg = [
                (means[i + 1] - means[i]) / (ks[i + 1] - ks[i])
                for i in range(len(ks) - 1)
            ]
            ax.plot(mk, marg, color=color, marker="o", markersize=3,
                    linewidth=1.1, label=f"{strategy} (empirical gain)")
        model = outputs.estimated_models.get(method)
        if model is not None:
            idx = range(1, len(model.a) + 1)
            ax.plot(idx, model.a, color="black", linestyle="--", marker="s",
                    markersize=3, linewidth=1.0, label="estimated a(i)")
        ax.set_title(method.upper())
        ax.set_xlabel("drafted tokens k / sibling index i")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("marginal acceptance")
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_all(outputs: SweepOutputs, outdir: Path) -> list[Path]:
    outdir = Path(outdir)
    expected = outdir / "expected_tokens.png"
    marginal = outdir / "marginal_acceptance.png"
    render_expected_tokens(outputs.rows, expected)
    render_marginal_acceptance(outputs, marginal)
    return [expected, marginal]
