"""Command-line interface: sweep, exactness, tree, bounds."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bounds import DEFAULT_GRS_CONSTANT, bound_report
from .errors import SpecSimError
from .harness import (
    ExperimentConfig,
    emit_csv,
    emit_svg_plot,
    exactness_suite,
    run_sweep_full,
)
from .treeopt import AcceptanceModel, optimal_tree


def _load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_json(path)


def _load_acceptance(path: str) -> AcceptanceModel:
    return AcceptanceModel.parse(Path(path).read_text(encoding="utf-8"))


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = run_sweep_full(cfg)
    emit_csv(outputs.rows, outdir / "sweep.csv")
    emit_svg_plot(outputs.rows, outdir / "sweep.svg")
    for method, model in outputs.estimated_models.items():
        (outdir / f"acceptance_{method}.txt").write_text(
            model.serialize(), encoding="utf-8"
        )
    count_lines = ["method,index,accepts,trials"]
    for method, counts in outputs.phase1_counts.items():
        for idx, (acc, tri) in counts.items():
            count_lines.append(f"{method},{idx},{acc},{tri}")
    (outdir / "acceptance_counts.csv").write_text(
        "\n".join(count_lines) + "\n", encoding="utf-8"
    )
    (outdir / "metadata.json").write_text(
        json.dumps(outputs.metadata, indent=1) + "\n", encoding="utf-8"
    )
    from .figures import render_all

    render_all(outputs, outdir)
    print(f"wrote {len(outputs.rows)} rows to {outdir / 'sweep.csv'}")
    return 0


def _cmd_exactness(args) -> int:
    cfg = _load_config(args.config)
    report = exactness_suite(cfg, trials=args.trials)
    print("method,strategy,tv,trials")
    for cell in report.cells:
        print(f"{cell.method},{cell.strategy},{cell.tv!r},{cell.trials}")
    print(f"# max TV = {report.max_tv!r}")
    if args.fail_above is not None and report.max_tv >= args.fail_above:
        print(f"# FAIL: max TV >= {args.fail_above}", file=sys.stderr)
        return 1
    return 0


def _cmd_tree(args) -> int:
    model = _load_acceptance(args.acceptance)
    scored = optimal_tree(model, args.k)
    sys.stdout.write(scored.tree.serialize())
    print(f"# score {scored.score!r}")
    return 0


def _cmd_bounds(args) -> int:
    model = _load_acceptance(args.acceptance)
    alphabet = args.alphabet if args.alphabet is not None else len(model.a)
    report = bound_report(
        model,
        args.k,
        alphabet,
        kl_bits=args.kl,
        epsilon=args.epsilon,
        grs_constant=args.grs_c,
    )
    print(f"k {report.k}")
    print(f"alphabet {alphabet}")
    print(f"h_r_bits {report.h_r_bits!r}")
    print(f"tunstall_bound {report.tunstall!r}")
    print(f"tunstall_bound_tight {report.tunstall_tight!r}")
    if report.lemma_m is not None:
        print(f"lemma_m_bound {report.lemma_m!r}")
        print(f"m_star {report.m_star}")
        print(f"d {report.d}")
    if report.kl_lower is not None:
        print(f"kl_lower {report.kl_lower!r}")
        print(f"grs_upper {report.grs_upper!r} (epsilon {report.epsilon}, C {report.grs_constant})")
        print(f"pfr_upper {report.pfr_upper!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsim",
        description="Speculative-decoding simulation lab over Markov sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run the strategy sweep and write artifacts")
    p_sweep.add_argument("--config", required=True, help="experiment config JSON")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_exact = sub.add_parser("exactness", help="compare output law to autoregressive enumeration")
    p_exact.add_argument("--config", required=True)
    p_exact.add_argument("--trials", type=int, default=200_000)
    p_exact.add_argument("--fail-above", type=float, default=None)
    p_exact.set_defaults(fn=_cmd_exactness)

    p_tree = sub.add_parser("tree", help="print the optimal drafting tree")
    p_tree.add_argument("--acceptance", required=True, help="acceptance model file")
    p_tree.add_argument("--k", type=int, required=True)
    p_tree.set_defaults(fn=_cmd_tree)

    p_bounds = sub.add_parser("bounds", help="print bound arithmetic for a model")
    p_bounds.add_argument("--acceptance", required=True)
    p_bounds.add_argument("--k", type=int, required=True)
    p_bounds.add_argument("--epsilon", type=float, default=0.1)
    p_bounds.add_argument("--grs-c", type=float, default=DEFAULT_GRS_CONSTANT)
    p_bounds.add_argument("--kl", type=float, default=None,
                          help="KL divergence in bits for the entropy sandwich")
    p_bounds.add_argument("--alphabet", type=int, default=None,
                          help="alphabet size (defaults to the model length)")
    p_bounds.set_defaults(fn=_cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SpecSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
