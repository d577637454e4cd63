"""Command-line interface: batch runs of the full pipeline.

Two subcommands:

* run      one strategy end to end, emitting metrics, predictions,
           attributions, moments, figures, and a manifest
* compare  several strategies side by side into one comparison table

Every flag mirrors a config field; `--config file` supplies key = value
defaults that flags override, and the output directory can also come from
the HYPERLEX_OUT_DIR environment variable (flag beats env beats file).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .aggregate import STRATEGY_KINDS
from .ingest import FEATURE_NAMES
from .pipeline import (FAMILY_CHOICES, RunConfig, compare_strategies,
                       load_config_file, resolve_out_dir, run_pipeline)
from .structures import PAIRWISE_STRATEGIES

log = logging.getLogger(__name__)

_CONFIG_KEYS = (
    "responses_path", "norms_paths", "construction", "strategy", "gap", "target",
    "family", "k_folds", "alpha", "gamma", "lemon_max_size", "dedup",
    "split_seed", "model_seed", "null_seed", "partition_file", "cover_file",
    "grid_file", "nested_cv", "include_aggregated_target", "background_size",
    "shap_instances", "n_permutations", "compartment_features", "scatter_x",
    "scatter_y", "export_structures", "make_figures",
)


def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file; flags override it")
    parser.add_argument("--responses", dest="responses_path",
                        help="responses TSV (cue, R1, R2, R3)")
    parser.add_argument("--norms", dest="norms_paths", nargs="+",
                        help="norm CSV files (word + feature columns)")
    parser.add_argument("--construction", choices=PAIRWISE_STRATEGIES,
                        help="pairwise graph construction rule")
    parser.add_argument("--target", choices=FEATURE_NAMES, help="norm to predict")
    parser.add_argument("--k-folds", dest="k_folds", type=int,
                        help="cross-validation folds")
    parser.add_argument("--alpha", type=float, help="attribute weight for eva")
    parser.add_argument("--gamma", type=float, help="modularity resolution")
    parser.add_argument("--lemon-max-size", dest="lemon_max_size", type=int,
                        help="maximum local community size")
    parser.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=None,
                        help="collapse repeated identical response instances")
    parser.add_argument("--split-seed", dest="split_seed", type=int)
    parser.add_argument("--model-seed", dest="model_seed", type=int)
    parser.add_argument("--null-seed", dest="null_seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir", help="output directory "
                        "(or set HYPERLEX_OUT_DIR)")
    parser.add_argument("--partition-file", dest="partition_file",
                        help="import a word,community_id CSV instead of detecting")
    parser.add_argument("--cover-file", dest="cover_file",
                        help="import a seed + members cover file instead of detecting")
    parser.add_argument("--grid-file", dest="grid_file",
                        help="JSON file {family: {param: [values]}} overriding grids")
    parser.add_argument("--nested-cv", dest="nested_cv",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="tune hyperparameters inside each outer fold")
    parser.add_argument("--include-aggregated-target", dest="include_aggregated_target",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="ablation: add the aggregated target as a predictor")
    parser.add_argument("--background-size", dest="background_size", type=int,
                        help="background rows for Shapley attribution")
    parser.add_argument("--shap-instances", dest="shap_instances", type=int,
                        help="cap on test instances to attribute")
    parser.add_argument("--n-permutations", dest="n_permutations", type=int,
                        help="null permutations for compartment analysis")
    parser.add_argument("--compartment-features", dest="compartment_features", nargs="+",
                        help="features for the compartmentalization report")
    parser.add_argument("--scatter-x", dest="scatter_x", choices=FEATURE_NAMES)
    parser.add_argument("--scatter-y", dest="scatter_y", choices=FEATURE_NAMES)
    parser.add_argument("--export-structures", dest="export_structures",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="also write edge and hyperedge lists")
    parser.add_argument("--figures", dest="make_figures",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="emit SVG figures (on by default)")


def _build_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if args.config:
        merged.update(load_config_file(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    merged["out_dir"] = resolve_out_dir(getattr(args, "out_dir", None),
                                        merged.pop("out_dir", None))
    missing = [k for k in ("responses_path", "norms_paths") if not merged.get(k)]
    if missing:
        raise SystemExit(f"missing required inputs: {', '.join(missing)} "
                         f"(flags --responses/--norms or config file keys)")
    return RunConfig(**merged)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperlex",
        description="Predict psycholinguistic norms from free-association "
                    "graph and hypergraph contexts.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one strategy end to end")
    _add_shared_flags(run_p)
    run_p.add_argument("--strategy", choices=STRATEGY_KINDS,
                       help="context aggregation strategy")
    run_p.add_argument("--gap", action=argparse.BooleanOptionalAction, default=None,
                       help="exclude the target word from its own contexts")
    run_p.add_argument("--family", choices=FAMILY_CHOICES,
                       help="model family to fit (or all)")

    cmp_p = sub.add_parser("compare", help="compare strategies side by side")
    _add_shared_flags(cmp_p)
    cmp_p.add_argument("--strategies", nargs="+", required=True,
                       help="strategy tags, e.g. non-network ego hypergraph "
                            "lemon-gap hypergraph-gap")
    cmp_p.add_argument("--families", nargs="+", choices=FAMILY_CHOICES,
                       help="model families to evaluate (default: all)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            config = _build_config(args)
            manifest = run_pipeline(config)
            print(f"run complete: {len(manifest.artifacts)} artifacts in {config.out_dir}")
            for warning in manifest.warnings:
                print(f"  warning: {warning}")
            return 0
        if args.command == "compare":
            config = _build_config(args)
            families = tuple(args.families) if args.families else None
            rows = compare_strategies(config, args.strategies, families)
            print(f"compared {len(rows)} strategy/family pairs; "
                  f"tables in {config.out_dir}")
            return 0
        parser.error(f"unknown command {args.command!r}")
    except SystemExit:
        raise
    except Exception as exc:
        log.error("%s", exc)
        if args.verbose:
            raise
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
