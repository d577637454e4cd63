"""End-to-end orchestration: config in, reports and figures out.

A run flows ingest -> structures -> communities (when the strategy needs
them) -> aggregation -> grid search with cross-validation -> Shapley
explanation -> compartmentalization, and finishes with a manifest listing
every artifact, input digests, stage timings, and captured warnings.

All randomness is funneled through three named seeds (split, model, null),
so two runs with identical config produce byte-identical metrics JSON and
prediction CSVs.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import compartments as comp
from . import community as comm
from . import explain
from . import figures
from . import regress
from . import structures as net
from .ingest import FEATURE_NAMES, intersect_vocabulary, parse_norms, parse_responses

log = logging.getLogger(__name__)

OUT_DIR_ENV = "HYPERLEX_OUT_DIR"

FAMILY_CHOICES = regress.MODEL_FAMILIES + ("all",)


@dataclass
class RunConfig:
    responses_path: str
    norms_paths: tuple[str, ...]
    construction: str = "r123"
    strategy: str = "ego"
    gap: bool = False
    target: str = "concreteness"
    family: str = "all"
    k_folds: int = 10
    alpha: float = 0.8
    gamma: float = 1.0
    lemon_max_size: int = 4
    dedup: bool = False
    split_seed: int = 7
    model_seed: int = 11
    null_seed: int = 23
    out_dir: str = "hyperlex_out"
    partition_file: str | None = None
    cover_file: str | None = None
    grid_file: str | None = None
    nested_cv: bool = False
    include_aggregated_target: bool = False
    background_size: int = 100
    shap_instances: int = 200
    n_permutations: int = 50
    compartment_features: tuple[str, ...] = ()
    scatter_x: str = "valence"
    scatter_y: str = "semantic_size"
    export_structures: bool = False
    make_figures: bool = True

    def __post_init__(self) -> None:
        if isinstance(self.norms_paths, (str, Path)):
            self.norms_paths = (str(self.norms_paths),)
        self.norms_paths = tuple(str(p) for p in self.norms_paths)
        self.construction = self.construction.strip().lower()
        self.strategy = self.strategy.strip().lower()
        self.family = self.family.strip().lower().replace("-", "_")
        if self.construction not in net.PAIRWISE_STRATEGIES:
            raise ValueError(f"construction must be one of {net.PAIRWISE_STRATEGIES}")
        if self.strategy not in agg.STRATEGY_KINDS:
            raise ValueError(f"strategy must be one of {agg.STRATEGY_KINDS}")
        if self.family not in FAMILY_CHOICES:
            raise ValueError(f"family must be one of {FAMILY_CHOICES}")
        if self.target not in FEATURE_NAMES:
            raise ValueError(f"target must be one of {FEATURE_NAMES}")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not self.compartment_features:
            self.compartment_features = (self.target,)
        for feature in self.compartment_features:
            if feature not in FEATURE_NAMES:
                raise ValueError(f"unknown compartment feature {feature!r}")
        for feature in (self.scatter_x, self.scatter_y):
            if feature not in FEATURE_NAMES:
                raise ValueError(f"unknown scatter feature {feature!r}")

    @property
    def families(self) -> tuple[str, ...]:
        if self.family == "all":
            return regress.MODEL_FAMILIES
        return (self.family,)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["norms_paths"] = list(self.norms_paths)
        data["compartment_features"] = list(self.compartment_features)
        return data


@dataclass
class RunManifest:
    config: dict
    input_digests: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    complete: bool = False
    note: str = ""

    def write(self, path: Path) -> None:
        payload = {
            "config": self.config,
            "input_digests": self.input_digests,
            "timings": self.timings,
            "artifacts": sorted(self.artifacts),
            "warnings": self.warnings,
            "complete": self.complete,
            "note": self.note,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


class _WarningCollector(logging.Handler):
    def __init__(self, sink: list[str]):
        super().__init__(level=logging.WARNING)
        self.sink = sink

    def emit(self, record: logging.LogRecord) -> None:
        self.sink.append(self.format(record))


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config_file(path: str | Path) -> dict:
    """key = value lines; '#' comments; commas split list values."""
    list_keys = {"norms_paths", "compartment_features"}
    bool_keys = {"gap", "dedup", "nested_cv", "include_aggregated_target",
                 "export_structures", "make_figures"}
    int_keys = {"k_folds", "lemon_max_size", "split_seed", "model_seed", "null_seed",
                "background_size", "shap_instances", "n_permutations"}
    float_keys = {"alpha", "gamma"}
    known_keys = {f.name for f in fields(RunConfig)}
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            value = value.strip()
            if key not in known_keys:
                raise ValueError(f"{path}:{lineno}: unknown config key '{key}'")
            if key in bool_keys:
                values[key] = value.lower() in ("1", "true", "yes", "on")
            elif key in int_keys:
                values[key] = int(value)
            elif key in float_keys:
                values[key] = float(value)
            elif key in list_keys:
                values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            else:
                values[key] = value
    return values


def resolve_out_dir(flag_value: str | None, config_value: str | None) -> str:
    """Precedence: CLI flag, then environment, then config file, then default."""
    if flag_value:
        return flag_value
    env_value = os.environ.get(OUT_DIR_ENV)
    if env_value:
        return env_value
    if config_value:
        return config_value
    return "hyperlex_out"


def _load_grid(config: RunConfig, family: str):
    if config.grid_file is None:
        return None
    with open(config.grid_file, encoding="utf-8") as fh:
        grids = json.load(fh)
    grid = grids.get(family)
    if grid is None:
        return None
    return {k: list(v) for k, v in grid.items()}


def _ingest(config: RunConfig):
    responses = parse_responses(config.responses_path)
    lexicon = parse_norms(config.norms_paths)
    return intersect_vocabulary(responses, lexicon)


def _build_context_structure(config: RunConfig, dataset, graph, hypergraph):
    """The structure object the aggregation strategy consumes."""
    kind = config.strategy
    if kind == "non-network":
        return None
    if kind == "ego":
        return graph
    if kind == "hypergraph":
        return hypergraph
    if kind in ("louvain", "eva"):
        if config.partition_file:
            log.info("importing partition from %s", config.partition_file)
            return comm.Partition.from_csv(config.partition_file, method=kind)
        if kind == "louvain":
            return comm.louvain(graph, gamma=config.gamma, seed=config.model_seed)
        bins = comm.quantile_bin_attributes(dataset.lexicon, FEATURE_NAMES)
        return comm.eva(graph, bins, alpha=config.alpha, gamma=config.gamma,
                        seed=config.model_seed)
    if kind == "lemon":
        if config.cover_file:
            log.info("importing cover from %s", config.cover_file)
            return comm.Cover.from_file(config.cover_file)
        params = comm.LemonParams(max_size=config.lemon_max_size)
        return comm.lemon_cover(graph, params)
    raise ValueError(f"unhandled strategy {kind!r}")


def _evaluate_family(config: RunConfig, matrix, family: str):
    grid = _load_grid(config, family)
    if config.nested_cv:
        metrics, records, chosen = regress.nested_cross_validate(
            matrix, family, grid, k=config.k_folds, seed=config.split_seed,
            model_seed=config.model_seed)
        spec = chosen[0]
        leaderboard = []
    else:
        result = regress.grid_search(matrix, family, grid, k=config.k_folds,
                                     seed=config.split_seed, model_seed=config.model_seed)
        metrics, records, spec = result.best_metrics, result.best_records, result.best_spec
        leaderboard = [
            {"spec": dict(s.hyperparameters), "rmse_mean": m.rmse_mean, "r2_mean": m.r2_mean}
            for s, m in result.leaderboard
        ]
    return metrics, records, spec, leaderboard


def _metrics_payload(config: RunConfig, family, spec, metrics, leaderboard, matrix):
    return {
        "strategy": matrix.strategy_tag,
        "target": config.target,
        "family": family,
        "spec": dict(spec.hyperparameters),
        "rmse_mean": metrics.rmse_mean,
        "rmse_se": metrics.rmse_se,
        "rmse_std": metrics.rmse_std,
        "r2_mean": metrics.r2_mean,
        "r2_se": metrics.r2_se,
        "r2_std": metrics.r2_std,
        "per_fold": [{"rmse": r, "r2": q} for r, q in metrics.per_fold],
        "k_folds": config.k_folds,
        "seeds": {"split": config.split_seed, "model": config.model_seed,
                  "null": config.null_seed},
        "fallback_words": matrix.fallback_count,
        "nested_cv": config.nested_cv,
        "leaderboard": leaderboard,
    }


def run_pipeline(config: RunConfig) -> RunManifest:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=config.to_dict())
    collector = _WarningCollector(manifest.warnings)
    collector.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root = logging.getLogger("hyperlex")
    root.addHandler(collector)
    manifest_path = out / "manifest.json"

    def emit(path: Path):
        manifest.artifacts.append(str(path.relative_to(out)))

    try:
        t0 = time.perf_counter()
        dataset = _ingest(config)
        manifest.input_digests = dict(dataset.provenance)
        manifest.timings["ingest"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        graph = net.build_pairwise(dataset, config.construction, config.dedup)
        hypergraph = net.build_hypergraph(dataset, config.dedup)
        counts = {
            config.construction: {"nodes": graph.node_count, "edges": graph.edge_count},
            "hypergraph": {"nodes": hypergraph.node_count, "edges": hypergraph.edge_count},
            "vocabulary": dataset.vocabulary_size,
        }
        _write_json(out / "counts.json", counts)
        emit(out / "counts.json")
        if config.export_structures:
            edge_path = out / f"edges_{config.construction}.tsv"
            graph.to_tsv(edge_path)
            emit(edge_path)
            hyper_path = out / "hyperedges.tsv"
            hypergraph.to_tsv(hyper_path)
            emit(hyper_path)
        manifest.timings["structures"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        structure = _build_context_structure(config, dataset, graph, hypergraph)
        if isinstance(structure, comm.Partition):
            part_path = out / f"partition_{config.strategy}.csv"
            structure.to_csv(part_path)
            emit(part_path)
        elif isinstance(structure, comm.Cover):
            cover_path = out / "cover_lemon.tsv"
            structure.to_file(cover_path)
            emit(cover_path)
        manifest.timings["communities"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        strategy = agg.Strategy(kind=config.strategy, gap=config.gap)
        matrix = agg.build_feature_matrix(
            dataset, structure, strategy, config.target,
            include_aggregated_target=config.include_aggregated_target)
        matrix_path = out / f"features_{strategy.tag}.csv"
        matrix.to_csv(matrix_path)
        emit(matrix_path)
        manifest.timings["aggregate"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        results = {}
        for family in config.families:
            metrics, records, spec, leaderboard = _evaluate_family(config, matrix, family)
            results[family] = (metrics, records, spec)
            metrics_path = out / f"metrics_{strategy.tag}_{family}.json"
            _write_json(metrics_path, _metrics_payload(
                config, family, spec, metrics, leaderboard, matrix))
            emit(metrics_path)
            pred_path = out / f"predictions_{strategy.tag}_{family}.csv"
            regress.predictions_to_csv(records, pred_path)
            emit(pred_path)
        manifest.timings["regress"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        best_family = max(results, key=lambda f: (results[f][0].r2_mean,
                                                  -config.families.index(f)))
        best_spec = results[best_family][2]
        summary = explain.shap_summary(
            matrix, best_spec, background_size=config.background_size,
            seed=config.split_seed, instance_cap=config.shap_instances)
        shap_points = out / f"shap_{strategy.tag}_{best_family}.csv"
        summary.to_points_csv(shap_points)
        emit(shap_points)
        shap_rank = out / f"shap_summary_{strategy.tag}_{best_family}.csv"
        summary.to_summary_csv(shap_rank)
        emit(shap_rank)
        manifest.timings["explain"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        ego_ctx = comp.ego_contexts(graph)
        edge_ctx = comp.hyperedge_contexts(hypergraph)
        gaps = {}
        for feature in config.compartment_features:
            ego_moments = comp.context_moments(ego_ctx, dataset.lexicon, feature)
            edge_moments = comp.context_moments(edge_ctx, dataset.lexicon, feature)
            nulls = comp.null_shuffle_moments(
                edge_ctx, dataset.lexicon, feature,
                n_permutations=config.n_permutations, seed=config.null_seed)
            moments_path = out / f"moments_{feature}.csv"
            comp.moments_to_csv(moments_path, "ego", ego_moments)
            comp.moments_to_csv(moments_path, "hyperedge", edge_moments,
                                null_ensemble=nulls[:1], append=True)
            emit(moments_path)
            try:
                gap_stat = comp.extremes_gap_statistic(edge_moments, nulls)
                gaps[feature] = {
                    "statistic": gap_stat.statistic,
                    "z_score": gap_stat.z_score,
                    "empirical": gap_stat.empirical,
                    "null_mean": gap_stat.null_mean,
                    "null_std": gap_stat.null_std,
                    "n_contexts": gap_stat.n_contexts,
                    "n_permutations": gap_stat.n_permutations,
                }
            except ValueError as exc:
                log.warning("extremes gap skipped for %s: %s", feature, exc)
                gaps[feature] = {"error": str(exc)}
            if config.make_figures:
                fig_path = out / f"moments_{feature}.svg"
                figures.save_moments_scatter(fig_path, {
                    "ego (empirical)": ([m.mean for m in ego_moments],
                                        [m.std for m in ego_moments]),
                    "hyperedge (empirical)": ([m.mean for m in edge_moments],
                                              [m.std for m in edge_moments]),
                    "hyperedge (shuffled)": ([m.mean for m in nulls[0]],
                                             [m.std for m in nulls[0]]),
                })
                emit(fig_path)
        _write_json(out / "extremes_gap.json", gaps)
        emit(out / "extremes_gap.json")
        manifest.timings["compartments"] = time.perf_counter() - t0

        if config.make_figures:
            t0 = time.perf_counter()
            lex = dataset.lexicon
            words = lex.words_sorted()
            xs = [lex.value(w, config.scatter_x) for w in words]
            ys = [lex.value(w, config.scatter_y) for w in words]
            cs = [lex.value(w, config.target) for w in words]
            value_fig = out / f"scatter_{config.scatter_x}_{config.scatter_y}.svg"
            figures.save_feature_scatter(
                value_fig, xs, ys, cs, config.scatter_x, config.scatter_y,
                config.target, title=f"{config.target} over the lexicon")
            emit(value_fig)
            _, records, _ = results[best_family]
            triples = explain.residual_report(records, matrix,
                                              config.scatter_x, config.scatter_y)
            resid_fig = out / f"residuals_{config.scatter_x}_{config.scatter_y}.svg"
            figures.save_feature_scatter(
                resid_fig, [t[1] for t in triples], [t[2] for t in triples],
                [t[3] for t in triples], config.scatter_x, config.scatter_y,
                "residual (predicted - true)",
                title=f"{best_family} residuals, {strategy.tag}")
            emit(resid_fig)
            resid_csv = out / f"residuals_{strategy.tag}_{best_family}.csv"
            explain.residual_report_to_csv(triples, config.scatter_x,
                                           config.scatter_y, resid_csv)
            emit(resid_csv)
            manifest.timings["figures"] = time.perf_counter() - t0

        manifest.complete = True
        manifest.note = "ok"
    except Exception as exc:
        manifest.complete = False
        manifest.note = f"aborted: {exc}"
        manifest.write(manifest_path)
        root.removeHandler(collector)
        raise
    manifest.write(manifest_path)
    manifest.artifacts.append("manifest.json")
    root.removeHandler(collector)
    return manifest


def compare_strategies(config: RunConfig, strategies, families=None) -> list[dict]:
    """Metrics for every (strategy, family) pair, plus CSV and markdown tables."""
    strategy_tags = [s.strip().lower() for s in strategies]
    if len(strategy_tags) < 2:
        raise ValueError("need at least 2 strategies to compare")
    families = tuple(families) if families else config.families
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _ingest(config)
    graph = net.build_pairwise(dataset, config.construction, config.dedup)
    hypergraph = net.build_hypergraph(dataset, config.dedup)
    rows = []
    for tag in strategy_tags:
        strategy = agg.Strategy.parse(tag)
        sub = RunConfig(**{**config.to_dict(), "strategy": strategy.kind,
                           "gap": strategy.gap,
                           "compartment_features": tuple(config.compartment_features)})
        structure = _build_context_structure(sub, dataset, graph, hypergraph)
        matrix = agg.build_feature_matrix(dataset, structure, strategy, config.target,
                                          include_aggregated_target=config.include_aggregated_target)
        for family in families:
            metrics, _, spec, _ = _evaluate_family(sub, matrix, family)
            rows.append({
                "strategy": strategy.tag,
                "family": family,
                "rmse_mean": metrics.rmse_mean,
                "rmse_se": metrics.rmse_se,
                "rmse_std": metrics.rmse_std,
                "r2_mean": metrics.r2_mean,
                "r2_se": metrics.r2_se,
                "r2_std": metrics.r2_std,
                "spec": dict(spec.hyperparameters),
            })
            log.info("compare %s/%s: r2=%.4f rmse=%.4f", strategy.tag, family,
                     metrics.r2_mean, metrics.rmse_mean)
    _write_comparison(out, rows, strategy_tags, families, config)
    return rows


def _write_comparison(out: Path, rows, strategy_tags, families, config: RunConfig) -> None:
    import csv as _csv

    csv_path = out / "comparison.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "family", "rmse_mean", "rmse_se", "rmse_std",
                         "r2_mean", "r2_se", "r2_std"])
        for row in rows:
            writer.writerow([row["strategy"], row["family"],
                             repr(row["rmse_mean"]), repr(row["rmse_se"]),
                             repr(row["rmse_std"]), repr(row["r2_mean"]),
                             repr(row["r2_se"]), repr(row["r2_std"])])
    lookup = {(r["strategy"], r["family"]): r for r in rows}
    md_path = out / "comparison.md"
    with open(md_path, "w", encoding="utf-8") as fh:
        fh.write(f"# Strategy comparison: target = {config.target}\n\n")
        fh.write("RMSE / R2 (mean over {} folds, +/- standard error)\n\n".format(config.k_folds))
        fh.write("| family | " + " | ".join(strategy_tags) + " |\n")
        fh.write("|---" * (len(strategy_tags) + 1) + "|\n")
        for family in families:
            cells = []
            for tag in strategy_tags:
                row = lookup.get((tag, family))
                if row is None:
                    cells.append("-")
                else:
                    cells.append(f"{row['rmse_mean']:.2f}+/-{row['rmse_se']:.2f} / "
                                 f"{row['r2_mean']:.2f}+/-{row['r2_se']:.2f}")
            fh.write(f"| {family} | " + " | ".join(cells) + " |\n")
    log.info("wrote %s and %s", csv_path, md_path)
