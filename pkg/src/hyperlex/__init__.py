"""Graph and hypergraph models of free word associations with feature-rich nodes.

The package turns cue-response rows and psycholinguistic norm tables into
pairwise graphs and hypergraphs, aggregates word features over network
contexts, predicts held-out norms with cross-validated regressors,
explains predictions with exact Shapley attributions, and quantifies how
strongly contexts compartmentalize feature values.
"""

from .aggregate import (FeatureMatrix, Strategy, build_feature_matrix,
                        characteristic_cover, characteristic_ego,
                        characteristic_hypergraph, characteristic_non_network,
                        characteristic_partition)
from .community import (Cover, LemonParams, Partition, eva, lemon, lemon_cover,
                        louvain, modularity, quantile_bin_attributes)
from .compartments import (ContextMoments, ExtremesGap, context_moments,
                           ego_contexts, extremes_gap_statistic,
                           hyperedge_contexts, null_shuffle_moments, star_contexts)
from .explain import ShapRecord, ShapSummary, residual_report, shap_summary, shapley_values
from .ingest import (FEATURE_NAMES, DataFormatError, FilteredDataset, Lexicon,
                     LexiconEntry, ResponseRow, ResponseTable, intersect_vocabulary,
                     log_transform_frequency, parse_norms, parse_responses)
from .cli import main
from .pipeline import RunConfig, RunManifest, compare_strategies, run_pipeline
from .regress import (DEFAULT_GRIDS, ModelSpec, PredictionRecord, RegressionMetrics,
                      cross_validate, grid_search, kfold_indices, make_model, r2,
                      rmse, rss, standardize_fit_apply, tss)
from .structures import (Hypergraph, PairwiseGraph, StarEgo, build_hypergraph,
                         build_pairwise, ego_neighborhood)

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES", "DataFormatError", "FilteredDataset", "Lexicon", "LexiconEntry",
    "ResponseRow", "ResponseTable", "intersect_vocabulary", "log_transform_frequency",
    "parse_norms", "parse_responses",
    "Hypergraph", "PairwiseGraph", "StarEgo", "build_hypergraph", "build_pairwise",
    "ego_neighborhood",
    "Cover", "LemonParams", "Partition", "eva", "lemon", "lemon_cover", "louvain",
    "modularity", "quantile_bin_attributes",
    "FeatureMatrix", "Strategy", "build_feature_matrix", "characteristic_cover",
    "characteristic_ego", "characteristic_hypergraph", "characteristic_non_network",
    "characteristic_partition",
    "ModelSpec", "PredictionRecord", "RegressionMetrics", "cross_validate",
    "DEFAULT_GRIDS", "grid_search", "kfold_indices", "make_model", "r2", "rmse",
    "rss", "standardize_fit_apply", "tss",
    "ShapRecord", "ShapSummary", "residual_report", "shap_summary", "shapley_values",
    "ContextMoments", "ExtremesGap", "context_moments", "ego_contexts",
    "extremes_gap_statistic", "hyperedge_contexts", "null_shuffle_moments",
    "star_contexts",
    "RunConfig", "RunManifest", "compare_strategies", "main", "run_pipeline",
    "__version__",
]
