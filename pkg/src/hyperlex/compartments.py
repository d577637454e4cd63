"""Within-context feature homogeneity against a label-shuffle null.

Each context (an ego network or a hyperedge) gets a mean and a population
standard deviation for a feature. The null model permutes feature values
across the whole vocabulary, which preserves context sizes and the global
value multiset while destroying any word-to-context alignment.

The extremes-gap statistic asks whether contexts with extreme means are
more internally homogeneous than the null predicts: it is the mean std of
contexts in the top and bottom deciles of context means, empirical minus
the null-ensemble average. Negative values indicate compartmentalization.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ingest import Lexicon
from .structures import Hypergraph, PairwiseGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContextMoments:
    context_id: str
    feature: str
    mean: float
    std: float  # population
    size: int


def ego_contexts(graph: PairwiseGraph) -> list[tuple[str, frozenset[str]]]:
    """One context per node: its neighbors plus itself."""
    return [(f"ego:{node}", frozenset(graph.neighbors(node) | {node}))
            for node in graph.nodes]


def hyperedge_contexts(hypergraph: Hypergraph) -> list[tuple[str, frozenset[str]]]:
    """One context per hyperedge (each hyperedge counted once)."""
    return [(f"edge:{idx}", edge) for idx, edge in enumerate(hypergraph.hyperedges)]


def star_contexts(hypergraph: Hypergraph, node: str) -> list[tuple[str, frozenset[str]]]:
    """The hyperedges of one word's star ego-network."""
    star = hypergraph.star_ego(node)
    return [(f"star:{node}:{i}", edge) for i, edge in enumerate(star.hyperedges)]


def context_moments(contexts: Sequence[tuple[str, Iterable[str]]], lexicon: Lexicon,
                    feature: str, values: dict[str, float] | None = None) -> list[ContextMoments]:
    """Mean and population std of the feature per context; empty contexts skipped.

    An explicit values mapping (word -> value) overrides the lexicon, which
    is how null permutations are evaluated on the identical structure.
    """
    lookup = values if values is not None else None
    moments = []
    skipped = 0
    for context_id, members in contexts:
        members = list(members)
        if not members:
            skipped += 1
            continue
        if lookup is None:
            data = np.array([lexicon.value(w, feature) for w in members])
        else:
            data = np.array([lookup[w] for w in members])
        moments.append(ContextMoments(
            context_id=context_id,
            feature=feature,
            mean=float(data.mean()),
            std=float(data.std()),
            size=len(members),
        ))
    if skipped:
        log.warning("skipped %d empty contexts", skipped)
    return moments


def null_shuffle_moments(contexts, lexicon: Lexicon, feature: str,
                         n_permutations: int = 50, seed: int = 0) -> list[list[ContextMoments]]:
    """Context moments under global feature-value permutations.

    Each permutation relabels which word carries which value; the multiset
    of values and every context's size are untouched. Deterministic per seed.
    """
    if n_permutations < 1:
        raise ValueError("need at least one permutation")
    words = lexicon.words_sorted()
    base = np.array([lexicon.value(w, feature) for w in words])
    rng = np.random.default_rng(seed)
    ensemble = []
    for _ in range(n_permutations):
        shuffled = base[rng.permutation(len(words))]
        mapping = {w: float(v) for w, v in zip(words, shuffled)}
        ensemble.append(context_moments(contexts, lexicon, feature, values=mapping))
    return ensemble


@dataclass
class ExtremesGap:
    statistic: float  # empirical extreme-decile mean std minus null average
    z_score: float
    empirical: float
    null_mean: float
    null_std: float
    n_contexts: int
    n_permutations: int


def _extreme_decile_mean_std(moments: Sequence[ContextMoments]) -> float:
    means = np.array([m.mean for m in moments])
    stds = np.array([m.std for m in moments])
    lo, hi = np.quantile(means, [0.1, 0.9])
    extreme = (means <= lo) | (means >= hi)
    return float(stds[extreme].mean())


def extremes_gap_statistic(empirical: Sequence[ContextMoments],
                           null_ensemble: Sequence[Sequence[ContextMoments]]) -> ExtremesGap:
    """Homogeneity-at-extremes statistic with its z-score against the null."""
    if len(empirical) < 20:
        raise ValueError(f"need >= 20 contexts, got {len(empirical)}")
    if len(null_ensemble) < 10:
        raise ValueError(f"need >= 10 null permutations, got {len(null_ensemble)}")
    observed = _extreme_decile_mean_std(empirical)
    null_values = np.array([_extreme_decile_mean_std(m) for m in null_ensemble])
    null_mean = float(null_values.mean())
    null_std = float(null_values.std(ddof=1))
    statistic = observed - null_mean
    z = statistic / null_std if null_std > 0 else 0.0
    return ExtremesGap(
        statistic=statistic,
        z_score=float(z),
        empirical=observed,
        null_mean=null_mean,
        null_std=null_std,
        n_contexts=len(empirical),
        n_permutations=len(null_ensemble),
    )


def moments_to_csv(path: str | Path, structure: str,
                   empirical: Sequence[ContextMoments],
                   null_ensemble: Sequence[Sequence[ContextMoments]] = (),
                   append: bool = False) -> None:
    """Moments CSV: (structure, context_id, feature, mean, std, size, permutation)."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not append:
            writer.writerow(["structure", "context_id", "feature", "mean", "std",
                             "size", "permutation"])
        for m in empirical:
            writer.writerow([structure, m.context_id, m.feature, repr(m.mean),
                             repr(m.std), m.size, "empirical"])
        for perm_id, moments in enumerate(null_ensemble):
            for m in moments:
                writer.writerow([structure, m.context_id, m.feature, repr(m.mean),
                                 repr(m.std), m.size, perm_id])
