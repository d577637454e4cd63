"""Characteristic feature values: a word's features as expressed by its contexts.

A context is a group of words surrounding a target word: its ego network,
its community, the local communities containing it, or the hyperedges of
its star ego-network. The characteristic value of a feature is the mean
over context members (the target itself included, unless the gap variant
is requested), and when several contexts exist their per-context means
are averaged unweighted.

Words without any usable context fall back to their own empirical value;
the feature-matrix builder counts and reports those fallbacks.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .community import Cover, Partition
from .ingest import FEATURE_NAMES, Lexicon
from .structures import Hypergraph, PairwiseGraph

log = logging.getLogger(__name__)

STRATEGY_KINDS = ("non-network", "ego", "louvain", "eva", "lemon", "hypergraph")


@dataclass(frozen=True)
class Strategy:
    kind: str
    gap: bool = False

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; use one of {STRATEGY_KINDS}")
        if self.kind == "non-network" and self.gap:
            # no context exists, so there is nothing to leave a gap in
            object.__setattr__(self, "gap", False)

    @property
    def tag(self) -> str:
        return self.kind + ("-gap" if self.gap else "")

    @classmethod
    def parse(cls, tag: str) -> "Strategy":
        tag = tag.strip().lower()
        if tag.endswith("-gap"):
            return cls(kind=tag[: -len("-gap")], gap=True)
        return cls(kind=tag, gap=False)


def _mean_of_context_means(groups: Iterable[Iterable[str]], lexicon: Lexicon,
                           word: str, feature: str, gap: bool) -> float | None:
    """Unweighted mean of per-group means; None when no group survives."""
    means = []
    for group in groups:
        members = [w for w in group if w != word] if gap else list(group)
        if not members:
            continue
        means.append(sum(lexicon.value(w, feature) for w in members) / len(members))
    if not means:
        return None
    return sum(means) / len(means)


def characteristic_non_network(lexicon: Lexicon, word: str, feature: str) -> float:
    return lexicon.value(word, feature)


def characteristic_ego(graph: PairwiseGraph, lexicon: Lexicon, word: str,
                       feature: str, gap: bool = False) -> float:
    """Mean over neighbors plus the word itself (gap: neighbors only)."""
    if word not in graph:
        raise KeyError(f"word {word!r} not in graph")
    value = _mean_of_context_means([graph.neighbors(word) | {word}], lexicon, word, feature, gap)
    if value is None:
        log.warning("isolated word %r under gap: falling back to own value", word)
        return lexicon.value(word, feature)
    return value


def characteristic_partition(partition: Partition, lexicon: Lexicon, word: str,
                             feature: str, gap: bool = False) -> float:
    """Mean over the word's community; singletons yield the word's own value."""
    if word not in partition.assignment:
        raise KeyError(f"word {word!r} not assigned in partition")
    value = _mean_of_context_means([partition.members(word)], lexicon, word, feature, gap)
    if value is None:
        log.warning("singleton community for %r under gap: own value used", word)
        return lexicon.value(word, feature)
    return value


def characteristic_cover(cover: Cover, lexicon: Lexicon, word: str,
                         feature: str, gap: bool = False) -> float:
    """Per-community means over all communities containing the word, averaged."""
    groups = cover.communities_containing(word)
    value = _mean_of_context_means(groups, lexicon, word, feature, gap)
    if value is None:
        log.warning("no usable cover community for %r: own value used", word)
        return lexicon.value(word, feature)
    return value


def characteristic_hypergraph(hypergraph: Hypergraph, lexicon: Lexicon, word: str,
                              feature: str, gap: bool = False) -> float:
    """Per-hyperedge means over the word's star ego-network, averaged."""
    if word not in hypergraph:
        raise KeyError(f"word {word!r} not in hypergraph")
    star = hypergraph.star_ego(word)
    value = _mean_of_context_means(star.hyperedges, lexicon, word, feature, gap)
    if value is None:
        log.warning("empty star for %r: own value used", word)
        return lexicon.value(word, feature)
    return value


def _context_groups(structure, word: str, kind: str):
    """Context groups of a word, or None when the structure does not know it."""
    if kind == "ego":
        if word not in structure:
            return None
        return [structure.neighbors(word) | {word}]
    if kind in ("louvain", "eva"):
        if word not in structure.assignment:
            return None
        return [structure.members(word)]
    if kind == "lemon":
        groups = structure.communities_containing(word)
        return list(groups) if groups else None
    if kind == "hypergraph":
        if word not in structure:
            return None
        return list(structure.star_ego(word).hyperedges)
    raise ValueError(f"no context extraction for kind {kind!r}")


_EXPECTED_STRUCTURE = {
    "ego": PairwiseGraph,
    "louvain": Partition,
    "eva": Partition,
    "lemon": Cover,
    "hypergraph": Hypergraph,
}


@dataclass
class FeatureMatrix:
    """Word-indexed predictors plus an empirical target column."""

    words: tuple[str, ...]
    predictors: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    target: str
    strategy_tag: str
    fallback_count: int = 0

    def __post_init__(self) -> None:
        if self.X.shape != (len(self.words), len(self.predictors)):
            raise ValueError("predictor matrix shape mismatch")
        if self.y.shape != (len(self.words),):
            raise ValueError("target vector shape mismatch")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ValueError("feature matrix contains non-finite values")

    def __len__(self) -> int:
        return len(self.words)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["word"]
            header += [f"{name}__{self.strategy_tag}" for name in self.predictors]
            header.append(self.target)
            writer.writerow(header)
            for i, word in enumerate(self.words):
                row = [word]
                row += [repr(float(v)) for v in self.X[i]]
                row.append(repr(float(self.y[i])))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "word" or len(header) < 3:
                raise ValueError(f"{path}: malformed feature matrix header")
            target = header[-1]
            predictors, tags = [], set()
            for column in header[1:-1]:
                name, _, tag = column.partition("__")
                predictors.append(name)
                tags.add(tag)
            if len(tags) != 1:
                raise ValueError(f"{path}: inconsistent strategy tags {tags}")
            words, rows, targets = [], [], []
            for record in reader:
                if not record:
                    continue
                words.append(record[0])
                rows.append([float(v) for v in record[1 : len(header) - 1]])
                targets.append(float(record[-1]))
        return cls(
            words=tuple(words),
            predictors=tuple(predictors),
            X=np.array(rows, dtype=float),
            y=np.array(targets, dtype=float),
            target=target,
            strategy_tag=next(iter(tags)),
        )


def build_feature_matrix(dataset, structure, strategy: Strategy, target: str,
                         include_aggregated_target: bool = False) -> FeatureMatrix:
    """Assemble the regression dataset for one strategy and target.

    Predictors are the characteristic values of the non-target features
    (the aggregated target itself leaks the label through the word's own
    value; include_aggregated_target exists for ablation only). The target
    column always carries empirical values. Row order is sorted by word.
    """
    if target not in FEATURE_NAMES:
        raise ValueError(f"unknown target feature {target!r}")
    expected = _EXPECTED_STRUCTURE.get(strategy.kind)
    if expected is not None and not isinstance(structure, expected):
        raise TypeError(
            f"strategy {strategy.tag!r} needs a {expected.__name__}, got {type(structure).__name__}"
        )
    lexicon = dataset.lexicon if hasattr(dataset, "lexicon") else dataset
    words = lexicon.words_sorted()
    predictor_names = [f for f in FEATURE_NAMES if f != target]
    if include_aggregated_target:
        predictor_names.append(target)
    X = np.empty((len(words), len(predictor_names)))
    y = np.empty(len(words))
    fallback_words = 0
    for i, word in enumerate(words):
        y[i] = lexicon.value(word, target)
        if strategy.kind == "non-network":
            for j, feature in enumerate(predictor_names):
                X[i, j] = lexicon.value(word, feature)
            continue
        groups = _context_groups(structure, word, strategy.kind)
        used_fallback = groups is None
        for j, feature in enumerate(predictor_names):
            value = None
            if groups is not None:
                value = _mean_of_context_means(groups, lexicon, word, feature, strategy.gap)
            if value is None:
                used_fallback = True
                value = lexicon.value(word, feature)
            X[i, j] = value
        if used_fallback:
            fallback_words += 1
    if fallback_words:
        log.warning("%d words fell back to their own values under %s",
                    fallback_words, strategy.tag)
    return FeatureMatrix(
        words=words,
        predictors=tuple(predictor_names),
        X=X,
        y=y,
        target=target,
        strategy_tag=strategy.tag,
        fallback_count=fallback_words,
    )
