"""Exact Shapley attribution of model predictions to features.

The value of a coalition S is the mean model prediction over background
rows with the features in S taken from the explained instance and the
rest from the background row (interventional value function). With d
features, all 2^d coalitions are enumerated, so attributions satisfy the
efficiency, symmetry, and dummy axioms up to floating-point error.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .regress import ModelSpec, make_model, standardize_fit_apply

log = logging.getLogger(__name__)

MAX_FEATURES = 15


@dataclass
class ShapRecord:
    word: str
    attributions: dict[str, float]
    base_value: float
    prediction: float
    raw_values: dict[str, float] | None = None

    def efficiency_error(self) -> float:
        return abs(self.base_value + sum(self.attributions.values()) - self.prediction)


@dataclass
class ShapSummary:
    feature_order: tuple[str, ...]  # descending mean |attribution|
    mean_abs: dict[str, float]
    records: list[ShapRecord]
    points: dict[str, list[tuple[float, float]]]  # feature -> (raw value, attribution)

    def to_summary_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["feature", "mean_abs_attribution", "rank"])
            for rank, feature in enumerate(self.feature_order, start=1):
                writer.writerow([feature, repr(self.mean_abs[feature]), rank])

    def to_points_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["word", "feature", "feature_value", "attribution"])
            for record in self.records:
                for feature, attribution in record.attributions.items():
                    value = record.raw_values[feature]
                    writer.writerow([record.word, feature, repr(value), repr(attribution)])


def _coalition_values(model, instance: np.ndarray, background: np.ndarray) -> np.ndarray:
    """v(S) for every coalition bitmask, shape (2^d,)."""
    d = len(instance)
    n_coalitions = 1 << d
    n_bg = len(background)
    masks = np.zeros((n_coalitions, d), dtype=bool)
    for mask in range(n_coalitions):
        for i in range(d):
            if mask & (1 << i):
                masks[mask, i] = True
    hybrids = np.where(masks[:, None, :], instance[None, None, :], background[None, :, :])
    predictions = model.predict(hybrids.reshape(n_coalitions * n_bg, d))
    return np.asarray(predictions, dtype=float).reshape(n_coalitions, n_bg).mean(axis=1)


def shapley_values(model, instance, background_rows, feature_names: Sequence[str],
                   word: str = "") -> ShapRecord:
    """Exact interventional Shapley attributions for one instance.

    Feature count is capped at 15 (32768 coalitions); larger models need
    feature subsampling before attribution.
    """
    instance = np.asarray(instance, dtype=float)
    background = np.atleast_2d(np.asarray(background_rows, dtype=float))
    d = len(instance)
    if d != len(feature_names):
        raise ValueError("feature_names must match instance length")
    if d > MAX_FEATURES:
        raise ValueError(
            f"{d} features would need 2^{d} coalitions; subsample features to <= {MAX_FEATURES}"
        )
    if background.shape[1] != d:
        raise ValueError("background width must match instance length")
    values = _coalition_values(model, instance, background)
    fact = [math.factorial(s) for s in range(d + 1)]
    weight_by_size = [fact[s] * fact[d - s - 1] / fact[d] for s in range(d)]
    popcount = [int(m).bit_count() for m in range(1 << d)]
    attributions = {}
    for i in range(d):
        bit = 1 << i
        total = 0.0
        for mask in range(1 << d):
            if mask & bit:
                continue
            total += weight_by_size[popcount[mask]] * (values[mask | bit] - values[mask])
        attributions[feature_names[i]] = total
    full = (1 << d) - 1
    return ShapRecord(
        word=word,
        attributions=attributions,
        base_value=float(values[0]),
        prediction=float(values[full]),
    )


def shap_summary(matrix, spec: ModelSpec, train_fraction: float = 0.8,
                 background_size: int = 100, seed: int = 0,
                 instance_cap: int | None = None) -> ShapSummary:
    """Fit on a train split, attribute every test-row prediction.

    Attribution runs in the standardized feature space the model sees;
    the emitted per-point feature values are the raw ones for readability.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    n = len(matrix.words)
    order = rng.permutation(n)
    n_train = max(1, int(round(train_fraction * n)))
    train_idx, test_idx = order[:n_train], order[n_train:]
    if len(test_idx) == 0:
        raise ValueError("empty test split")
    X_train, X_test, scaler = standardize_fit_apply(matrix.X[train_idx], matrix.X[test_idx])
    model = make_model(spec)
    model.fit(X_train, matrix.y[train_idx])
    take = min(background_size, len(X_train))
    background = X_train[rng.choice(len(X_train), size=take, replace=False)]
    if instance_cap is not None and len(test_idx) > instance_cap:
        keep = rng.choice(len(test_idx), size=instance_cap, replace=False)
        keep.sort()
        test_idx = test_idx[keep]
        X_test = X_test[keep]
    features = list(matrix.predictors)
    records = []
    for row, idx in zip(X_test, test_idx):
        record = shapley_values(model, row, background, features,
                                word=matrix.words[int(idx)])
        record.raw_values = {f: float(matrix.X[int(idx), j]) for j, f in enumerate(features)}
        records.append(record)
    mean_abs = {
        f: float(np.mean([abs(r.attributions[f]) for r in records])) for f in features
    }
    feature_order = tuple(sorted(features, key=lambda f: (-mean_abs[f], f)))
    points = {f: [(r.raw_values[f], r.attributions[f]) for r in records] for f in features}
    return ShapSummary(feature_order=feature_order, mean_abs=mean_abs,
                       records=records, points=points)


def residual_report(records, matrix, feature_x: str, feature_y: str):
    """Per-word (x, y, residual) triples for residual-colored scatter plots.

    Feature values come from the matrix columns (the target column may be
    named too); residuals from the prediction records.
    """
    columns = {name: j for j, name in enumerate(matrix.predictors)}
    def value_of(word_idx: int, feature: str) -> float:
        if feature == matrix.target:
            return float(matrix.y[word_idx])
        if feature not in columns:
            raise KeyError(f"feature {feature!r} not in matrix")
        return float(matrix.X[word_idx, columns[feature]])

    index = {w: i for i, w in enumerate(matrix.words)}
    rows = []
    for record in records:
        if record.word not in index:
            raise KeyError(f"prediction for unknown word {record.word!r}")
        i = index[record.word]
        rows.append((record.word, value_of(i, feature_x), value_of(i, feature_y),
                     record.residual))
    return rows


def residual_report_to_csv(rows, feature_x: str, feature_y: str, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["word", feature_x, feature_y, "residual"])
        for word, x, y, resid in rows:
            writer.writerow([word, repr(x), repr(y), repr(resid)])
