"""Regression models and evaluation for norm prediction.

Four model families: ordinary least squares, random forest, AdaBoost.R2
(both backed by scikit-learn), and a from-scratch linear epsilon-insensitive
SVR trained by deterministic full-batch subgradient descent.

Evaluation follows a fixed recipe: shuffled k-fold split, per-fold
standardization fitted on the training rows only, per-fold RMSE and R2,
then mean with standard error (and standard deviation) over folds.
Grid search reuses the same k-fold evaluation and picks the spec with the
best mean R2, breaking ties by lower mean RMSE and then grid order.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.ensemble import AdaBoostRegressor, RandomForestRegressor
from sklearn.tree import DecisionTreeRegressor

log = logging.getLogger(__name__)

MODEL_FAMILIES = ("linear", "random_forest", "adaboost", "svr")


def rss(y_true, y_pred) -> float:
    """Residual sum of squares."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("rss needs equal-length non-empty vectors")
    return float(np.sum((y_true - y_pred) ** 2))


def rmse(y_true, y_pred) -> float:
    """Root mean squared error: sqrt(RSS / N)."""
    return math.sqrt(rss(y_true, y_pred) / len(np.asarray(y_true)))


def tss(y_true) -> float:
    """Total sum of squares around the mean."""
    y_true = np.asarray(y_true, dtype=float)
    if y_true.size == 0:
        raise ValueError("tss needs a non-empty vector")
    return float(np.sum((y_true - y_true.mean()) ** 2))


def r2(y_true, y_pred) -> float:
    """Coefficient of determination: 1 - RSS/TSS."""
    y_true = np.asarray(y_true, dtype=float)
    if y_true.size < 2:
        raise ValueError("r2 needs at least 2 samples")
    total = tss(y_true)
    if total == 0.0:
        raise ValueError("r2 undefined for constant y_true (TSS = 0)")
    return 1.0 - rss(y_true, y_pred) / total


@dataclass(frozen=True)
class Scaler:
    means: np.ndarray
    scales: np.ndarray

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.scales


def standardize_fit_apply(train_X, test_X):
    """Column z-scores with train statistics; zero-variance columns keep scale 1."""
    train_X = np.asarray(train_X, dtype=float)
    if train_X.size == 0:
        raise ValueError("empty training matrix")
    means = train_X.mean(axis=0)
    scales = train_X.std(axis=0)
    scales = np.where(scales == 0.0, 1.0, scales)
    scaler = Scaler(means=means, scales=scales)
    return scaler.apply(train_X), scaler.apply(test_X), scaler


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparameters: tuple[tuple[str, object], ...] = ()
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in MODEL_FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; use one of {MODEL_FAMILIES}")
        if isinstance(self.hyperparameters, dict):
            object.__setattr__(self, "hyperparameters",
                               tuple(sorted(self.hyperparameters.items())))

    @property
    def params(self) -> dict:
        return dict(self.hyperparameters)

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.hyperparameters)
        return f"{self.family}({inner})"


class LinearModel:
    """Ordinary least squares with an intercept; pseudoinverse fallback."""

    def __init__(self) -> None:
        self.coef_ = None
        self.intercept_ = 0.0

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        design = np.column_stack([X, np.ones(len(X))])
        solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < design.shape[1]:
            log.warning("rank-deficient design (%d < %d): pseudoinverse solution",
                        rank, design.shape[1])
        self.coef_ = solution[:-1]
        self.intercept_ = float(solution[-1])
        return self

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_


class RandomForestModel:
    """Bootstrap ensemble of CART trees; prediction = mean over trees."""

    def __init__(self, n_estimators=100, max_features="sqrt", max_depth=None,
                 min_samples_split=2, min_samples_leaf=1, rng_seed=0):
        self._forest = RandomForestRegressor(
            n_estimators=n_estimators,
            max_features=max_features,
            max_depth=max_depth,
            min_samples_split=min_samples_split,
            min_samples_leaf=min_samples_leaf,
            random_state=rng_seed,
        )

    def fit(self, X, y):
        self._forest.fit(np.asarray(X, dtype=float), np.asarray(y, dtype=float))
        return self

    def predict(self, X) -> np.ndarray:
        return self._forest.predict(np.asarray(X, dtype=float))

    def tree_predictions(self, X) -> np.ndarray:
        """Per-tree predictions, shape (n_trees, n_rows)."""
        X = np.asarray(X, dtype=float)
        return np.stack([tree.predict(X) for tree in self._forest.estimators_])


class AdaBoostR2Model:
    """Sequential reweighted base learners with weighted-median prediction."""

    def __init__(self, n_estimators=50, learning_rate=1.0, base_depth=1, rng_seed=0):
        self._booster = AdaBoostRegressor(
            estimator=DecisionTreeRegressor(max_depth=base_depth),
            n_estimators=n_estimators,
            learning_rate=learning_rate,
            loss="linear",
            random_state=rng_seed,
        )

    def fit(self, X, y):
        self._booster.fit(np.asarray(X, dtype=float), np.asarray(y, dtype=float))
        return self

    def predict(self, X) -> np.ndarray:
        return self._booster.predict(np.asarray(X, dtype=float))

    @property
    def n_rounds(self) -> int:
        return len(self._booster.estimators_)


class SVRModel:
    """Linear epsilon-insensitive SVR by deterministic subgradient descent.

    Objective: ||w||^2 / (2C) + mean_i max(0, |y_i - w.x_i - b| - epsilon).
    Warm-started at the least-squares solution, full-batch steps with a
    decaying rate, best iterate by objective kept. Non-convergence within
    max_iter returns the best iterate with a warning.
    """

    def __init__(self, C=1.0, epsilon=0.1, max_iter=2000, lr=0.05, tol=1e-10, rng_seed=0):
        if C <= 0 or epsilon < 0:
            raise ValueError("need C > 0 and epsilon >= 0")
        self.C = C
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.lr = lr
        self.tol = tol
        self.coef_ = None
        self.intercept_ = 0.0
        self.converged_ = False

    def _objective(self, X, y, w, b) -> float:
        resid = np.abs(X @ w + b - y)
        hinge = np.maximum(0.0, resid - self.epsilon)
        return float(w @ w / (2.0 * self.C) + hinge.mean())

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(y)
        design = np.column_stack([X, np.ones(n)])
        start, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
        w = start[:-1].copy()
        b = float(start[-1])
        best_obj = self._objective(X, y, w, b)
        best_w, best_b = w.copy(), b
        since_improve = 0
        for t in range(self.max_iter):
            resid = X @ w + b - y
            active = np.abs(resid) > self.epsilon
            direction = np.sign(resid) * active
            grad_w = w / self.C + X.T @ direction / n
            grad_b = float(direction.mean())
            step = self.lr / (1.0 + 0.01 * t)
            w -= step * grad_w
            b -= step * grad_b
            obj = self._objective(X, y, w, b)
            if obj < best_obj - self.tol:
                best_obj = obj
                best_w, best_b = w.copy(), b
                since_improve = 0
            else:
                since_improve += 1
                if since_improve >= 200:
                    self.converged_ = True
                    break
        if not self.converged_:
            log.warning("svr hit max_iter=%d; keeping best iterate (objective %.6g)",
                        self.max_iter, best_obj)
        self.coef_ = best_w
        self.intercept_ = best_b
        return self

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_


def make_model(spec: ModelSpec):
    params = spec.params
    if spec.family == "linear":
        return LinearModel()
    if spec.family == "random_forest":
        return RandomForestModel(rng_seed=spec.rng_seed, **params)
    if spec.family == "adaboost":
        return AdaBoostR2Model(rng_seed=spec.rng_seed, **params)
    if spec.family == "svr":
        return SVRModel(rng_seed=spec.rng_seed, **params)
    raise ValueError(f"unknown family {spec.family!r}")


@dataclass
class RegressionMetrics:
    rmse_mean: float
    rmse_se: float
    rmse_std: float
    r2_mean: float
    r2_se: float
    r2_std: float
    per_fold: tuple[tuple[float, float], ...]  # (rmse, r2) per fold

    def to_dict(self) -> dict:
        return {
            "rmse_mean": self.rmse_mean,
            "rmse_se": self.rmse_se,
            "rmse_std": self.rmse_std,
            "r2_mean": self.r2_mean,
            "r2_se": self.r2_se,
            "r2_std": self.r2_std,
            "per_fold": [{"rmse": r, "r2": q} for r, q in self.per_fold],
        }


@dataclass(frozen=True)
class PredictionRecord:
    word: str
    y_true: float
    y_pred: float
    residual: float  # y_pred - y_true
    fold: int


def predictions_to_csv(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["word", "y_true", "y_pred", "residual", "fold"])
        for rec in records:
            writer.writerow([rec.word, repr(rec.y_true), repr(rec.y_pred),
                             repr(rec.residual), rec.fold])


def predictions_from_csv(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(PredictionRecord(
                word=row["word"],
                y_true=float(row["y_true"]),
                y_pred=float(row["y_pred"]),
                residual=float(row["residual"]),
                fold=int(row["fold"]),
            ))
    return records


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffled partition of range(n) into k near-equal folds."""
    if k > n:
        raise ValueError(f"k={k} exceeds {n} samples")
    if k < 2:
        raise ValueError("need k >= 2 folds")
    order = np.random.default_rng(seed).permutation(n)
    return [fold for fold in np.array_split(order, k)]


def cross_validate(matrix, spec: ModelSpec, k: int = 10, seed: int = 0):
    """k-fold evaluation; returns (RegressionMetrics, per-word PredictionRecords).

    Standardization statistics come from each fold's training rows only;
    the target is left in its original units. Every word is predicted
    exactly once, by the fold that held it out.
    """
    X, y, words = matrix.X, matrix.y, matrix.words
    folds = kfold_indices(len(y), k, seed)
    fold_stats = []
    records: list[PredictionRecord] = []
    for fold_id, test_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        X_train, X_test, _ = standardize_fit_apply(X[train_mask], X[test_idx])
        model = make_model(spec)
        model.fit(X_train, y[train_mask])
        y_pred = model.predict(X_test)
        y_test = y[test_idx]
        fold_stats.append((rmse(y_test, y_pred), r2(y_test, y_pred)))
        for idx, pred in zip(test_idx, y_pred):
            records.append(PredictionRecord(
                word=words[int(idx)],
                y_true=float(y[int(idx)]),
                y_pred=float(pred),
                residual=float(pred) - float(y[int(idx)]),
                fold=fold_id,
            ))
    rmses = np.array([s[0] for s in fold_stats])
    r2s = np.array([s[1] for s in fold_stats])
    metrics = RegressionMetrics(
        rmse_mean=float(rmses.mean()),
        rmse_se=float(rmses.std(ddof=1) / math.sqrt(k)),
        rmse_std=float(rmses.std(ddof=1)),
        r2_mean=float(r2s.mean()),
        r2_se=float(r2s.std(ddof=1) / math.sqrt(k)),
        r2_std=float(r2s.std(ddof=1)),
        per_fold=tuple(fold_stats),
    )
    records.sort(key=lambda rec: rec.word)
    return metrics, records


def expand_grid(grid: dict[str, Sequence]) -> list[dict]:
    """Cartesian product of a {param: [values]} grid, in declaration order."""
    if not grid:
        return [{}]
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in product(*(grid[k] for k in keys))]


DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "linear": {},
    "random_forest": {
        "n_estimators": [100, 300],
        "max_features": ["sqrt", None],
        "max_depth": [8, 16, None],
        "min_samples_split": [2, 8],
        "min_samples_leaf": [1, 4],
    },
    "adaboost": {
        "n_estimators": [50, 200],
        "learning_rate": [0.5, 1.0],
        "base_depth": [1, 3],
    },
    "svr": {
        "C": [0.1, 1.0, 10.0],
        "epsilon": [0.01, 0.1],
    },
}


@dataclass
class GridSearchResult:
    best_spec: ModelSpec
    best_metrics: RegressionMetrics
    best_records: list[PredictionRecord]
    leaderboard: list[tuple[ModelSpec, RegressionMetrics]]  # descending r2_mean


def grid_search(matrix, family: str, grid: dict[str, Sequence] | None = None,
                k: int = 10, seed: int = 0, model_seed: int = 0) -> GridSearchResult:
    """Evaluate every spec in the grid by cross_validate and pick the best.

    Selection: max r2_mean, ties broken by lower rmse_mean, then by grid
    order. The full leaderboard is returned sorted by descending r2_mean.
    """
    family = family.strip().lower().replace("-", "_")
    if grid is None:
        grid = DEFAULT_GRIDS[family]
    combos = expand_grid(grid)
    if not combos:
        raise ValueError("empty hyperparameter grid")
    evaluated = []
    best = None
    for order, params in enumerate(combos):
        spec = ModelSpec(family=family, hyperparameters=tuple(params.items()),
                         rng_seed=model_seed)
        metrics, records = cross_validate(matrix, spec, k=k, seed=seed)
        evaluated.append((spec, metrics, records, order))
        key = (-metrics.r2_mean, metrics.rmse_mean, order)
        if best is None or key < best[0]:
            best = (key, spec, metrics, records)
        log.info("grid %d/%d %s: r2=%.4f rmse=%.4f",
                 order + 1, len(combos), spec.describe(), metrics.r2_mean, metrics.rmse_mean)
    leaderboard = sorted(evaluated, key=lambda e: (-e[1].r2_mean, e[1].rmse_mean, e[3]))
    return GridSearchResult(
        best_spec=best[1],
        best_metrics=best[2],
        best_records=best[3],
        leaderboard=[(spec, metrics) for spec, metrics, _, _ in leaderboard],
    )


def nested_cross_validate(matrix, family: str, grid: dict[str, Sequence] | None = None,
                          k: int = 10, inner_k: int = 5, seed: int = 0,
                          model_seed: int = 0):
    """Outer k-fold evaluation with per-fold inner grid search.

    Removes the selection optimism of reusing one CV loop for both tuning
    and reporting; considerably slower, so offered as an opt-in flag.
    """
    family = family.strip().lower().replace("-", "_")
    if grid is None:
        grid = DEFAULT_GRIDS[family]
    X, y, words = matrix.X, matrix.y, matrix.words
    folds = kfold_indices(len(y), k, seed)
    fold_stats = []
    records: list[PredictionRecord] = []
    chosen: list[ModelSpec] = []
    for fold_id, test_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        inner = _MatrixView(X[train_mask], y[train_mask],
                            tuple(np.asarray(words)[train_mask]))
        inner_result = grid_search(inner, family, grid, k=inner_k, seed=seed + 1,
                                   model_seed=model_seed)
        spec = inner_result.best_spec
        chosen.append(spec)
        X_train, X_test, _ = standardize_fit_apply(X[train_mask], X[test_idx])
        model = make_model(spec)
        model.fit(X_train, y[train_mask])
        y_pred = model.predict(X_test)
        y_test = y[test_idx]
        fold_stats.append((rmse(y_test, y_pred), r2(y_test, y_pred)))
        for idx, pred in zip(test_idx, y_pred):
            records.append(PredictionRecord(
                word=words[int(idx)], y_true=float(y[int(idx)]), y_pred=float(pred),
                residual=float(pred) - float(y[int(idx)]), fold=fold_id,
            ))
    rmses = np.array([s[0] for s in fold_stats])
    r2s = np.array([s[1] for s in fold_stats])
    metrics = RegressionMetrics(
        rmse_mean=float(rmses.mean()),
        rmse_se=float(rmses.std(ddof=1) / math.sqrt(k)),
        rmse_std=float(rmses.std(ddof=1)),
        r2_mean=float(r2s.mean()),
        r2_se=float(r2s.std(ddof=1) / math.sqrt(k)),
        r2_std=float(r2s.std(ddof=1)),
        per_fold=tuple(fold_stats),
    )
    records.sort(key=lambda rec: rec.word)
    return metrics, records, chosen


@dataclass
class _MatrixView:
    X: np.ndarray
    y: np.ndarray
    words: tuple[str, ...]
