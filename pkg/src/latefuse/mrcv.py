"""Multiple Random Cross-Validation: repeated stratified splits, per-repeat
model building and threshold estimation, feature-stability ranking, and the
elbow cut that extracts the final feature set.

Repeat r draws all randomness from a stream derived from (base_seed, r), so
a run is a pure function of its inputs regardless of execution order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import forest as rf
from . import logreg as lr
from .errors import ElbowError, LatefuseError, SplitError
from .metrics import best_threshold_bacc, confusion, metrics_from_confusion
from .tables import FeatureTable


@dataclass(frozen=True)
class FoldOutcome:
    repeat_index: int
    train_ids: tuple[str, ...]
    validation_ids: tuple[str, ...]
    bacc_train: float
    bacc_validation: float
    threshold: float
    lr_selected_order: tuple[str, ...] | None = None
    importances: dict[str, float] | None = None
    chosen_params: dict | None = None
    error: str | None = None


@dataclass(frozen=True)
class FeatureRanking:
    """(feature, score) pairs, non-increasing by score, ties lexicographic."""

    entries: tuple[tuple[str, float], ...]

    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def scores(self) -> list[float]:
        return [score for _, score in self.entries]


def stratified_split(table: FeatureTable, validation_fraction: float,
                     seed: int | Sequence[int]) -> tuple[FeatureTable, FeatureTable]:
    """Per-class sampling without replacement into a validation subset.

    Each class contributes round(fraction * n_c) rows (half-up rounding);
    row order of the input is preserved within both outputs.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise SplitError("validation fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    y = table.labels
    val_rows: list[int] = []
    for cls in (0, 1):
        rows = np.flatnonzero(y == cls)
        if rows.size < 2:
            raise SplitError(f"class {cls} has fewer than 2 samples")
        k = int(np.floor(validation_fraction * rows.size + 0.5))
        val_rows.extend(rng.choice(rows, size=k, replace=False).tolist())
    chosen = set(val_rows)
    train = table.select_rows([i for i in range(table.n_samples) if i not in chosen])
    validation = table.select_rows([i for i in range(table.n_samples) if i in chosen])
    return train, validation


def _evaluate_fold(p_train, y_train, p_val, y_val) -> tuple[float, float, float]:
    """Threshold from the training subset, applied to both subsets."""
    threshold, bacc_train = best_threshold_bacc(p_train, y_train)
    bacc_val = metrics_from_confusion(confusion(p_val, y_val, threshold)).balanced_accuracy
    return threshold, bacc_train, bacc_val


def run_mrcv_lr(table: FeatureTable, candidates: Sequence[str], repeats: int = 100,
                validation_fraction: float = 0.3, base_seed: int = 0,
                delta_bic_stop: float = 2.0) -> list[FoldOutcome]:
    """Per repeat: split, forward-select a logistic model on the training
    subset, estimate the threshold there, and record balanced accuracies.

    Failures inside a repeat are recorded on its FoldOutcome instead of
    aborting the run.
    """
    outcomes: list[FoldOutcome] = []
    for r in range(repeats):
        try:
            train, val = stratified_split(table, validation_fraction, [base_seed, r])
            model = lr.forward_select(train, list(candidates), delta_bic_stop)
            threshold, bacc_tr, bacc_val = _evaluate_fold(
                lr.predict_proba(model, train), train.labels,
                lr.predict_proba(model, val), val.labels)
            outcomes.append(FoldOutcome(
                repeat_index=r, train_ids=train.sample_ids, validation_ids=val.sample_ids,
                bacc_train=bacc_tr, bacc_validation=bacc_val, threshold=threshold,
                lr_selected_order=model.selected_order))
        except LatefuseError as exc:
            outcomes.append(FoldOutcome(
                repeat_index=r, train_ids=(), validation_ids=(),
                bacc_train=float("nan"), bacc_validation=float("nan"),
                threshold=float("nan"), error=str(exc)))
    return outcomes


def _grid_seed(base_seed: int, repeat: int, grid_index: int) -> int:
    return int(np.random.SeedSequence([base_seed, repeat, grid_index])
               .generate_state(1, np.uint64)[0])


def run_mrcv_rf(table: FeatureTable, candidates: Sequence[str], repeats: int = 100,
                validation_fraction: float = 0.2,
                grid: Sequence[tuple[int, int]] = ((5, 100),), min_leaf: int = 1,
                base_seed: int = 0, weighted: bool = True) -> list[FoldOutcome]:
    """Per repeat: split, fit one forest per (mtry, ntree) grid point, keep
    the point with the best validation balanced accuracy (first wins ties),
    and record that forest's normalized permutation importances.
    """
    if not grid:
        raise LatefuseError("RF grid must not be empty")
    sub = table.select_features(candidates)
    usable = [(m, t) for m, t in grid if m <= sub.n_features]
    if len(usable) < len(grid):
        warnings.warn("grid points with mtry > n_features were skipped")
    if not usable:
        raise LatefuseError("no usable grid point (all mtry exceed feature count)")
    outcomes: list[FoldOutcome] = []
    for r in range(repeats):
        try:
            train, val = stratified_split(sub, validation_fraction, [base_seed, r])
            best = None
            for gi, (mtry, ntree) in enumerate(usable):
                params = rf.ForestParams(mtry=mtry, ntree=ntree, min_leaf=min_leaf,
                                         seed=_grid_seed(base_seed, r, gi),
                                         weighted=weighted)
                fitted = rf.fit_forest(train, params)
                threshold, bacc_tr, bacc_val = _evaluate_fold(
                    rf.predict_proba(fitted, train), train.labels,
                    rf.predict_proba(fitted, val), val.labels)
                if best is None or bacc_val > best[0]:
                    best = (bacc_val, bacc_tr, threshold, fitted, (mtry, ntree))
            bacc_val, bacc_tr, threshold, fitted, (mtry, ntree) = best
            report = rf.oob_permutation_importance(fitted, train)
            importances = {name: float(v) for name, v
                           in zip(report.feature_names, report.normalized)}
            outcomes.append(FoldOutcome(
                repeat_index=r, train_ids=train.sample_ids, validation_ids=val.sample_ids,
                bacc_train=bacc_tr, bacc_validation=bacc_val, threshold=threshold,
                importances=importances,
                chosen_params={"mtry": mtry, "ntree": ntree}))
        except LatefuseError as exc:
            outcomes.append(FoldOutcome(
                repeat_index=r, train_ids=(), validation_ids=(),
                bacc_train=float("nan"), bacc_validation=float("nan"),
                threshold=float("nan"), error=str(exc)))
    return outcomes


def _ranked(scores: dict[str, float]) -> FeatureRanking:
    entries = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return FeatureRanking(entries=tuple(entries))


def rank_features_lr(outcomes: Sequence[FoldOutcome],
                     features: Sequence[str] | None = None) -> FeatureRanking:
    """Stability score: sum over folds of proportional addition order times
    validation BAcc.

    In a fold that selected m features, the feature added at position i
    contributes ((m - i + 1) / m) * bacc_validation; unselected features
    contribute 0. Flagged folds are skipped.
    """
    scores: dict[str, float] = {f: 0.0 for f in (features or ())}
    for out in outcomes:
        if out.error is not None or out.lr_selected_order is None:
            continue
        m = len(out.lr_selected_order)
        for i, name in enumerate(out.lr_selected_order, start=1):
            scores.setdefault(name, 0.0)
            scores[name] += (m - i + 1) / m * out.bacc_validation
    return _ranked(scores)


def rank_features_rf(outcomes: Sequence[FoldOutcome],
                     features: Sequence[str] | None = None) -> FeatureRanking:
    """Mean normalized importance across repeats (absent-in-repeat counts 0)."""
    scores: dict[str, float] = {f: 0.0 for f in (features or ())}
    n_ok = 0
    for out in outcomes:
        if out.error is not None or out.importances is None:
            continue
        n_ok += 1
        for name, value in out.importances.items():
            scores.setdefault(name, 0.0)
            scores[name] += value
    if n_ok:
        scores = {k: v / n_ok for k, v in scores.items()}
    return _ranked(scores)


def elbow_cut(ranking: FeatureRanking) -> list[str]:
    """Prefix of the ranking up to the elbow of the score curve.

    Each point (k, score_k) is scored by its perpendicular distance to the
    chord between (1, score_1) and (K, score_K); the cut keeps every feature
    strictly before the point of maximum distance, i.e. the shoulder of the
    curve. A strictly linear curve has no interior extremum and returns the
    top feature with a warning; identical scores admit no elbow at all.
    """
    k_total = len(ranking.entries)
    if k_total < 3:
        raise ElbowError("elbow needs at least 3 ranked features")
    s = np.asarray(ranking.scores(), dtype=float)
    if s[0] == s[-1]:
        raise ElbowError("all scores are equal; no elbow exists")
    k = np.arange(1, k_total + 1, dtype=float)
    # |cross product| with the chord direction; the positive normalization
    # shared by all points is irrelevant to the argmax
    dist = np.abs((k_total - 1) * (s - s[0]) - (k - 1) * (s[-1] - s[0]))
    if np.all(dist == 0.0):
        warnings.warn("score curve is exactly linear; returning the top feature")
        return ranking.names()[:1]
    return ranking.names()[: int(np.argmax(dist))]
