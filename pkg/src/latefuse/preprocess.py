"""Benign-referenced robust scaling, missingness handling, and redundancy pruning.

All operations are pure: they return new FeatureTables and leave inputs
untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PreprocessError
from .tables import ClassLabel, FeatureTable
from .univariate import _midranks


@dataclass(frozen=True)
class RobustScaler:
    """Per-feature median/IQR computed on reference-class rows.

    Quartiles use linear interpolation between order statistics (the type-7
    convention). Features whose IQR is zero, or with fewer than two observed
    reference values, are flagged unusable and dropped by apply_scaler.
    """

    feature_names: tuple[str, ...]
    median: np.ndarray
    iqr: np.ndarray
    unusable: np.ndarray  # bool per feature
    reference: str = "benign"

    def __post_init__(self) -> None:
        for arr in (self.median, self.iqr, self.unusable):
            np.asarray(arr).flags.writeable = False


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric Spearman matrix; `undefined` marks pairs stored as 0 by fiat."""

    feature_names: tuple[str, ...]
    rho: np.ndarray
    undefined: np.ndarray

    def __post_init__(self) -> None:
        self.rho.flags.writeable = False
        self.undefined.flags.writeable = False


def _fit_single_scaler(table: FeatureTable, reference_label: ClassLabel,
                       reference_desc: str) -> RobustScaler:
    ref_rows = table.labels == int(reference_label)
    if not ref_rows.any():
        raise PreprocessError(f"no {reference_label} reference samples ({reference_desc})")
    n_feat = table.n_features
    median = np.full(n_feat, np.nan)
    iqr = np.full(n_feat, np.nan)
    unusable = np.zeros(n_feat, dtype=bool)
    for j in range(n_feat):
        observed = ref_rows & ~table.missing[:, j]
        vals = table.values[observed, j]
        if vals.size < 2:
            unusable[j] = True
            continue
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
        median[j] = med
        iqr[j] = q3 - q1
        if iqr[j] == 0:
            unusable[j] = True
    if unusable.any():
        bad = [table.feature_names[j] for j in np.flatnonzero(unusable)]
        warnings.warn(f"{len(bad)} feature(s) unusable for scaling (zero IQR or "
                      f"too few reference values): {bad[:5]}")
    return RobustScaler(
        feature_names=table.feature_names,
        median=median,
        iqr=iqr,
        unusable=unusable,
        reference=reference_desc,
    )


def fit_robust_scaler(table: FeatureTable,
                      reference_label: ClassLabel = ClassLabel.BENIGN,
                      per_cohort: bool = False) -> RobustScaler | dict[str, RobustScaler]:
    """Median/IQR over reference-class rows; one scaler per cohort when flagged."""
    if not per_cohort:
        return _fit_single_scaler(table, reference_label, f"{reference_label} (all cohorts)")
    scalers: dict[str, RobustScaler] = {}
    for cohort in sorted(set(table.cohort)):
        rows = [i for i, c in enumerate(table.cohort) if c == cohort]
        sub = table.select_rows(rows)
        scalers[cohort] = _fit_single_scaler(sub, reference_label,
                                             f"{reference_label} within {cohort}")
    return scalers


def apply_scaler(scaler: RobustScaler | dict[str, RobustScaler],
                 table: FeatureTable) -> FeatureTable:
    """Transform to (x - median) / IQR; missing cells stay missing.

    Features flagged unusable (in any cohort's scaler) are excluded from the
    output with a warning. A table feature absent from the scaler is an error.
    """
    scalers = scaler if isinstance(scaler, dict) else {None: scaler}
    for s in scalers.values():
        missing_feats = set(table.feature_names) - set(s.feature_names)
        if missing_feats:
            raise PreprocessError(f"scaler does not cover features {sorted(missing_feats)[:5]}")
    drop = set()
    for s in scalers.values():
        pos = {n: j for j, n in enumerate(s.feature_names)}
        drop |= {n for n in table.feature_names if s.unusable[pos[n]]}
    keep = [n for n in table.feature_names if n not in drop]
    if drop:
        warnings.warn(f"excluding {len(drop)} unusable feature(s) from scaled output")
    if not keep:
        raise PreprocessError("no usable features left after scaling")

    out = np.empty((table.n_samples, len(keep)))
    if isinstance(scaler, dict):
        for cohort in set(table.cohort):
            if cohort not in scaler:
                raise PreprocessError(f"no scaler fitted for cohort {cohort!r}")
        row_groups = [(scaler[c], np.array([i for i, rc in enumerate(table.cohort) if rc == c]))
                      for c in sorted(set(table.cohort))]
    else:
        row_groups = [(scaler, np.arange(table.n_samples))]
    col_of = {n: j for j, n in enumerate(table.feature_names)}
    for s, rows in row_groups:
        pos = {n: j for j, n in enumerate(s.feature_names)}
        med = np.array([s.median[pos[n]] for n in keep])
        iqr = np.array([s.iqr[pos[n]] for n in keep])
        cols = [col_of[n] for n in keep]
        out[rows[:, None], np.arange(len(keep))] = (table.values[np.ix_(rows, cols)] - med) / iqr
    missing = table.missing[:, [col_of[n] for n in keep]]
    return table.with_matrix(out, missing, feature_names=keep)


def filter_missingness(table: FeatureTable, max_missing_fraction: float,
                       reference: FeatureTable | None = None) -> FeatureTable:
    """Drop features whose missing fraction exceeds the threshold, impute the rest.

    Imputation uses the per-feature median of observed values in `reference`
    (the training table when transforming held-out data); by default the
    table itself is its own reference.
    """
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise PreprocessError("max_missing_fraction must lie in [0, 1]")
    frac = table.missing.mean(axis=0)
    keep = np.flatnonzero(frac <= max_missing_fraction)
    if keep.size == 0:
        raise PreprocessError("all features exceed the missingness threshold")
    ref = reference if reference is not None else table
    values = table.values[:, keep].copy()
    missing = table.missing[:, keep]
    names = [table.feature_names[j] for j in keep]
    still_missing = np.zeros_like(missing)
    for k, name in enumerate(names):
        holes = missing[:, k]
        if not holes.any():
            continue
        ref_vals, ref_miss = ref.column(name)
        observed = ref_vals[~ref_miss]
        if observed.size == 0:
            still_missing[:, k] = holes  # nothing to impute from
            continue
        values[holes, k] = np.median(observed)
    if still_missing.any():
        warnings.warn("some features had no observed reference values; cells left missing")
    return table.with_matrix(values, still_missing, feature_names=names)


def spearman_matrix(table: FeatureTable) -> CorrelationMatrix:
    """Spearman rho via midranks followed by Pearson correlation of the ranks.

    Pairs are evaluated on pairwise-complete rows. A pair is undefined (and
    stored as 0 with a flag) when either feature is constant on the shared
    rows or fewer than three shared rows exist. The diagonal is exactly 1.
    """
    f = table.n_features
    rho = np.zeros((f, f))
    undefined = np.zeros((f, f), dtype=bool)
    np.fill_diagonal(rho, 1.0)
    if not table.missing.any():
        ranks = np.column_stack([_midranks(table.values[:, j]) for j in range(f)])
        sd = ranks.std(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            full = np.corrcoef(ranks, rowvar=False)
        for i in range(f):
            for j in range(i + 1, f):
                if table.n_samples < 3 or sd[i] == 0 or sd[j] == 0:
                    undefined[i, j] = undefined[j, i] = True
                else:
                    rho[i, j] = rho[j, i] = full[i, j]
        return CorrelationMatrix(tuple(table.feature_names), rho, undefined)

    for i in range(f):
        for j in range(i + 1, f):
            shared = ~table.missing[:, i] & ~table.missing[:, j]
            x = table.values[shared, i]
            y = table.values[shared, j]
            if x.size < 3 or np.all(x == x[0]) or np.all(y == y[0]):
                undefined[i, j] = undefined[j, i] = True
                continue
            rx, ry = _midranks(x), _midranks(y)
            num = float(np.sum((rx - rx.mean()) * (ry - ry.mean())))
            den = float(np.sqrt(np.sum((rx - rx.mean()) ** 2) * np.sum((ry - ry.mean()) ** 2)))
            rho[i, j] = rho[j, i] = num / den
    return CorrelationMatrix(tuple(table.feature_names), rho, undefined)


def drop_correlated(table: FeatureTable, matrix: CorrelationMatrix,
                    threshold: float) -> tuple[FeatureTable, list[str]]:
    """Greedy redundancy pruning.

    While any active pair satisfies |rho| >= threshold, take the pair with
    the largest |rho| (ties by lexicographic pair) and remove whichever
    member has the larger mean absolute correlation to the remaining active
    features; mean ties remove the lexicographically later name. Returns the
    pruned table (original column order) and removal order.
    """
    if not 0.0 < threshold <= 1.0:
        raise PreprocessError("threshold must lie in (0, 1]")
    if tuple(matrix.feature_names) != tuple(table.feature_names):
        raise PreprocessError("correlation matrix does not match table features")
    names = list(table.feature_names)
    absrho = np.abs(matrix.rho).copy()
    np.fill_diagonal(absrho, 0.0)
    active = list(range(len(names)))
    removed: list[str] = []
    while len(active) > 1:
        pairs = [(absrho[i, j], names[i], names[j], i, j)
                 for ai, i in enumerate(active) for j in active[ai + 1:]
                 if absrho[i, j] >= threshold]
        if not pairs:
            break
        pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
        _, _, _, i, j = pairs[0]
        rest = [k for k in active]
        mean_i = absrho[i, [k for k in rest if k != i]].mean()
        mean_j = absrho[j, [k for k in rest if k != j]].mean()
        if mean_i > mean_j:
            victim = i
        elif mean_j > mean_i:
            victim = j
        else:
            victim = max(i, j, key=lambda k: names[k])
        removed.append(names[victim])
        active.remove(victim)
    kept = [names[k] for k in sorted(active)]
    return table.select_features(kept), removed
