"""Tabular data model: feature tables, CSV ingestion, alignment, and splits.

A FeatureTable is an immutable samples-by-features matrix with sample ids,
per-sample cohort tags, and binary class labels. Missing cells are carried
as an explicit boolean mask (the backing value is NaN so accidental use is
loud, but the mask is authoritative).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

MISSING_SENTINELS = {"", "na"}


class ClassLabel(enum.IntEnum):
    """Binary outcome; MALIGNANT is the positive class for all metrics."""

    BENIGN = 0
    MALIGNANT = 1

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        """Case-insensitive parse over the synonym sets {benign,0} / {malignant,1}."""
        key = str(text).strip().lower()
        if key in ("benign", "0"):
            return cls.BENIGN
        if key in ("malignant", "1"):
            return cls.MALIGNANT
        raise DataError(f"unknown class label {text!r}")

    def __str__(self) -> str:  # noqa: D105
        return "Benign" if self is ClassLabel.BENIGN else "Malignant"


@dataclass(frozen=True)
class ColumnSchema:
    """Names of the non-feature columns in a CSV file; all other columns are features.

    group_column optionally names a patient/grouping tag (several rows may
    share one patient); rows are still treated as independent samples, the
    tag is only carried through for future grouped splitting.
    """

    id_column: str = "id"
    cohort_column: str = "cohort"
    label_column: str = "label"
    group_column: str | None = None


@dataclass(frozen=True)
class FeatureTable:
    sample_ids: tuple[str, ...]
    cohort: tuple[str, ...]
    labels: np.ndarray  # int8, 0=benign / 1=malignant
    feature_names: tuple[str, ...]
    values: np.ndarray  # float64 (n_samples, n_features), NaN where missing
    missing: np.ndarray  # bool, same shape as values
    groups: tuple[str, ...] | None = None  # optional patient/grouping tags

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int8)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        missing = np.asarray(self.missing, dtype=bool)
        n, f = values.shape
        if missing.shape != (n, f):
            raise DataError("missing mask shape does not match values")
        if not (len(self.sample_ids) == len(self.cohort) == labels.shape[0] == n):
            raise DataError("row count mismatch between ids, cohort, labels, and values")
        if len(self.feature_names) != f:
            raise DataError("column count mismatch between feature names and values")
        if len(set(self.sample_ids)) != n:
            raise DataError("duplicate sample id")
        if len(set(self.feature_names)) != f:
            raise DataError("duplicate feature name")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be Benign(0) or Malignant(1)")
        if self.groups is not None and len(self.groups) != n:
            raise DataError("groups length does not match row count")
        values = values.copy()
        values[missing] = np.nan
        for arr in (labels, values, missing):
            arr.flags.writeable = False
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "cohort", tuple(self.cohort))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(self.groups))

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, missing) for one feature column."""
        j = self.feature_index(name)
        return self.values[:, j], self.missing[:, j]

    def select_rows(self, index: Sequence[int] | np.ndarray) -> "FeatureTable":
        index = np.asarray(index, dtype=np.int64)
        return FeatureTable(
            sample_ids=tuple(self.sample_ids[i] for i in index),
            cohort=tuple(self.cohort[i] for i in index),
            labels=self.labels[index],
            feature_names=self.feature_names,
            values=self.values[index],
            missing=self.missing[index],
            groups=tuple(self.groups[i] for i in index) if self.groups else None,
        )

    def select_features(self, names: Iterable[str]) -> "FeatureTable":
        names = list(names)
        cols = [self.feature_index(n) for n in names]
        return FeatureTable(
            sample_ids=self.sample_ids,
            cohort=self.cohort,
            labels=self.labels,
            feature_names=tuple(names),
            values=self.values[:, cols],
            missing=self.missing[:, cols],
            groups=self.groups,
        )

    def with_matrix(self, values: np.ndarray, missing: np.ndarray,
                    feature_names: Sequence[str] | None = None) -> "FeatureTable":
        """Same samples, new feature matrix (used by preprocessing transforms)."""
        return FeatureTable(
            sample_ids=self.sample_ids,
            cohort=self.cohort,
            labels=self.labels,
            feature_names=tuple(feature_names) if feature_names is not None else self.feature_names,
            values=values,
            missing=missing,
            groups=self.groups,
        )

    def class_counts(self) -> tuple[int, int]:
        """(n_benign, n_malignant)."""
        pos = int(self.labels.sum())
        return self.n_samples - pos, pos


@dataclass(frozen=True)
class SplitSpec:
    """Fixed test-set membership; train is the complement."""

    test_sample_ids: frozenset[str]
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "test_sample_ids", frozenset(self.test_sample_ids))


def load_feature_table(path: str | Path, schema: ColumnSchema = ColumnSchema()) -> FeatureTable:
    """Read a UTF-8, comma-separated file with one header row into a FeatureTable.

    Columns named by `schema` supply ids, cohort tags, and labels; every other
    column is a numeric feature. Empty cells, "NA" (any case), and non-numeric
    feature cells become missing marks. Lines starting with '#' are skipped so
    files written by save_feature_table round-trip.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, data = rows[0], rows[1:]
    role_columns = [schema.id_column, schema.cohort_column, schema.label_column]
    if schema.group_column is not None:
        role_columns.append(schema.group_column)
    for col in role_columns:
        if col not in header:
            raise DataError(f"{path}: required column {col!r} not in header")
    id_ix = header.index(schema.id_column)
    cohort_ix = header.index(schema.cohort_column)
    label_ix = header.index(schema.label_column)
    group_ix = header.index(schema.group_column) if schema.group_column else None
    role_ix = {id_ix, cohort_ix, label_ix} | ({group_ix} if group_ix is not None else set())
    feat_ix = [j for j in range(len(header)) if j not in role_ix]
    feature_names = [header[j] for j in feat_ix]

    ids: list[str] = []
    cohorts: list[str] = []
    labels: list[int] = []
    groups: list[str] = []
    values = np.full((len(data), len(feat_ix)), np.nan)
    missing = np.zeros((len(data), len(feat_ix)), dtype=bool)
    for i, row in enumerate(data):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        ids.append(row[id_ix])
        cohorts.append(row[cohort_ix])
        labels.append(int(ClassLabel.parse(row[label_ix])))
        if group_ix is not None:
            groups.append(row[group_ix])
        for k, j in enumerate(feat_ix):
            cell = row[j].strip()
            if cell.lower() in MISSING_SENTINELS:
                missing[i, k] = True
                continue
            try:
                values[i, k] = float(cell)
            except ValueError:
                missing[i, k] = True
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise DataError(f"{path}: duplicate sample id {dupes[0]!r}")
    return FeatureTable(
        sample_ids=tuple(ids),
        cohort=tuple(cohorts),
        labels=np.asarray(labels, dtype=np.int8),
        feature_names=tuple(feature_names),
        values=values,
        missing=missing,
        groups=tuple(groups) if group_ix is not None else None,
    )


def save_feature_table(table: FeatureTable, path: str | Path,
                       schema: ColumnSchema = ColumnSchema()) -> None:
    """Write a table as CSV; float cells use round-trip repr, missing cells are empty.

    Role columns (id, cohort, label, optional group) come first, then the
    feature columns in table order.
    """
    path = Path(path)
    write_groups = table.groups is not None and schema.group_column is not None
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        head = [schema.id_column, schema.cohort_column, schema.label_column]
        if write_groups:
            head.append(schema.group_column)
        writer.writerow(head + list(table.feature_names))
        for i in range(table.n_samples):
            cells = [table.sample_ids[i], table.cohort[i],
                     str(ClassLabel(int(table.labels[i])))]
            if write_groups:
                cells.append(table.groups[i])
            for j in range(table.n_features):
                cells.append("" if table.missing[i, j] else repr(float(table.values[i, j])))
            writer.writerow(cells)


def align_common_samples(a: FeatureTable, b: FeatureTable) -> tuple[FeatureTable, FeatureTable]:
    """Restrict both tables to their shared sample ids, in a's row order.

    Labels must agree per shared id. Disjoint id sets yield two empty tables
    that keep their original columns.
    """
    b_pos = {s: i for i, s in enumerate(b.sample_ids)}
    a_rows = [i for i, s in enumerate(a.sample_ids) if s in b_pos]
    b_rows = [b_pos[a.sample_ids[i]] for i in a_rows]
    for i, j in zip(a_rows, b_rows):
        if a.labels[i] != b.labels[j]:
            raise DataError(f"conflicting labels for shared sample {a.sample_ids[i]!r}")
    return a.select_rows(a_rows), b.select_rows(b_rows)


def partition(table: FeatureTable, spec: SplitSpec) -> tuple[FeatureTable, FeatureTable]:
    """Split into (train, test) by spec membership, preserving row order in each part."""
    unknown = spec.test_sample_ids - set(table.sample_ids)
    if unknown:
        raise DataError(f"test ids not in table: {sorted(unknown)[:5]}")
    test_rows = [i for i, s in enumerate(table.sample_ids) if s in spec.test_sample_ids]
    train_rows = [i for i, s in enumerate(table.sample_ids) if s not in spec.test_sample_ids]
    return table.select_rows(train_rows), table.select_rows(test_rows)
