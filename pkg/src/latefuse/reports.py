"""CSV report emission and parsing.

Every emitted CSV starts with a schema version comment line so downstream
tooling can detect format drift; numeric cells use round-trip repr.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .metrics import METRIC_NAMES, MetricsRow, RocCurve
from .mrcv import FeatureRanking, FoldOutcome
from .univariate import ScreenResult

SCHEMA_VERSION = 1

UNIVARIATE_COLUMNS = ("Feature", "Normality benign", "Normality malignant",
                      "Rg effect size", "P-value", "FDR")


def _schema_line(kind: str) -> list[str]:
    return [f"# latefuse-csv v{SCHEMA_VERSION} kind={kind}"]


def _num(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return repr(float(x))


def _render(lines: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    for line in lines:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def univariate_csv(screen: ScreenResult) -> str:
    """Screen report with the published univariate column set, sorted by FDR
    then raw p (flagged rows last). Effect-size orientation is stated in the
    header; per-feature flags become comment lines to keep the column set exact."""
    lines = _schema_line("univariate") + \
        ["# rg orientation: positive = elevated in malignant"]
    for r in screen.rows:
        if r.note:
            lines.append(f"# flagged {r.feature}: {r.note}")
    order = sorted(
        range(len(screen.rows)),
        key=lambda i: (math.isnan(screen.rows[i].fdr),
                       screen.rows[i].fdr if not math.isnan(screen.rows[i].fdr) else 0.0,
                       screen.rows[i].p_value if not math.isnan(screen.rows[i].p_value) else 0.0,
                       screen.rows[i].feature),
    )
    rows = [list(UNIVARIATE_COLUMNS)]
    for i in order:
        r = screen.rows[i]
        rows.append([r.feature, _num(r.normality_p_benign), _num(r.normality_p_malignant),
                     _num(r.rg), _num(r.p_value), _num(r.fdr)])
    return _render(lines, rows)


def folds_csv(outcomes: Sequence[FoldOutcome]) -> str:
    """One row per MRCV repeat."""
    rows = [["repeat_index", "n_train", "n_validation", "bacc_train",
             "bacc_validation", "threshold", "detail", "error"]]
    for out in outcomes:
        if out.lr_selected_order is not None:
            detail = "|".join(out.lr_selected_order)
        elif out.chosen_params is not None:
            detail = f"mtry={out.chosen_params['mtry']};ntree={out.chosen_params['ntree']}"
        else:
            detail = ""
        rows.append([str(out.repeat_index), str(len(out.train_ids)),
                     str(len(out.validation_ids)), _num(out.bacc_train),
                     _num(out.bacc_validation), _num(out.threshold),
                     detail, out.error or ""])
    return _render(_schema_line("mrcv-folds"), rows)


def ranking_csv(ranking: FeatureRanking, selected: Sequence[str] = ()) -> str:
    chosen = set(selected)
    rows = [["rank", "feature", "score", "selected"]]
    for i, (name, score) in enumerate(ranking.entries, start=1):
        rows.append([str(i), name, _num(score), "1" if name in chosen else "0"])
    return _render(_schema_line("feature-ranking"), rows)


def metrics_csv(rows_by_label: Sequence[tuple[str, MetricsRow]]) -> str:
    """Metric rows with the published metric names and order."""
    rows = [["Model", *METRIC_NAMES]]
    for label, row in rows_by_label:
        d = row.as_dict()
        rows.append([label] + [_num(d[name]) for name in METRIC_NAMES])
    return _render(_schema_line("metrics"), rows)


def roc_csv(curve: RocCurve) -> str:
    rows = [["threshold", "fpr", "tpr"]]
    for t, f, tp in zip(curve.thresholds.tolist(), curve.fpr.tolist(), curve.tpr.tolist()):
        rows.append([repr(float(t)), _num(f), _num(tp)])
    return _render(_schema_line("roc"), rows)


def scores_csv(sample_ids: Sequence[str], labels: Sequence[int],
               scores: Sequence[float], threshold: float) -> str:
    """Per-sample scores of one evaluated model, with its decision threshold
    carried in a header line so fusion can consume this file alone."""
    lines = _schema_line("scores") + [f"# threshold={repr(float(threshold))}"]
    rows = [["sample_id", "label", "score"]]
    for sid, label, score in zip(sample_ids, labels, scores):
        rows.append([sid, str(int(label)), _num(float(score))])
    return _render(lines, rows)


def read_scores_csv(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray, float]:
    """Parse a scores CSV back into (ids, labels, scores, threshold)."""
    path = Path(path)
    threshold = None
    ids: list[str] = []
    labels: list[int] = []
    scores: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        header_seen = False
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0].startswith("#"):
                text = row[0].lstrip("# ")
                if text.startswith("threshold="):
                    threshold = float(text.split("=", 1)[1])
                continue
            if not header_seen:
                header_seen = True
                continue
            ids.append(row[0])
            labels.append(int(row[1]))
            scores.append(float(row[2]))
    if threshold is None:
        raise DataError(f"{path}: no threshold header line")
    return ids, np.asarray(labels, dtype=np.int8), np.asarray(scores, dtype=float), threshold


def importance_csv(report) -> str:
    """Permutation importance table: feature, mean accuracy drop, SE, mean/SE."""
    rows = [["feature", "mean_decrease", "std_error", "normalized"]]
    for i, name in enumerate(report.feature_names):
        rows.append([name, _num(float(report.mean_decrease[i])),
                     _num(float(report.std_error[i])),
                     repr(float(report.normalized[i]))])
    return _render(_schema_line("importance"), rows)


def fused_scores_csv(rule: str, sample_ids: Sequence[str], p_a, p_b,
                     fused_p, fused_threshold: float, predictions) -> str:
    lines = _schema_line("fused-scores") + [f"# rule={rule}"]
    rows = [["sample_id", "p_a", "p_b", "fused_p", "fused_threshold", "prediction"]]
    for i, sid in enumerate(sample_ids):
        rows.append([sid, _num(float(p_a[i])), _num(float(p_b[i])),
                     _num(float(fused_p[i])), _num(float(fused_threshold)),
                     str(int(predictions[i]))])
    return _render(lines, rows)


def read_metrics_csv(path: str | Path) -> tuple[list[str], list[tuple[str, list[str]]]]:
    """Return (metric header, [(model label, metric cells)]) without reparsing floats."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0][0] != "Model":
        raise DataError(f"{path} is not a metrics CSV")
    return rows[0][1:], [(r[0], r[1:]) for r in rows[1:]]


def summary_csv(metric_names: Sequence[str],
                columns: Sequence[tuple[str, Sequence[str]]]) -> str:
    """Transpose metric rows into the published table layout (metrics as rows)."""
    rows = [["Metric", *[label for label, _ in columns]]]
    for i, metric in enumerate(metric_names):
        rows.append([metric] + [cells[i] for _, cells in columns])
    return _render(_schema_line("report-summary"), rows)


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
