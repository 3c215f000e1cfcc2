"""Pipeline CLI: deterministic end-to-end runs driven by a config file.

Subcommands: synth, univariate, train, evaluate, fuse, report. Data
artifacts (CSV, SVG, model JSON) go only to the configured output
directory; diagnostics go to stderr. A full run is a pure function of
(config, input files): re-running produces byte-identical artifacts.

Exit codes: 0 success, 2 missing input, 3 empty feature set, 4 model/data
mismatch, 5 empty fusion intersection, 1 any other error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import forest as rf
from . import logreg as lr
from .config import RunConfig, load_config
from .errors import (ConfigError, DataError, LatefuseError, PredictError,
                     PreprocessError)
from .fuse import fuse_modalities
from .metrics import auc, best_threshold_bacc, confusion, metrics_from_confusion, roc_curve
from .mrcv import elbow_cut, rank_features_lr, rank_features_rf, run_mrcv_lr, run_mrcv_rf
from .plots import confusion_svg, elbow_svg, roc_svg
from .preprocess import (apply_scaler, drop_correlated, filter_missingness,
                         fit_robust_scaler, spearman_matrix)
from .reports import (folds_csv, fused_scores_csv, importance_csv, metrics_csv,
                      ranking_csv, read_metrics_csv, read_scores_csv, roc_csv,
                      scores_csv, summary_csv, univariate_csv, write_text)
from .synth import generate_pair
from .tables import (ClassLabel, FeatureTable, SplitSpec, align_common_samples,
                     load_feature_table, partition, save_feature_table)
from .univariate import univariate_screen

EXIT_MISSING_INPUT = 2
EXIT_EMPTY_FEATURES = 3
EXIT_MODEL_MISMATCH = 4
EXIT_EMPTY_FUSION = 5


class PipelineExit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _derive_seed(base: int, *tags) -> int:
    """Stable stream key from the base seed and string tags."""
    parts = [int(base)] + [zlib.crc32(str(t).encode()) for t in tags]
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])


def _require_file(path: Path, role: str) -> Path:
    if not Path(path).exists():
        raise PipelineExit(EXIT_MISSING_INPUT, f"missing {role}: {path}")
    return Path(path)


def _modality_path(cfg: RunConfig, modality: str) -> Path:
    return cfg.modality_a if modality == "a" else cfg.modality_b


def _load_table(cfg: RunConfig, modality: str) -> FeatureTable:
    path = _require_file(_modality_path(cfg, modality), f"modality {modality} table")
    return load_feature_table(path, cfg.schema)


def _preprocess_full(cfg: RunConfig, table: FeatureTable) -> FeatureTable:
    if cfg.scale:
        scaler = fit_robust_scaler(table, ClassLabel.BENIGN, per_cohort=cfg.per_cohort)
        table = apply_scaler(scaler, table)
    return filter_missingness(table, cfg.max_missing_fraction)


def _test_ids(cfg: RunConfig) -> frozenset[str]:
    """Fixed test membership: an explicit id file, or a seeded per-class draw
    from the samples common to both modalities."""
    if cfg.test_ids_file is not None:
        path = _require_file(cfg.test_ids_file, "test id file")
        ids = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()
               if line.strip()]
        return frozenset(ids)
    common_a, _ = align_common_samples(_load_table(cfg, "a"), _load_table(cfg, "b"))
    rng = np.random.default_rng(_derive_seed(cfg.base_seed, "test-split"))
    chosen: list[str] = []
    for cls, k in ((0, cfg.test_benign), (1, cfg.test_malignant)):
        ids = [s for s, y in zip(common_a.sample_ids, common_a.labels) if y == cls]
        if len(ids) < k:
            raise ConfigError(f"only {len(ids)} common class-{cls} samples "
                              f"available for a test draw of {k}")
        chosen.extend(ids[i] for i in rng.choice(len(ids), size=k, replace=False))
    return frozenset(chosen)


@dataclass(frozen=True)
class Prepared:
    full: FeatureTable
    train: FeatureTable
    test: FeatureTable
    removed: tuple[str, ...]


def _prepare(cfg: RunConfig, modality: str) -> Prepared:
    """Load, scale, impute, split, and prune one modality.

    Scaling and imputation run on the full table (internal standardization);
    correlation pruning is computed on the training part only and the test
    part is restricted to the surviving features.
    """
    table = _preprocess_full(cfg, _load_table(cfg, modality))
    spec = SplitSpec(test_sample_ids=_test_ids(cfg), seed=cfg.base_seed)
    train, test = partition(table, spec)
    matrix = spearman_matrix(train)
    pruned, removed = drop_correlated(train, matrix, cfg.correlation_threshold)
    return Prepared(full=table, train=pruned,
                    test=test.select_features(pruned.feature_names),
                    removed=tuple(removed))


def _out(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.out_dir


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_synth(cfg: RunConfig) -> None:
    if cfg.synth is None:
        raise ConfigError("config has no [synth] section")
    table_a, table_b = generate_pair(cfg.synth.spec_a, cfg.synth.spec_b)
    for table, path in ((table_a, cfg.modality_a), (table_b, cfg.modality_b)):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        save_feature_table(table, path, cfg.schema)
        _log(f"wrote {path} ({table.n_samples} samples x {table.n_features} features)")


def cmd_univariate(cfg: RunConfig, modality: str) -> None:
    table = _preprocess_full(cfg, _load_table(cfg, modality))
    screen = univariate_screen(table, cfg.alpha)
    out = _out(cfg) / f"univariate_{modality}.csv"
    write_text(out, univariate_csv(screen))
    _log(f"{screen.n_significant} significant features at FDR<{cfg.alpha} "
         f"({screen.n_up} up, {screen.n_down} down) -> {out}")


def _final_rf_params(cfg: RunConfig, outcomes, selected: list[str],
                     final_seed: int) -> rf.ForestParams:
    """Most frequently chosen grid point across repeats (grid order on ties),
    with mtry clamped to the selected feature count."""
    votes = Counter((o.chosen_params["mtry"], o.chosen_params["ntree"])
                    for o in outcomes if o.chosen_params is not None)
    if not votes:
        raise LatefuseError("no successful MRCV repeat to choose forest parameters from")
    grid_order = {pair: gi for gi, pair
                  in enumerate(itertools.product(cfg.rf_mtry, cfg.rf_ntree))}
    (mtry, ntree), _ = max(votes.items(),
                           key=lambda kv: (kv[1], -grid_order.get(kv[0], 10 ** 9)))
    return rf.ForestParams(mtry=min(mtry, len(selected)), ntree=ntree,
                           min_leaf=cfg.rf_min_leaf, seed=final_seed,
                           weighted=cfg.rf_weighted)


def cmd_train(cfg: RunConfig, modality: str, model: str, workers: int = 1) -> None:
    prep = _prepare(cfg, modality)
    candidates = list(prep.train.feature_names)
    if not candidates:
        raise PipelineExit(EXIT_EMPTY_FEATURES, "no candidate features after preprocessing")
    seed = _derive_seed(cfg.base_seed, modality, model)
    if model == "lr":
        outcomes = run_mrcv_lr(prep.train, candidates, repeats=cfg.repeats,
                               validation_fraction=cfg.lr_validation_fraction,
                               base_seed=seed, delta_bic_stop=cfg.delta_bic_stop)
        ranking = rank_features_lr(outcomes, candidates)
    else:
        grid = list(itertools.product(cfg.rf_mtry, cfg.rf_ntree))
        outcomes = run_mrcv_rf(prep.train, candidates, repeats=cfg.repeats,
                               validation_fraction=cfg.rf_validation_fraction,
                               grid=grid, min_leaf=cfg.rf_min_leaf, base_seed=seed,
                               weighted=cfg.rf_weighted)
        ranking = rank_features_rf(outcomes, candidates)
    selected = elbow_cut(ranking)
    if model == "lr":
        final = lr.fit(prep.train, selected)
        scores = lr.predict_proba(final, prep.train)
        model_doc = lr.to_doc(final)
    else:
        params = _final_rf_params(cfg, outcomes, selected,
                                  _derive_seed(cfg.base_seed, modality, model, "final"))
        train_view = prep.train.select_features(selected)
        final = rf.fit_forest(train_view, params, n_workers=workers)
        scores = rf.predict_proba(final, train_view)
        model_doc = rf.to_doc(final)
    threshold, bacc_train = best_threshold_bacc(scores, prep.train.labels)

    out = _out(cfg)
    if model == "rf":
        report = rf.oob_permutation_importance(final, train_view)
        write_text(out / f"importance_{modality}_rf.csv", importance_csv(report))
    doc = {
        "format": "latefuse-model",
        "version": 1,
        "kind": model,
        "modality": modality,
        "selected_features": selected,
        "threshold": threshold,
        "train_bacc": bacc_train,
        "removed_correlated": list(prep.removed),
        "model": model_doc,
    }
    (out / f"model_{modality}_{model}.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    write_text(out / f"folds_{modality}_{model}.csv", folds_csv(outcomes))
    write_text(out / f"ranking_{modality}_{model}.csv", ranking_csv(ranking, selected))
    write_text(out / f"elbow_{modality}_{model}.svg",
               elbow_svg(ranking, len(selected),
                         title=f"Feature ranking ({modality}/{model})"))
    errors = sum(1 for o in outcomes if o.error is not None)
    _log(f"trained {modality}/{model}: {len(selected)} features selected, "
         f"train BAcc {bacc_train:.3f}, threshold {threshold:.4f}, "
         f"{errors}/{len(outcomes)} repeats flagged")


def _load_model_doc(cfg: RunConfig, modality: str, model: str) -> dict:
    path = _require_file(_out(cfg) / f"model_{modality}_{model}.json",
                         f"model file for {modality}/{model}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format") != "latefuse-model":
        raise LatefuseError(f"{path} is not a model document")
    return doc


def cmd_evaluate(cfg: RunConfig, modality: str, model: str) -> None:
    prep = _prepare(cfg, modality)
    doc = _load_model_doc(cfg, modality, model)
    features = doc["selected_features"]
    try:
        view = prep.test.select_features(features)
        if model == "lr":
            scores = lr.predict_proba(lr.from_doc(doc["model"]), view)
        else:
            scores = rf.predict_proba(rf.from_doc(doc["model"]), view)
    except (DataError, PredictError) as exc:
        raise PipelineExit(EXIT_MODEL_MISMATCH,
                           f"model/data mismatch for {modality}/{model}: {exc}") from None
    threshold = float(doc["threshold"])
    conf = confusion(scores, prep.test.labels, threshold)
    row = metrics_from_confusion(conf).with_auc(auc(scores, prep.test.labels))
    curve = roc_curve(scores, prep.test.labels)
    label = f"{modality}-{model}"
    out = _out(cfg)
    write_text(out / f"metrics_{modality}_{model}.csv", metrics_csv([(label, row)]))
    write_text(out / f"roc_{modality}_{model}.csv", roc_csv(curve))
    write_text(out / f"roc_{modality}_{model}.svg",
               roc_svg(curve, row.auc, title=f"ROC ({label})"))
    write_text(out / f"confusion_{modality}_{model}.svg",
               confusion_svg(conf, title=f"Confusion ({label})"))
    write_text(out / f"scores_{modality}_{model}.csv",
               scores_csv(prep.test.sample_ids, prep.test.labels.tolist(),
                          scores.tolist(), threshold))
    _log(f"evaluated {label}: BAcc {row.balanced_accuracy:.3f}, AUC {row.auc:.3f}")


def cmd_fuse(cfg: RunConfig, model: str) -> None:
    out = _out(cfg)
    ids_a, y_a, p_a, t_a = read_scores_csv(
        _require_file(out / f"scores_a_{model}.csv", "modality a scores"))
    ids_b, y_b, p_b, t_b = read_scores_csv(
        _require_file(out / f"scores_b_{model}.csv", "modality b scores"))
    pos_b = {s: i for i, s in enumerate(ids_b)}
    shared = [i for i, s in enumerate(ids_a) if s in pos_b]
    if not shared:
        raise PipelineExit(EXIT_EMPTY_FUSION, "no common samples between modality outputs")
    ids = [ids_a[i] for i in shared]
    b_rows = [pos_b[s] for s in ids]
    if any(y_a[i] != y_b[j] for i, j in zip(shared, b_rows)):
        raise DataError("conflicting labels between modality score files")
    labels = y_a[shared]
    pa = p_a[shared]
    pb = p_b[b_rows]
    rows = []
    for rule in cfg.rules:
        fused = fuse_modalities(ids, pa, t_a, ids, pb, t_b, rule)
        conf = confusion(fused.fused_probability, labels, fused.fused_threshold)
        row = metrics_from_confusion(conf).with_auc(auc(fused.fused_probability, labels))
        rows.append((f"fused-{rule.value}-{model}", row))
        write_text(out / f"fused_scores_{model}_{rule.value}.csv",
                   fused_scores_csv(rule.value, ids, pa, pb, fused.fused_probability,
                                    fused.fused_threshold, fused.predictions()))
        _log(f"fused {model} under {rule.value}: BAcc {row.balanced_accuracy:.3f}")
    write_text(out / f"metrics_fused_{model}.csv", metrics_csv(rows))


def cmd_report(cfg: RunConfig) -> None:
    """Collect all emitted metric rows into one summary table (metrics as rows)."""
    out = _out(cfg)
    files = sorted(out.glob("metrics_*.csv"))
    if not files:
        raise PipelineExit(EXIT_MISSING_INPUT, f"no metrics CSVs found in {out}")
    columns: list[tuple[str, list[str]]] = []
    header: list[str] = []
    for path in files:
        header, rows = read_metrics_csv(path)
        columns.extend(rows)
    write_text(out / "report_summary.csv", summary_csv(header, columns))
    _log(f"summary over {len(columns)} model column(s) -> {out / 'report_summary.csv'}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latefuse",
        description="Two-modality classifier building and late-fusion pipeline")
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable; flags win)")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker threads for forest fitting (results identical)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", help="generate the configured synthetic modality files")
    p = sub.add_parser("univariate", help="univariate screen of one modality")
    p.add_argument("--modality", choices=("a", "b"), required=True)
    for name in ("train", "evaluate"):
        p = sub.add_parser(name)
        p.add_argument("--modality", choices=("a", "b"), required=True)
        p.add_argument("--model", choices=("lr", "rf"), required=True)
    p = sub.add_parser("fuse", help="fuse the two modalities' evaluated scores")
    p.add_argument("--model", choices=("lr", "rf"), required=True)
    sub.add_parser("report", help="merge emitted metric rows into a summary table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "univariate":
            cmd_univariate(cfg, args.modality)
        elif args.command == "train":
            cmd_train(cfg, args.modality, args.model, workers=args.workers)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.modality, args.model)
        elif args.command == "fuse":
            cmd_fuse(cfg, args.model)
        elif args.command == "report":
            cmd_report(cfg)
    except PipelineExit as exc:
        _log(f"error: {exc}")
        return exc.code
    except PreprocessError as exc:
        _log(f"error: {exc}")
        return EXIT_EMPTY_FEATURES
    except PredictError as exc:
        _log(f"error: {exc}")
        return EXIT_MODEL_MISMATCH
    except (LatefuseError, OSError) as exc:
        _log(f"error: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
