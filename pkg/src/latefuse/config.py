"""Run configuration: INI-style key-value file plus command-line overrides.

Seeds are mandatory; nothing in the pipeline falls back to wall-clock
seeding. Flag overrides (``--set section.key=value``) win over file values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .fuse import FusionRule
from .synth import SynthSpec
from .tables import ColumnSchema

DEFAULTS = {
    "schema": {"id_column": "id", "cohort_column": "cohort", "label_column": "label",
               "group_column": ""},
    "split": {"test_ids_file": "", "test_benign": "20", "test_malignant": "20"},
    "preprocess": {"scale": "true", "per_cohort": "false",
                   "max_missing_fraction": "0.5", "correlation_threshold": "0.95"},
    "univariate": {"alpha": "0.05"},
    "mrcv": {"repeats": "100", "lr_validation_fraction": "0.3",
             "rf_validation_fraction": "0.2", "delta_bic_stop": "2.0",
             "rf_mtry": "5,10,15,20,25,30", "rf_ntree": "100,500,1000,2000",
             "rf_min_leaf": "1", "rf_weighted": "true"},
    "fusion": {"rules": "stouffer,mean,max,product"},
}


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _pairs(text: str) -> tuple[tuple[int, float], ...]:
    """Parse "idx:value,idx:value" lists (planted shifts, correlation blocks)."""
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        left, right = tok.split(":")
        out.append((int(left), float(right)))
    return tuple(out)


@dataclass(frozen=True)
class SynthSettings:
    spec_a: SynthSpec
    spec_b: SynthSpec


@dataclass(frozen=True)
class RunConfig:
    modality_a: Path
    modality_b: Path
    schema: ColumnSchema
    out_dir: Path
    base_seed: int
    test_ids_file: Path | None
    test_benign: int
    test_malignant: int
    scale: bool
    per_cohort: bool
    max_missing_fraction: float
    correlation_threshold: float
    alpha: float
    repeats: int
    lr_validation_fraction: float
    rf_validation_fraction: float
    delta_bic_stop: float
    rf_mtry: tuple[int, ...]
    rf_ntree: tuple[int, ...]
    rf_min_leaf: int
    rf_weighted: bool
    rules: tuple[FusionRule, ...]
    synth: SynthSettings | None = None


def load_config(path: str | Path, overrides: list[str] = ()) -> RunConfig:
    """Read the config file, apply ``section.key=value`` overrides, validate."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    parser.read(path, encoding="utf-8")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        section, option = key.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), option.strip(), value)

    def need(section: str, option: str) -> str:
        if not parser.has_option(section, option):
            raise ConfigError(f"missing required config value [{section}] {option}")
        return parser.get(section, option)

    base_seed = int(need("mrcv", "base_seed"))
    schema = ColumnSchema(
        id_column=parser.get("schema", "id_column"),
        cohort_column=parser.get("schema", "cohort_column"),
        label_column=parser.get("schema", "label_column"),
        group_column=parser.get("schema", "group_column").strip() or None,
    )
    synth = None
    if parser.has_section("synth"):
        seed = int(need("synth", "seed"))
        n_benign = int(need("synth", "n_benign"))
        n_malignant = int(need("synth", "n_malignant"))
        common = parser.getfloat("synth", "common_fraction", fallback=1.0)

        def spec_for(suffix: str) -> SynthSpec:
            return SynthSpec(
                n_benign=parser.getint("synth", f"n_benign_{suffix}", fallback=n_benign),
                n_malignant=parser.getint("synth", f"n_malignant_{suffix}",
                                          fallback=n_malignant),
                n_features=int(need("synth", f"n_features_{suffix}")),
                planted=_pairs(parser.get("synth", f"planted_{suffix}", fallback="")),
                correlation_blocks=_pairs(parser.get("synth", f"blocks_{suffix}",
                                                     fallback="")),
                common_fraction=common,
                seed=seed,
            )

        synth = SynthSettings(spec_a=spec_for("a"), spec_b=spec_for("b"))

    test_ids_file = parser.get("split", "test_ids_file").strip()
    return RunConfig(
        modality_a=Path(need("inputs", "modality_a")),
        modality_b=Path(need("inputs", "modality_b")),
        schema=schema,
        out_dir=Path(need("output", "directory")),
        base_seed=base_seed,
        test_ids_file=Path(test_ids_file) if test_ids_file else None,
        test_benign=parser.getint("split", "test_benign"),
        test_malignant=parser.getint("split", "test_malignant"),
        scale=parser.getboolean("preprocess", "scale"),
        per_cohort=parser.getboolean("preprocess", "per_cohort"),
        max_missing_fraction=parser.getfloat("preprocess", "max_missing_fraction"),
        correlation_threshold=parser.getfloat("preprocess", "correlation_threshold"),
        alpha=parser.getfloat("univariate", "alpha"),
        repeats=parser.getint("mrcv", "repeats"),
        lr_validation_fraction=parser.getfloat("mrcv", "lr_validation_fraction"),
        rf_validation_fraction=parser.getfloat("mrcv", "rf_validation_fraction"),
        delta_bic_stop=parser.getfloat("mrcv", "delta_bic_stop"),
        rf_mtry=_int_list(parser.get("mrcv", "rf_mtry")),
        rf_ntree=_int_list(parser.get("mrcv", "rf_ntree")),
        rf_min_leaf=parser.getint("mrcv", "rf_min_leaf"),
        rf_weighted=parser.getboolean("mrcv", "rf_weighted"),
        rules=tuple(FusionRule.parse(tok) for tok
                    in parser.get("fusion", "rules").split(",") if tok.strip()),
        synth=synth,
    )
