"""End-to-end audit: load, vectorize, cross-validate, vote, search, tabulate, export."""

from __future__ import annotations

import csv
import json
import logging
import platform
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .audit import (
    AuditPair,
    ConflictReport,
    InconsistencyMatrix,
    build_matrix,
    build_pairs,
    duplicate_label_conflicts,
    export_augmented,
    write_duplicates,
    write_matrix,
    write_pairs,
)
from .classifiers import DEFAULT_PARAMS, KINDS, ClassifierSpec, default_roster
from .corpus import FORMATS, ColumnSpec, Dataset, DuplicateGroup, find_duplicate_groups, load_dataset, stratified_kfold
from .ensemble import ContentiousRecord, PredictionTable, cross_val_predict, vote_contentious, write_contentious
from .errors import ConfigError, CorpusError, ReportError
from .search import build_index_from_vectors
from .textproc import TfidfModel, fit_tfidf, tokenize

log = logging.getLogger(__name__)

ARTIFACTS = (
    "contentious.csv",
    "pairs.csv",
    "matrix.csv",
    "duplicates.csv",
    "unmatched.csv",
    "breakdown.csv",
    "tfidf_model.tsv",
    "run.json",
    "summary.md",
)


@dataclass(frozen=True)
class RunConfig:
    input: str | Path | None = None
    format: str = "csv"
    text_col: str = "text"
    label_col: str = "label"
    id_col: str | None = None
    labels: tuple[str, ...] | None = None
    k_folds: int = 5
    classifiers: tuple[ClassifierSpec, ...] = field(default_factory=lambda: tuple(default_roster()))
    min_df: int = 1
    seed: int = 42
    tfidf_scope: str = "global"
    duplicate_mode: str = "exact"
    jobs: int = 1
    out: str | Path | None = None

    def validate(self) -> None:
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if self.tfidf_scope not in ("global", "per_fold"):
            raise ConfigError("tfidf_scope must be 'global' or 'per_fold'")
        if self.duplicate_mode not in ("exact", "retweet_core"):
            raise ConfigError("duplicate_mode must be 'exact' or 'retweet_core'")
        if not self.classifiers:
            raise ConfigError("at least one classifier is required")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @property
    def columns(self) -> ColumnSpec:
        return ColumnSpec(text=self.text_col, label=self.label_col, id=self.id_col)

    def to_json(self) -> dict[str, Any]:
        return {
            "input": None if self.input is None else str(self.input),
            "format": self.format,
            "text_col": self.text_col,
            "label_col": self.label_col,
            "id_col": self.id_col,
            "labels": list(self.labels) if self.labels else None,
            "k_folds": self.k_folds,
            "classifiers": [{"kind": s.kind, "params": dict(s.params)} for s in self.classifiers],
            "min_df": self.min_df,
            "seed": self.seed,
            "tfidf_scope": self.tfidf_scope,
            "duplicate_mode": self.duplicate_mode,
            "jobs": self.jobs,
            "out": None if self.out is None else str(self.out),
        }


_INT_KEYS = {"k_folds", "min_df", "seed", "jobs"}
_STR_KEYS = {"input", "format", "text_col", "label_col", "id_col", "tfidf_scope", "duplicate_mode", "out"}


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def build_config(values: Mapping[str, Any], base: RunConfig | None = None) -> RunConfig:
    """Overlay string-valued settings onto ``base`` (defaults when omitted)."""
    cfg = base or RunConfig()
    updates: dict[str, Any] = {}
    hyper: dict[str, dict[str, str]] = {}
    kinds = None
    for key, value in values.items():
        if value is None:
            continue
        if "." in key:
            kind, param = key.split(".", 1)
            if kind not in KINDS or param not in DEFAULT_PARAMS[kind]:
                raise ConfigError(f"unknown hyperparameter key {key!r}")
            hyper.setdefault(kind, {})[param] = value
        elif key in _INT_KEYS:
            try:
                updates[key] = int(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be an integer, got {value!r}") from None
        elif key in _STR_KEYS:
            updates[key] = str(value) if value != "" else None
        elif key == "classifiers":
            kinds = [k.strip() for k in str(value).split(",") if k.strip()]
        elif key == "labels":
            updates["labels"] = tuple(x.strip() for x in str(value).split(",") if x.strip()) or None
        else:
            raise ConfigError(f"unknown config key {key!r}")
    specs = list(cfg.classifiers) if kinds is None else kinds
    try:
        resolved = []
        for s in specs:
            kind = s.kind if isinstance(s, ClassifierSpec) else s
            params = dict(s.params) if isinstance(s, ClassifierSpec) else {}
            params.update(hyper.get(kind, {}))
            resolved.append(ClassifierSpec(kind, params))
    except Exception as exc:
        raise ConfigError(str(exc)) from None
    updates["classifiers"] = tuple(resolved)
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from None
    values: dict[str, Any] = parse_config_text(text)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


@dataclass(frozen=True)
class Breakdown:
    labels: tuple[str, ...]
    contentious: tuple[int, ...]
    non_contentious: tuple[int, ...]

    def fraction(self, i: int) -> float:
        total = self.contentious[i] + self.non_contentious[i]
        return self.contentious[i] / total if total else 0.0


def class_breakdown(d: Dataset, contentious: Sequence[ContentiousRecord] | Sequence[str]) -> Breakdown:
    ids = {c if isinstance(c, str) else c.id for c in contentious}
    for rid in ids:
        if rid not in d:
            raise CorpusError(f"contentious id {rid!r} not in dataset")
    n = len(d.schema)
    cont = [0] * n
    rest = [0] * n
    for r in d.records:
        if r.id in ids:
            cont[r.label] += 1
        else:
            rest[r.label] += 1
    return Breakdown(d.schema.names, tuple(cont), tuple(rest))


@dataclass(frozen=True, eq=False)
class AuditResult:
    dataset: Dataset
    tfidf: TfidfModel
    table: PredictionTable
    contentious: list[ContentiousRecord]
    pairs: list[AuditPair]
    unmatched: list[str]
    matrix: InconsistencyMatrix
    groups: list[DuplicateGroup]
    conflicts: list[ConflictReport]
    breakdown: Breakdown

    @property
    def flagged(self) -> set[str]:
        """Contentious records whose nearest neighbor carries a different label."""
        return {p.query_id for p in self.pairs if p.mismatch}

    def stats(self) -> dict[str, Any]:
        d = self.dataset
        in_conflict = sum(len(c.member_ids) for c in self.conflicts)
        return {
            "n_records": len(d),
            "labels": list(d.schema.names),
            "class_counts": dict(zip(d.schema.names, d.class_counts)),
            "vocabulary_size": self.tfidf.n_features,
            "n_contentious": len(self.contentious),
            "n_pairs": len(self.pairs),
            "n_unmatched": len(self.unmatched),
            "n_mismatch": sum(p.mismatch for p in self.pairs),
            "n_duplicate_groups": len(self.groups),
            "n_conflict_groups": len(self.conflicts),
            "n_records_in_conflict": in_conflict,
            "conflict_group_rate": len(self.conflicts) / len(self.groups) if self.groups else 0.0,
            "conflict_record_rate": in_conflict / len(d),
        }


def audit_dataset(d: Dataset, cfg: RunConfig) -> AuditResult:
    """Run both audit steps in memory."""
    cfg.validate()
    tfidf = fit_tfidf(d, cfg.min_df)
    folds = stratified_kfold(d, cfg.k_folds, cfg.seed)
    shared = tfidf if cfg.tfidf_scope == "global" else None
    log.info("cross-validating %d classifiers over %d folds", len(cfg.classifiers), cfg.k_folds)
    table = cross_val_predict(d, folds, cfg.classifiers, shared, seed=cfg.seed, min_df=cfg.min_df, n_jobs=cfg.jobs)
    contentious = vote_contentious(d, table)
    index = build_index_from_vectors(d.ids, [tfidf.transform(tokenize(r.text)) for r in d.records])
    pairs, unmatched = build_pairs(contentious, index, d)
    matrix = build_matrix(pairs, d.schema)
    groups = find_duplicate_groups(d, cfg.duplicate_mode)
    conflicts = duplicate_label_conflicts(groups)
    breakdown = class_breakdown(d, contentious)
    return AuditResult(d, tfidf, table, contentious, pairs, unmatched, matrix, groups, conflicts, breakdown)


def write_breakdown(path: Path, b: Breakdown) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "total", "contentious", "non_contentious", "contentious_fraction"])
        for i, name in enumerate(b.labels):
            total = b.contentious[i] + b.non_contentious[i]
            w.writerow([name, total, b.contentious[i], b.non_contentious[i], f"{b.fraction(i):.6f}"])


def versions() -> dict[str, str]:
    return {
        "annotaudit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_run(result: AuditResult, cfg: RunConfig, out_dir: str | Path, extra: Mapping[str, Any] | None = None) -> Path:
    """Write every artifact into a scratch directory, then move it into ``out_dir``."""
    from .report import render_report

    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    d = result.dataset
    tmp = Path(tempfile.mkdtemp(prefix=".audit-", dir=out_dir.parent))
    try:
        write_contentious(tmp / "contentious.csv", d, result.contentious, len(cfg.classifiers))
        write_pairs(tmp / "pairs.csv", result.pairs, d.schema)
        write_matrix(tmp / "matrix.csv", result.matrix)
        write_duplicates(tmp / "duplicates.csv", result.conflicts, d.schema)
        with (tmp / "unmatched.csv").open("w", encoding="utf-8") as fh:
            fh.write("id\n" + "".join(f"{rid}\n" for rid in result.unmatched))
        write_breakdown(tmp / "breakdown.csv", result.breakdown)
        result.tfidf.save(tmp / "tfidf_model.tsv")
        export_augmented(d, result.contentious, result.pairs, result.conflicts, tmp / f"augmented.{d.source_format}")
        run = {
            "config": cfg.to_json(),
            "classifier_ids": list(result.table.classifier_ids),
            "majority_threshold": len(cfg.classifiers) // 2 + 1,
            "seeds": {"folds": cfg.seed, "classifiers": cfg.seed},
            "versions": versions(),
            "stats": result.stats(),
            **(extra or {}),
        }
        (tmp / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (tmp / "summary.md").write_text(render_report(tmp, "md"), encoding="utf-8")
        out_dir.mkdir(exist_ok=True)
        for item in sorted(tmp.iterdir()):
            item.replace(out_dir / item.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return out_dir


def run_audit(cfg: RunConfig) -> Path:
    """Audit ``cfg.input`` and write the run directory ``cfg.out``.

    Nothing is created on disk unless every step succeeds.
    """
    cfg.validate()
    if not cfg.input:
        raise ConfigError("no input file given")
    if not cfg.out:
        raise ConfigError("no output directory given")
    d = load_dataset(cfg.input, cfg.format, cfg.columns, cfg.labels)
    result = audit_dataset(d, cfg)
    return write_run(result, cfg, cfg.out)


def require_artifacts(run_dir: Path, names: Sequence[str]) -> None:
    missing = [n for n in names if not (run_dir / n).is_file()]
    if missing:
        raise ReportError(f"run directory {str(run_dir)!r} is missing {missing}")
