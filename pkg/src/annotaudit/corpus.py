"""Labeled text corpora: loading, writing, stratified folds and duplicate groups."""

from __future__ import annotations

import csv
import json
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import CorpusError

FORMATS = ("csv", "tsv", "jsonl")

MENTION_RE = re.compile(r"\[USER_?\d+\]", re.IGNORECASE)
_RETWEET_PREFIX_RE = re.compile(r"^\s*RT:\s*\[USER_?\d+\]", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class LabelSchema:
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise CorpusError("label schema must be nonempty")
        if len(set(self.names)) != len(self.names):
            raise CorpusError(f"label schema has repeated names: {list(self.names)}")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise CorpusError(f"label {name!r} not in schema {list(self.names)}") from None


@dataclass(frozen=True)
class Record:
    id: str
    text: str
    label: int


@dataclass(frozen=True)
class ColumnSpec:
    text: str = "text"
    label: str = "label"
    id: str | None = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered, immutable corpus.

    ``raw_rows`` keeps each input row exactly as read so exports can
    reproduce the original columns; it is empty for synthesized corpora.
    """

    schema: LabelSchema
    records: tuple[Record, ...]
    columns: ColumnSpec = ColumnSpec()
    source_format: str = "csv"
    fieldnames: tuple[str, ...] = ()
    raw_rows: tuple[Mapping[str, Any], ...] = ()
    _index: dict[str, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        index: dict[str, int] = {}
        for i, rec in enumerate(self.records):
            if rec.id in index:
                raise CorpusError(f"duplicate record id {rec.id!r}")
            if not 0 <= rec.label < len(self.schema):
                raise CorpusError(f"record {rec.id!r} has label index {rec.label} outside schema")
            index[rec.id] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def class_counts(self) -> tuple[int, ...]:
        counts = Counter(r.label for r in self.records)
        return tuple(counts.get(i, 0) for i in range(len(self.schema)))

    def ordinal(self, record_id: str) -> int:
        try:
            return self._index[record_id]
        except KeyError:
            raise CorpusError(f"unknown record id {record_id!r}") from None

    def __contains__(self, record_id: object) -> bool:
        return record_id in self._index

    def get(self, record_id: str) -> Record:
        return self.records[self.ordinal(record_id)]

    def label_name(self, rec: Record) -> str:
        return self.schema.names[rec.label]

    def with_labels(self, labels: Sequence[int]) -> Dataset:
        """Copy with new label indices; raw rows get the label column rewritten."""
        if len(labels) != len(self.records):
            raise CorpusError("label vector length does not match dataset")
        records = tuple(Record(r.id, r.text, int(l)) for r, l in zip(self.records, labels))
        raw = tuple(
            {**row, self.columns.label: self.schema.names[int(l)]}
            for row, l in zip(self.raw_rows, labels)
        )
        return Dataset(self.schema, records, self.columns, self.source_format, self.fieldnames, raw)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: Mapping[str, int]

    def members(self, d: Dataset) -> list[list[int]]:
        """Record ordinals of ``d`` per fold, each list in dataset order."""
        out: list[list[int]] = [[] for _ in range(self.k)]
        for i, rec in enumerate(d.records):
            try:
                out[self.fold_of[rec.id]].append(i)
            except KeyError:
                raise CorpusError(f"record {rec.id!r} has no fold") from None
        return out


@dataclass(frozen=True)
class DuplicateGroup:
    key: str
    member_ids: tuple[str, ...]
    labels: tuple[int, ...]

    @property
    def conflict(self) -> bool:
        return len(set(self.labels)) >= 2


def _read_rows(path: Path, fmt: str) -> tuple[list[str], list[dict[str, Any]]]:
    if fmt in ("csv", "tsv"):
        with path.open(newline="", encoding="utf-8") as fh:
            dialect = "excel" if fmt == "csv" else "excel-tab"
            reader = csv.DictReader(fh, dialect=dialect)
            rows = list(reader)
            return list(reader.fieldnames or []), rows
    rows = []
    fieldnames: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: invalid JSON on line {lineno}: {exc}") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}: line {lineno} is not a JSON object")
            for key in obj:
                if key not in fieldnames:
                    fieldnames.append(key)
            rows.append(obj)
    return fieldnames, rows


def _cell(value: Any) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def load_dataset(
    path: str | Path,
    format: str = "csv",
    columns: ColumnSpec | None = None,
    schema: LabelSchema | Sequence[str] | None = None,
) -> Dataset:
    """Read a labeled corpus.

    Without an explicit ``schema`` the label order is first appearance in
    the file. A missing id column yields ids ``"0", "1", ...`` by row.
    """
    columns = columns or ColumnSpec()
    if format not in FORMATS:
        raise CorpusError(f"unknown format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"cannot read input file {str(path)!r}")
    try:
        fieldnames, rows = _read_rows(path, format)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise CorpusError(f"cannot read input file {str(path)!r}: {exc}") from None
    if not rows:
        raise CorpusError(f"{path}: dataset is empty")
    if columns.id is not None and format != "jsonl" and columns.id not in fieldnames:
        raise CorpusError(f"{path}: id column {columns.id!r} not found")

    if schema is not None and not isinstance(schema, LabelSchema):
        schema = LabelSchema(tuple(schema))
    names: list[str] = list(schema.names) if schema is not None else []
    lookup = {n: i for i, n in enumerate(names)}

    records: list[Record] = []
    seen_ids: set[str] = set()
    for n, row in enumerate(rows, 1):
        text = _cell(row.get(columns.text))
        if text is None:
            raise CorpusError(f"missing text at row {n}")
        label = _cell(row.get(columns.label))
        if label is None or label == "":
            raise CorpusError(f"missing label at row {n}")
        if label not in lookup:
            if schema is not None:
                raise CorpusError(f"label {label!r} at row {n} not in schema {names}")
            lookup[label] = len(names)
            names.append(label)
        if columns.id is None:
            rid = str(n - 1)
        else:
            rid = _cell(row.get(columns.id))
            if rid is None or rid == "":
                raise CorpusError(f"missing id at row {n}")
        if rid in seen_ids:
            raise CorpusError(f"duplicate id {rid!r} at row {n}")
        seen_ids.add(rid)
        records.append(Record(rid, text, lookup[label]))

    return Dataset(
        schema=schema if schema is not None else LabelSchema(tuple(names)),
        records=tuple(records),
        columns=columns,
        source_format=format,
        fieldnames=tuple(fieldnames),
        raw_rows=tuple(rows),
    )


def dataset_from_records(
    items: Iterable[tuple[str, str, str]], schema: Sequence[str] | None = None
) -> Dataset:
    """Build a dataset from ``(id, text, label_name)`` triples."""
    items = list(items)
    names = list(schema) if schema is not None else list(dict.fromkeys(l for _, _, l in items))
    sch = LabelSchema(tuple(names))
    records = tuple(Record(i, t, sch.index(l)) for i, t, l in items)
    cols = ColumnSpec(text="text", label="label", id="id")
    raw = tuple({"id": i, "text": t, "label": l} for i, t, l in items)
    return Dataset(sch, records, cols, "csv", ("id", "text", "label"), raw)


def write_rows(
    path: str | Path, format: str, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]
) -> None:
    path = Path(path)
    if format == "jsonl":
        with path.open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(dict(row), ensure_ascii=False) + "\n")
        return
    dialect = "excel" if format == "csv" else "excel-tab"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), dialect=dialect, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(v) for k, v in row.items()})


def _csv_value(v: Any) -> Any:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return v


def write_dataset(d: Dataset, path: str | Path, format: str | None = None) -> None:
    """Write ``d`` using its original rows (or id/text/label when none exist)."""
    format = format or d.source_format
    if d.raw_rows:
        write_rows(path, format, d.fieldnames, d.raw_rows)
        return
    cols = d.columns
    id_col = cols.id or "id"
    rows = [{id_col: r.id, cols.text: r.text, cols.label: d.label_name(r)} for r in d.records]
    write_rows(path, format, (id_col, cols.text, cols.label), rows)


def stratified_kfold(d: Dataset, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Seeded stratified fold assignment.

    Each class is shuffled with its own draw from one generator and then
    dealt round-robin. The dealing pointer carries over between classes so
    overall fold sizes also stay within one of each other.
    """
    if k < 2:
        raise CorpusError(f"k must be >= 2, got {k}")
    if k > len(d):
        raise CorpusError(f"k={k} exceeds record count {len(d)}")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = defaultdict(list)
    for i, rec in enumerate(d.records):
        by_class[rec.label].append(i)
    fold_of: dict[str, int] = {}
    pointer = 0
    for label in range(len(d.schema)):
        members = by_class.get(label, [])
        for j in rng.permutation(len(members)):
            fold_of[d.records[members[j]].id] = pointer % k
            pointer += 1
    return FoldAssignment(k, fold_of)


def normalize_text(text: str, mode: str = "exact") -> str:
    """Duplicate-matching key: NFC, casefolded, whitespace collapsed.

    ``retweet_core`` additionally drops a leading ``RT:[USER_n]`` and every
    other mention placeholder.
    """
    if mode not in ("exact", "retweet_core"):
        raise CorpusError(f"unknown duplicate mode {mode!r}")
    text = unicodedata.normalize("NFC", text)
    if mode == "retweet_core":
        text = _RETWEET_PREFIX_RE.sub(" ", text, count=1)
        text = MENTION_RE.sub(" ", text)
    return _WS_RE.sub(" ", text.casefold()).strip()


def find_duplicate_groups(d: Dataset, mode: str = "exact") -> list[DuplicateGroup]:
    """Groups of two or more records sharing a normalized text, in order of first member."""
    buckets: dict[str, list[Record]] = {}
    for rec in d.records:
        key = normalize_text(rec.text, mode)
        if key:
            buckets.setdefault(key, []).append(rec)
    return [
        DuplicateGroup(key, tuple(r.id for r in recs), tuple(r.label for r in recs))
        for key, recs in buckets.items()
        if len(recs) >= 2
    ]
