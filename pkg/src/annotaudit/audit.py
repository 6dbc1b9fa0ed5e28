"""Pair contentious records with their nearest neighbors and tabulate label disagreement."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .corpus import Dataset, DuplicateGroup, LabelSchema, write_rows
from .ensemble import ContentiousRecord
from .errors import PairingError
from .search import InvertedIndex, nearest_neighbor

AUGMENTED_COLUMNS = (
    "is_contentious",
    "wrong_count",
    "neighbor_id",
    "neighbor_label",
    "similarity",
    "label_mismatch",
    "duplicate_conflict",
)


@dataclass(frozen=True)
class AuditPair:
    query_id: str
    neighbor_id: str
    similarity: float
    query_label: int
    neighbor_label: int

    @property
    def mismatch(self) -> bool:
        return self.query_label != self.neighbor_label


@dataclass(frozen=True, eq=False)
class InconsistencyMatrix:
    """``counts[similar, contentious]``: rows are the neighbor's label, columns the query's."""

    schema: LabelSchema
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cell(self, similar: str, contentious: str) -> int:
        return int(self.counts[self.schema.index(similar), self.schema.index(contentious)])


@dataclass(frozen=True)
class ConflictReport:
    key: str
    member_ids: tuple[str, ...]
    labels: tuple[int, ...]

    @property
    def key_hash(self) -> str:
        return hashlib.sha1(self.key.encode("utf-8")).hexdigest()[:16]


def build_pairs(
    contentious: Sequence[ContentiousRecord], index: InvertedIndex, d: Dataset
) -> tuple[list[AuditPair], list[str]]:
    """One pair per contentious record with a positive-similarity neighbor; the rest are unmatched."""
    pairs: list[AuditPair] = []
    unmatched: list[str] = []
    for c in contentious:
        if c.id not in index.ordinal_of or c.id not in d:
            raise PairingError(f"contentious record {c.id!r} missing from index")
    for c in sorted(contentious, key=lambda c: d.ordinal(c.id)):
        hit = nearest_neighbor(index, c.id)
        if hit is None:
            unmatched.append(c.id)
            continue
        nid, sim = hit
        pairs.append(AuditPair(c.id, nid, sim, d.get(c.id).label, d.get(nid).label))
    return pairs, unmatched


def build_matrix(pairs: Sequence[AuditPair], schema: LabelSchema) -> InconsistencyMatrix:
    n = len(schema)
    counts = np.zeros((n, n), dtype=np.int64)
    for p in pairs:
        if not (0 <= p.query_label < n and 0 <= p.neighbor_label < n):
            raise PairingError(f"pair ({p.query_id}, {p.neighbor_id}) has a label outside the schema")
        counts[p.neighbor_label, p.query_label] += 1
    return InconsistencyMatrix(schema, counts)


def duplicate_label_conflicts(groups: Sequence[DuplicateGroup]) -> list[ConflictReport]:
    """Groups whose members disagree, with distinct labels in ascending schema order."""
    return [ConflictReport(g.key, g.member_ids, tuple(sorted(set(g.labels)))) for g in groups if g.conflict]


def write_pairs(path: str | Path, pairs: Sequence[AuditPair], schema: LabelSchema) -> None:
    names = schema.names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query_id", "neighbor_id", "similarity", "query_label", "neighbor_label", "mismatch"])
        for p in pairs:
            w.writerow([
                p.query_id, p.neighbor_id, f"{p.similarity:.9f}",
                names[p.query_label], names[p.neighbor_label], "true" if p.mismatch else "false",
            ])


def write_matrix(path: str | Path, m: InconsistencyMatrix) -> None:
    names = m.schema.names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["similar\\contentious", *names])
        for i, name in enumerate(names):
            w.writerow([name, *m.counts[i].tolist()])


def read_matrix(path: str | Path) -> InconsistencyMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = tuple(rows[0][1:])
    if [r[0] for r in rows[1:]] != list(names):
        raise PairingError(f"{path}: row labels do not match column labels")
    counts = np.array([[int(x) for x in r[1:]] for r in rows[1:]], dtype=np.int64).reshape(len(names), len(names))
    return InconsistencyMatrix(LabelSchema(names), counts)


def write_duplicates(path: str | Path, conflicts: Sequence[ConflictReport], schema: LabelSchema) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_key_hash", "member_ids", "labels"])
        for c in conflicts:
            w.writerow([c.key_hash, ";".join(c.member_ids), ";".join(schema.names[l] for l in c.labels)])


def export_augmented(
    d: Dataset,
    contentious: Sequence[ContentiousRecord],
    pairs: Sequence[AuditPair],
    conflicts: Sequence[ConflictReport],
    out_path: str | Path,
    format: str | None = None,
) -> Path:
    """Write every input row, in order, with the audit columns appended."""
    format = format or d.source_format
    out_path = Path(out_path)
    by_contentious = {c.id: c for c in contentious}
    by_pair = {p.query_id: p for p in pairs}
    in_conflict = {rid for c in conflicts for rid in c.member_ids}
    jsonl = format == "jsonl"

    cols = d.columns
    if d.raw_rows:
        base_rows: Sequence[dict[str, Any]] = d.raw_rows
        fieldnames = list(d.fieldnames)
    else:
        id_col = cols.id or "id"
        base_rows = [{id_col: r.id, cols.text: r.text, cols.label: d.label_name(r)} for r in d.records]
        fieldnames = [id_col, cols.text, cols.label]
    clash = set(fieldnames) & set(AUGMENTED_COLUMNS)
    if clash:
        raise PairingError(f"input already has audit columns {sorted(clash)}")

    def empty() -> Any:
        return None if jsonl else ""

    rows = []
    for rec, base in zip(d.records, base_rows):
        c = by_contentious.get(rec.id)
        p = by_pair.get(rec.id)
        row = dict(base)
        row["is_contentious"] = c is not None
        row["wrong_count"] = c.wrong_count if c is not None else empty()
        row["neighbor_id"] = p.neighbor_id if p else empty()
        row["neighbor_label"] = d.schema.names[p.neighbor_label] if p else empty()
        if p is None:
            row["similarity"] = empty()
        else:
            row["similarity"] = round(p.similarity, 9) if jsonl else f"{p.similarity:.9f}"
        row["label_mismatch"] = bool(p and p.mismatch)
        row["duplicate_conflict"] = rec.id in in_conflict
        rows.append(row)
    try:
        write_rows(out_path, format, [*fieldnames, *AUGMENTED_COLUMNS], rows)
    except OSError as exc:
        raise PairingError(f"cannot write {str(out_path)!r}: {exc}") from None
    return out_path
