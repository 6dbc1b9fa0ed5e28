"""Out-of-fold predictions for every ensemble member and majority voting."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import ClassifierSpec, fit_classifier, predict_many
from .corpus import Dataset, FoldAssignment
from .errors import AuditError, EnsembleError
from .textproc import TfidfModel, fit_tfidf_tokens, tokenize

MISSING = -1


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """``predicted[i, c]`` is the label index classifier ``c`` gave record ``record_ids[i]``."""

    classifier_ids: tuple[str, ...]
    record_ids: tuple[str, ...]
    predicted: np.ndarray

    def get(self, record_id: str, classifier: int) -> int:
        return int(self.predicted[self.record_ids.index(record_id), classifier])

    @property
    def complete(self) -> bool:
        return bool(np.all(self.predicted != MISSING))


@dataclass(frozen=True)
class ContentiousRecord:
    id: str
    wrong_count: int
    predictions: tuple[int, ...]


def classifier_ids(specs: Sequence[ClassifierSpec]) -> tuple[str, ...]:
    """Kind names, suffixed ``#2``, ``#3``... when a kind repeats."""
    seen: dict[str, int] = {}
    out = []
    for s in specs:
        seen[s.kind] = seen.get(s.kind, 0) + 1
        out.append(s.kind if seen[s.kind] == 1 else f"{s.kind}#{seen[s.kind]}")
    return tuple(out)


def cross_val_predict(
    d: Dataset,
    folds: FoldAssignment,
    specs: Sequence[ClassifierSpec],
    tfidf: TfidfModel | None,
    seed: int = 0,
    min_df: int = 1,
    n_jobs: int = 1,
) -> PredictionTable:
    """Train each spec on k-1 folds and predict the held-out fold.

    Passing ``tfidf=None`` refits the vector space on each training split
    (``min_df`` applies); otherwise the given model is shared by all folds.
    """
    if not specs:
        raise EnsembleError("at least one classifier spec is required")
    members = folds.members(d)
    if sum(len(m) for m in members) != len(d):
        raise EnsembleError("fold assignment does not cover the dataset")
    tokens = [tokenize(r.text) for r in d.records]
    labels = np.array([r.label for r in d.records], dtype=np.int64)
    n_classes = len(d.schema)
    shared = [tfidf.transform(t) for t in tokens] if tfidf is not None else None

    fold_data = []
    for f, held in enumerate(members):
        held_set = set(held)
        train_idx = [i for i in range(len(d)) if i not in held_set]
        if not train_idx:
            raise EnsembleError(f"fold {f} leaves no training records")
        if shared is not None:
            vecs, n_features = shared, tfidf.n_features
        else:
            try:
                model = fit_tfidf_tokens([tokens[i] for i in train_idx], min_df)
            except AuditError as exc:
                raise EnsembleError(f"fold {f}: {exc}") from None
            vecs, n_features = [model.transform(t) for t in tokens], model.n_features
        present = len(set(labels[train_idx].tolist()))
        for s in specs:
            if present < s.min_classes:
                raise EnsembleError(
                    f"fold {f}: training split has {present} class(es); {s.kind} needs >= {s.min_classes}"
                )
        fold_data.append((held, train_idx, vecs, n_features))

    predicted = np.full((len(d), len(specs)), MISSING, dtype=np.int64)

    def task(f: int, c: int) -> tuple[int, int, np.ndarray]:
        held, train_idx, vecs, n_features = fold_data[f]
        train = [(vecs[i], int(labels[i])) for i in train_idx]
        try:
            model = fit_classifier(specs[c], train, n_classes, n_features, seed=seed + 1000 * f + c)
        except AuditError as exc:
            raise EnsembleError(f"fold {f}, classifier {specs[c].kind}: {exc}") from None
        return f, c, predict_many(model, [vecs[i] for i in held])

    jobs = [(f, c) for f in range(folds.k) for c in range(len(specs)) if fold_data[f][0]]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda fc: task(*fc), jobs))
    else:
        results = [task(f, c) for f, c in jobs]
    for f, c, preds in results:
        predicted[fold_data[f][0], c] = preds
    return PredictionTable(classifier_ids(specs), tuple(d.ids), predicted)


def majority_threshold(n_classifiers: int) -> int:
    return n_classifiers // 2 + 1


def vote_contentious(d: Dataset, table: PredictionTable) -> list[ContentiousRecord]:
    """Records mispredicted by a strict majority of classifiers, in dataset order."""
    if tuple(d.ids) != table.record_ids:
        raise EnsembleError("prediction table does not match the dataset records")
    if not table.complete:
        missing = int(np.argmax(np.any(table.predicted == MISSING, axis=1)))
        raise EnsembleError(f"prediction table incomplete (record {table.record_ids[missing]!r})")
    labels = np.array([r.label for r in d.records], dtype=np.int64)
    wrong = (table.predicted != labels[:, None]).sum(axis=1)
    threshold = majority_threshold(len(table.classifier_ids))
    return [
        ContentiousRecord(rid, int(wrong[i]), tuple(int(p) for p in table.predicted[i]))
        for i, rid in enumerate(table.record_ids)
        if wrong[i] >= threshold
    ]


def write_contentious(
    path: str | Path, d: Dataset, contentious: Sequence[ContentiousRecord], n_classifiers: int
) -> None:
    n = n_classifiers
    names = d.schema.names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "true_label", "wrong_count", *[f"pred_{i + 1}" for i in range(n)]])
        for c in contentious:
            w.writerow([c.id, d.label_name(d.get(c.id)), c.wrong_count, *[names[p] for p in c.predictions]])
