"""Exact cosine nearest-neighbor retrieval over an inverted index."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Dataset
from .errors import SearchError
from .textproc import SparseVector, TfidfModel, tokenize

# Scores this close to the best are ties; ties go to the lower ordinal.
TIE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class InvertedIndex:
    postings: Mapping[int, tuple[np.ndarray, np.ndarray]]
    vectors: tuple[SparseVector, ...]
    ids: tuple[str, ...]
    ordinal_of: Mapping[str, int]
    norms: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


def build_index_from_vectors(ids: Sequence[str], vectors: Sequence[SparseVector]) -> InvertedIndex:
    if len(ids) != len(vectors):
        raise SearchError("ids and vectors differ in length")
    acc: dict[int, tuple[list[int], list[float]]] = {}
    for ordinal, v in enumerate(vectors):
        for term, w in zip(v.indices.tolist(), v.values.tolist()):
            ords, weights = acc.setdefault(term, ([], []))
            ords.append(ordinal)
            weights.append(w)
    postings = {t: (np.array(o, dtype=np.int64), np.array(w)) for t, (o, w) in acc.items()}
    ordinal_of = {rid: i for i, rid in enumerate(ids)}
    if len(ordinal_of) != len(ids):
        raise SearchError("duplicate ids in index")
    norms = np.array([v.norm() for v in vectors])
    return InvertedIndex(postings, tuple(vectors), tuple(ids), ordinal_of, norms)


def build_index(d: Dataset, tfidf: TfidfModel) -> InvertedIndex:
    if len(d) == 0:
        raise SearchError("cannot index an empty dataset")
    return build_index_from_vectors(d.ids, [tfidf.transform(tokenize(r.text)) for r in d.records])


def cosine_similarity(a: SparseVector, b: SparseVector) -> float:
    """Dot product over shared terms divided by both norms; 0 if either is empty."""
    if not len(a) or not len(b):
        return 0.0
    common, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    if not common.size:
        return 0.0
    num = float(np.dot(a.values[ia], b.values[ib]))
    den = math.sqrt(float(np.dot(a.values, a.values))) * math.sqrt(float(np.dot(b.values, b.values)))
    if den == 0.0:
        return 0.0
    return min(1.0, max(0.0, num / den))


def nearest_neighbor(index: InvertedIndex, query_id: str) -> tuple[str, float] | None:
    """Most similar other record, or ``None`` when nothing scores above zero.

    Dot products accumulate over the query's postings lists only, so
    records sharing no term with the query are never touched.
    """
    try:
        q = index.ordinal_of[query_id]
    except KeyError:
        raise SearchError(f"unknown query id {query_id!r}") from None
    qv = index.vectors[q]
    if not len(qv):
        return None
    scores = np.zeros(len(index.ids))
    for term, qw in zip(qv.indices.tolist(), qv.values.tolist()):
        ords, weights = index.postings[term]
        scores[ords] += qw * weights
    scores[q] = 0.0
    touched = scores > 0.0
    if not touched.any():
        return None
    scores[touched] /= index.norms[q] * index.norms[touched]
    best = float(scores.max())
    winner = int(np.flatnonzero(scores >= best - TIE_EPS)[0])
    return index.ids[winner], min(1.0, float(scores[winner]))


def nearest_neighbors(index: InvertedIndex, query_ids: Iterable[str]) -> dict[str, tuple[str, float] | None]:
    return {qid: nearest_neighbor(index, qid) for qid in query_ids}
