"""Tokenization and the word-level tf-idf vector space.

idf uses the smoothed form ``ln((1 + N) / (1 + df)) + 1``; term frequency
is the raw count and every transformed vector is L2-normalized, so the
cosine between two transformed documents is a sparse dot product.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Dataset
from .errors import TextprocError

USER_TOKEN = "__user__"
URL_TOKEN = "__url__"
FORMAT_HEADER = "tfidf-v1"

_TOKEN_RE = re.compile(
    r"(?P<user>\[user_?\d+\])"
    r"|(?P<url>https?://\S+)"
    r"|(?P<special>__user__|__url__)"
    r"|(?P<word>(?:[^\W_]|[*'])+)"
)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; ``*`` and ``'`` stay inside words (``b*tch``, ``don't``)."""
    text = unicodedata.normalize("NFC", unicodedata.normalize("NFC", text).casefold())
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        if m.lastgroup == "user":
            tokens.append(USER_TOKEN)
        elif m.lastgroup == "url":
            tokens.append(URL_TOKEN)
        else:
            tokens.append(m.group())
    return tokens


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted term indices with their weights."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise TextprocError("indices and values must be 1-d and equal length")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise TextprocError("sparse vector indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dict(cls, weights: Mapping[int, float]) -> SparseVector:
        items = sorted(weights.items())
        return cls(np.array([i for i, _ in items], dtype=np.int64), np.array([w for _, w in items]))

    @classmethod
    def empty(cls) -> SparseVector:
        return cls(np.empty(0, dtype=np.int64), np.empty(0))

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class Vocabulary:
    term_to_index: Mapping[str, int]
    df: np.ndarray
    n_docs: int

    def __len__(self) -> int:
        return len(self.term_to_index)

    @property
    def terms(self) -> list[str]:
        out = [""] * len(self.term_to_index)
        for t, i in self.term_to_index.items():
            out[i] = t
        return out


@dataclass(frozen=True, eq=False)
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def transform(self, tokens: Sequence[str]) -> SparseVector:
        return tfidf_transform(self, tokens)

    def transform_many(self, docs: Iterable[Sequence[str]]) -> list[SparseVector]:
        return [tfidf_transform(self, toks) for toks in docs]

    def save(self, path: str | Path) -> None:
        """Write ``tfidf-v1``: header, ``n_docs``, then ``term<TAB>df<TAB>idf`` rows in index order."""
        lines = [FORMAT_HEADER, f"n_docs\t{self.vocabulary.n_docs}"]
        for term, df, idf in zip(self.vocabulary.terms, self.vocabulary.df.tolist(), self.idf.tolist()):
            lines.append(f"{term}\t{df}\t{idf!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> TfidfModel:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != FORMAT_HEADER:
            raise TextprocError(f"{path}: not a {FORMAT_HEADER} file")
        try:
            key, n_docs = lines[1].split("\t")
            if key != "n_docs":
                raise ValueError(key)
            terms, dfs, idfs = [], [], []
            for line in lines[2:]:
                term, df, idf = line.split("\t")
                terms.append(term)
                dfs.append(int(df))
                idfs.append(float(idf))
        except (IndexError, ValueError) as exc:
            raise TextprocError(f"{path}: malformed model file ({exc})") from None
        vocab = Vocabulary({t: i for i, t in enumerate(terms)}, np.array(dfs, dtype=np.int64), int(n_docs))
        return cls(vocab, np.array(idfs))


def smooth_idf(df: np.ndarray | int, n_docs: int) -> np.ndarray:
    return np.log((1.0 + n_docs) / (1.0 + np.asarray(df, dtype=np.float64))) + 1.0


def fit_tfidf_tokens(docs: Sequence[Sequence[str]], min_df: int = 1) -> TfidfModel:
    """Fit on pre-tokenized documents; vocabulary order is first appearance."""
    if min_df < 1:
        raise TextprocError(f"min_df must be >= 1, got {min_df}")
    if not docs:
        raise TextprocError("cannot fit tf-idf on an empty corpus")
    df: Counter[str] = Counter()
    order: dict[str, None] = {}
    for toks in docs:
        for t in toks:
            order.setdefault(t, None)
        df.update(set(toks))
    kept = [t for t in order if df[t] >= min_df]
    if not kept:
        raise TextprocError(f"vocabulary is empty after min_df={min_df} filtering")
    dfs = np.array([df[t] for t in kept], dtype=np.int64)
    vocab = Vocabulary({t: i for i, t in enumerate(kept)}, dfs, len(docs))
    return TfidfModel(vocab, smooth_idf(dfs, len(docs)))


def fit_tfidf(d: Dataset, min_df: int = 1) -> TfidfModel:
    if len(d) == 0:
        raise TextprocError("cannot fit tf-idf on an empty dataset")
    return fit_tfidf_tokens([tokenize(r.text) for r in d.records], min_df)


def tfidf_transform(m: TfidfModel, tokens: Sequence[str]) -> SparseVector:
    lookup = m.vocabulary.term_to_index
    counts = Counter(lookup[t] for t in tokens if t in lookup)
    if not counts:
        return SparseVector.empty()
    idx = np.array(sorted(counts), dtype=np.int64)
    raw = np.array([counts[i] for i in idx.tolist()], dtype=np.float64) * m.idf[idx]
    return SparseVector(idx, raw / math.sqrt(float(np.dot(raw, raw))))


def to_csr(vectors: Sequence[SparseVector], n_features: int) -> sp.csr_matrix:
    """Stack vectors as rows of a CSR matrix."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v)
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices = np.empty(0, dtype=np.int64)
        data = np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))
