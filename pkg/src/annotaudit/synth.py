"""Synthetic corpora with known label noise, used to score the audit end to end."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import AbstractSet, Mapping

import numpy as np

from .corpus import ColumnSpec, Dataset, LabelSchema, Record
from .errors import SynthError


@dataclass(frozen=True)
class SynthSpec:
    n_docs: int = 2000
    n_classes: int = 2
    class_vocab_size: int = 50
    shared_vocab_size: int = 100
    doc_len_range: tuple[int, int] = (10, 20)
    seed: int = 0
    class_token_prob: float = 0.7

    def validate(self) -> None:
        for name in ("n_docs", "n_classes", "class_vocab_size", "shared_vocab_size"):
            if getattr(self, name) < 1:
                raise SynthError(f"{name} must be positive")
        lo, hi = self.doc_len_range
        if lo < 1 or lo > hi:
            raise SynthError(f"invalid doc_len_range {self.doc_len_range}")
        if not 0.0 <= self.class_token_prob <= 1.0:
            raise SynthError("class_token_prob must lie in [0, 1]")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["doc_len_range"] = list(self.doc_len_range)
        return d


@dataclass(frozen=True)
class NoiseLog:
    flips: Mapping[str, tuple[int, int]]
    epsilon: float


def class_vocabulary(c: int, size: int) -> list[str]:
    return [f"c{c}w{j}" for j in range(size)]


def shared_vocabulary(size: int) -> list[str]:
    return [f"s{j}" for j in range(size)]


def generate_corpus(spec: SynthSpec) -> Dataset:
    """Documents of class ``i % n_classes`` mixing class-specific and shared terms."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    shared = shared_vocabulary(spec.shared_vocab_size)
    vocabs = [class_vocabulary(c, spec.class_vocab_size) for c in range(spec.n_classes)]
    lo, hi = spec.doc_len_range
    width = len(str(spec.n_docs - 1))
    records = []
    for i in range(spec.n_docs):
        label = i % spec.n_classes
        length = int(rng.integers(lo, hi + 1))
        from_class = rng.random(length) < spec.class_token_prob
        class_picks = rng.integers(0, spec.class_vocab_size, size=length)
        shared_picks = rng.integers(0, spec.shared_vocab_size, size=length)
        words = [
            vocabs[label][cp] if fc else shared[sp_]
            for fc, cp, sp_ in zip(from_class.tolist(), class_picks.tolist(), shared_picks.tolist())
        ]
        records.append(Record(f"d{i:0{width}d}", " ".join(words), label))
    schema = LabelSchema(tuple(f"class_{c}" for c in range(spec.n_classes)))
    return Dataset(schema, tuple(records), ColumnSpec(text="text", label="label", id="id"))


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def inject_label_noise(d: Dataset, epsilon: float, seed: int) -> tuple[Dataset, NoiseLog]:
    """Flip ``round(epsilon * N)`` sampled records to a uniformly chosen other label."""
    if not 0.0 <= epsilon <= 1.0:
        raise SynthError(f"epsilon must lie in [0, 1], got {epsilon}")
    n_flips = _half_up(epsilon * len(d))
    n_classes = len(d.schema)
    if n_flips and n_classes < 2:
        raise SynthError("label noise needs at least two classes")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(d), size=n_flips, replace=False) if n_flips else np.empty(0, dtype=np.int64)
    labels = [r.label for r in d.records]
    flips: dict[str, tuple[int, int]] = {}
    for i in sorted(chosen.tolist()):
        old = labels[i]
        new = int(rng.integers(0, n_classes - 1))
        if new >= old:
            new += 1
        labels[i] = new
        flips[d.records[i].id] = (old, new)
    return d.with_labels(labels), NoiseLog(flips, epsilon)


def restore_labels(d: Dataset, log: NoiseLog) -> Dataset:
    labels = [log.flips[r.id][0] if r.id in log.flips else r.label for r in d.records]
    return d.with_labels(labels)


def evaluate_detection(flagged: AbstractSet[str], log: NoiseLog) -> dict:
    """Precision/recall of flagged ids against the flips; precision is ``None`` when undefined."""
    flipped = set(log.flips)
    hit = len(set(flagged) & flipped)
    if flagged:
        precision: float | None = hit / len(flagged)
    else:
        precision = 1.0 if not flipped else None
    recall = hit / len(flipped) if flipped else 1.0
    if precision is None or precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "n_flagged": len(flagged),
        "n_flipped": len(flipped),
    }


def write_noise_log(path: str | Path, log: NoiseLog, schema: LabelSchema) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "original_label", "new_label"])
        for rid, (old, new) in log.flips.items():
            w.writerow([rid, schema.names[old], schema.names[new]])
