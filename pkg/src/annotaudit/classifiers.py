"""The five-member classifier roster over tf-idf features.

All members return label indices into the dataset schema. Classes absent
from a training set are never predicted, and every argmax breaks ties
toward the lower schema index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ClassifierError
from .textproc import SparseVector, to_csr

KINDS = ("multinomial_nb", "complement_nb", "softmax_lr", "linear_svm", "knn")

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "multinomial_nb": {"alpha": 1.0},
    "complement_nb": {"alpha": 1.0},
    "softmax_lr": {"l2": 1e-4, "epochs": 30, "lr": 0.1},
    "linear_svm": {"l2": 1e-4, "epochs": 30, "lr": 0.1},
    "knn": {"k": 5},
}

_INT_PARAMS = {"epochs", "k"}

TrainSet = Sequence[tuple[SparseVector, int]]


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ClassifierError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        defaults = DEFAULT_PARAMS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ClassifierError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        merged: dict[str, Any] = {}
        for key, default in defaults.items():
            value = self.params.get(key, default)
            try:
                value = int(value) if key in _INT_PARAMS else float(value)
            except (TypeError, ValueError):
                raise ClassifierError(f"{self.kind}: {key}={value!r} is not numeric") from None
            merged[key] = value
        _check_ranges(self.kind, merged)
        object.__setattr__(self, "params", merged)

    @property
    def min_classes(self) -> int:
        # one-vs-rest and softmax training need a negative class
        return 2 if self.kind in ("softmax_lr", "linear_svm") else 1

    def describe(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}({args})"


def _check_ranges(kind: str, p: Mapping[str, Any]) -> None:
    if "alpha" in p and not p["alpha"] > 0:
        raise ClassifierError(f"{kind}: alpha must be > 0")
    if "lr" in p and not p["lr"] > 0:
        raise ClassifierError(f"{kind}: lr must be > 0")
    if "l2" in p and not p["l2"] >= 0:
        raise ClassifierError(f"{kind}: l2 must be >= 0")
    if "epochs" in p and p["epochs"] < 1:
        raise ClassifierError(f"{kind}: epochs must be >= 1")
    if "k" in p and p["k"] < 1:
        raise ClassifierError(f"{kind}: k must be >= 1")


def default_roster() -> list[ClassifierSpec]:
    return [ClassifierSpec(kind) for kind in KINDS]


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Learned state. Linear-scoring kinds fill ``weights``/``bias``; knn keeps its training rows."""

    spec: ClassifierSpec
    n_classes: int
    n_features: int
    seen: np.ndarray
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    train_matrix: sp.csr_matrix | None = None
    train_labels: np.ndarray | None = None


def _prepare(train: TrainSet, n_classes: int, n_features: int | None):
    if not train:
        raise ClassifierError("training set is empty")
    vectors = [v for v, _ in train]
    y = np.array([int(l) for _, l in train], dtype=np.int64)
    if y.min() < 0 or y.max() >= n_classes:
        raise ClassifierError(f"training label outside 0..{n_classes - 1}")
    if n_features is None:
        n_features = 1 + max((int(v.indices[-1]) for v in vectors if len(v)), default=0)
    X = to_csr(vectors, n_features)
    seen = np.bincount(y, minlength=n_classes) > 0
    return X, y, seen, n_features


def fit_nb(
    train: TrainSet,
    n_classes: int,
    variant: str = "multinomial",
    alpha: float = 1.0,
    n_features: int | None = None,
) -> TrainedModel:
    """Naive Bayes on tf-idf weights.

    The multinomial variant scores ``log prior + x . log theta_c``. The
    complement variant estimates theta from every class except ``c`` and
    scores ``-x . log theta_comp_c`` without a prior.
    """
    if variant not in ("multinomial", "complement"):
        raise ClassifierError(f"unknown NB variant {variant!r}")
    if not alpha > 0:
        raise ClassifierError("alpha must be > 0")
    X, y, seen, n_features = _prepare(train, n_classes, n_features)
    onehot = sp.csr_matrix((np.ones(len(y)), (y, np.arange(len(y)))), shape=(n_classes, len(y)))
    per_class = np.asarray((onehot @ X).todense())  # C x V accumulated weights
    if variant == "multinomial":
        theta = (alpha + per_class) / (alpha * n_features + per_class.sum(axis=1, keepdims=True))
        counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        with np.errstate(divide="ignore"):
            bias = np.log(counts / counts.sum())
        weights = np.log(theta)
    else:
        comp = per_class.sum(axis=0, keepdims=True) - per_class
        theta = (alpha + comp) / (alpha * n_features + comp.sum(axis=1, keepdims=True))
        weights = -np.log(theta)
        bias = np.zeros(n_classes)
    kind = "multinomial_nb" if variant == "multinomial" else "complement_nb"
    spec = ClassifierSpec(kind, {"alpha": alpha})
    return TrainedModel(spec, n_classes, n_features, seen, weights=weights, bias=bias)


def softmax_objective(
    W: np.ndarray, b: np.ndarray, X: sp.csr_matrix, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2``, with its gradient in W and b."""
    z = np.asarray(X @ W.T) + b
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = X.shape[0]
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(W * W))
    g = np.exp(logp)
    g[np.arange(n), y] -= 1.0
    g /= n
    grad_W = np.asarray((X.T @ g).T) + l2 * W
    return float(loss), grad_W, g.sum(axis=0)


def fit_linear(
    train: TrainSet,
    n_classes: int,
    loss: str = "softmax",
    l2: float = 1e-4,
    epochs: int = 30,
    lr: float = 0.1,
    seed: int = 0,
    n_features: int | None = None,
) -> TrainedModel:
    """Per-sample SGD over a seeded shuffle each epoch.

    ``softmax`` minimizes cross-entropy; ``hinge`` trains one-vs-rest
    margins. L2 decay is applied through a shared scale factor so each
    step only touches the sample's nonzero columns.
    """
    if loss not in ("softmax", "hinge"):
        raise ClassifierError(f"unknown loss {loss!r}")
    if not lr > 0:
        raise ClassifierError(f"lr must be > 0, got {lr}")
    if l2 < 0:
        raise ClassifierError(f"l2 must be >= 0, got {l2}")
    X, y, seen, n_features = _prepare(train, n_classes, n_features)
    rng = np.random.default_rng(seed)
    W = np.zeros((n_classes, n_features))
    b = np.zeros(n_classes)
    scale = 1.0
    decay = 1.0 - lr * l2
    if decay <= 0:
        raise ClassifierError("lr * l2 must be < 1")
    rows = [(X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]]) for i in range(X.shape[0])]
    sign = np.full((len(y), n_classes), -1.0)
    sign[np.arange(len(y)), y] = 1.0

    for _ in range(int(epochs)):
        for i in rng.permutation(len(y)):
            idx, vals = rows[i]
            z = scale * (W[:, idx] @ vals) + b
            if loss == "softmax":
                g = np.exp(z - z.max())
                g /= g.sum()
                g[y[i]] -= 1.0
            else:
                g = np.where(sign[i] * z < 1.0, -sign[i], 0.0)
            scale *= decay
            if idx.size:
                W[:, idx] -= (lr / scale) * np.outer(g, vals)
            b -= lr * g
            if scale < 1e-6:
                W *= scale
                scale = 1.0
    W *= scale
    kind = "softmax_lr" if loss == "softmax" else "linear_svm"
    spec = ClassifierSpec(kind, {"l2": l2, "epochs": epochs, "lr": lr})
    return TrainedModel(spec, n_classes, n_features, seen, weights=W, bias=b)


def fit_knn(train: TrainSet, n_classes: int, k: int = 5, n_features: int | None = None) -> TrainedModel:
    if k < 1:
        raise ClassifierError(f"k must be >= 1, got {k}")
    if k > len(train):
        raise ClassifierError(f"k={k} exceeds training-set size {len(train)}")
    X, y, seen, n_features = _prepare(train, n_classes, n_features)
    return TrainedModel(ClassifierSpec("knn", {"k": k}), n_classes, n_features, seen, train_matrix=X, train_labels=y)


def fit_classifier(
    spec: ClassifierSpec, train: TrainSet, n_classes: int, n_features: int | None = None, seed: int = 0
) -> TrainedModel:
    p = spec.params
    if spec.kind == "multinomial_nb":
        return fit_nb(train, n_classes, "multinomial", p["alpha"], n_features)
    if spec.kind == "complement_nb":
        return fit_nb(train, n_classes, "complement", p["alpha"], n_features)
    if spec.kind == "softmax_lr":
        return fit_linear(train, n_classes, "softmax", p["l2"], p["epochs"], p["lr"], seed, n_features)
    if spec.kind == "linear_svm":
        return fit_linear(train, n_classes, "hinge", p["l2"], p["epochs"], p["lr"], seed, n_features)
    return fit_knn(train, n_classes, p["k"], n_features)


def _clip(vectors: Sequence[SparseVector], n_features: int) -> list[SparseVector]:
    out = []
    for v in vectors:
        if len(v) and v.indices[-1] >= n_features:
            keep = v.indices < n_features
            v = SparseVector(v.indices[keep], v.values[keep])
        out.append(v)
    return out


def _knn_predict(model: TrainedModel, Q: sp.csr_matrix, chunk: int = 512) -> np.ndarray:
    T = model.train_matrix
    labels = model.train_labels
    k = model.spec.params["k"]
    t_norm = np.sqrt(np.asarray(T.multiply(T).sum(axis=1)).ravel())
    t_inv = np.divide(1.0, t_norm, out=np.zeros_like(t_norm), where=t_norm > 0)
    q_norm = np.sqrt(np.asarray(Q.multiply(Q).sum(axis=1)).ravel())
    q_inv = np.divide(1.0, q_norm, out=np.zeros_like(q_norm), where=q_norm > 0)
    ordinals = np.arange(T.shape[0])
    out = np.empty(Q.shape[0], dtype=np.int64)
    for start in range(0, Q.shape[0], chunk):
        sims = np.asarray((Q[start:start + chunk] @ T.T).todense())
        sims *= q_inv[start:start + chunk, None]
        sims *= t_inv[None, :]
        for r, row in enumerate(sims):
            kth = np.partition(row, row.size - k)[row.size - k]
            cand = np.flatnonzero(row >= kth)
            order = np.lexsort((ordinals[cand], -row[cand]))[:k]
            votes = np.bincount(labels[cand[order]], minlength=model.n_classes)
            out[start + r] = int(np.argmax(votes))
    return out


def predict_many(model: TrainedModel, vectors: Sequence[SparseVector]) -> np.ndarray:
    """Label index per vector."""
    if not vectors:
        return np.empty(0, dtype=np.int64)
    Q = to_csr(_clip(vectors, model.n_features), model.n_features)
    if model.spec.kind == "knn":
        return _knn_predict(model, Q)
    scores = np.asarray(Q @ model.weights.T) + model.bias
    scores[:, ~model.seen] = -np.inf
    return np.argmax(scores, axis=1).astype(np.int64)


def predict(model: TrainedModel, v: SparseVector) -> int:
    return int(predict_many(model, [v])[0])
