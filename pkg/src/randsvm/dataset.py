"""Labeled sparse datasets: libsvm I/O, synthetic generators, weighted sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

TWONORM_A = 2.0 / math.sqrt(20.0)

# dense copies are used for kernel arithmetic below this many stored cells
_DENSE_CELL_LIMIT = 50_000_000


class LibsvmParseError(ValueError):
    """A line of a libsvm file could not be parsed."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class LibsvmIndexOrderError(LibsvmParseError):
    """Feature indices on a line are not strictly increasing."""


@dataclass(frozen=True)
class DatasetStats:
    n: int
    d: int
    max_norm: float
    class_counts: dict = field(default_factory=dict)


class SparseDataset:
    """Labeled examples with sparse features and per-example sampling weights.

    Features are held as an ``n x d`` CSR matrix whose column ``j`` stores
    libsvm feature index ``j + 1``.

    Parameters
    ----------
    X : scipy.sparse matrix or array_like
        Feature matrix, one row per example.
    y : array_like
        Labels. Classification datasets use +1/-1.
    weights : array_like, optional
        Positive finite weights, default all ones.
    """

    def __init__(self, X, y, weights=None):
        X = sparse.csr_matrix(X, dtype=np.float64)
        X.sort_indices()
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(y)):
            raise ValueError("labels must be finite")
        if not np.all(np.isfinite(X.data)):
            raise ValueError("feature values must be finite")
        if weights is None:
            weights = np.ones(y.shape[0])
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape != y.shape:
            raise ValueError("weights must have one entry per example")
        if weights.size and not (np.all(np.isfinite(weights)) and np.all(weights > 0)):
            raise ValueError("weights must be positive and finite")
        self.X = X
        self.y = y
        self.weights = weights
        self.X.data.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"SparseDataset(n={self.n}, d={self.d})"

    @property
    def is_classification(self) -> bool:
        return bool(np.all(np.abs(self.y) == 1.0))

    def example(self, i):
        """Return ``(indices, values)`` of example ``i`` with 1-based indices."""
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return self.X.indices[lo:hi] + 1, self.X.data[lo:hi].copy()

    @cached_property
    def sq_norms(self) -> np.ndarray:
        return np.asarray(self.X.multiply(self.X).sum(axis=1)).reshape(-1)

    @cached_property
    def features(self):
        """Feature matrix in the representation used for kernel arithmetic.

        Dense ``ndarray`` when the dense form is small, else the CSR matrix.
        """
        if self.n * self.d <= _DENSE_CELL_LIMIT:
            return self.X.toarray()
        return self.X

    def subset(self, idx) -> "SparseDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return SparseDataset(self.X[idx], self.y[idx], self.weights[idx])

    def with_weights(self, weights) -> "SparseDataset":
        return SparseDataset(self.X, self.y, weights)

    def total_weight(self) -> float:
        return float(self.weights.sum())


def from_dense(X, y) -> SparseDataset:
    return SparseDataset(sparse.csr_matrix(np.asarray(X, dtype=np.float64)), y)


def as_sparse_vector(x, d=None):
    """Normalize a sparse vector to ``(indices, values)`` with sorted 1-based indices.

    Accepts a mapping ``{index: value}``, a sequence of ``(index, value)``
    pairs, an ``(indices, values)`` tuple of arrays, or a dense 1-D array
    whose nonzero entries become features.
    """
    if isinstance(x, np.ndarray) and x.ndim == 1 and x.dtype.kind == "f":
        nz = np.flatnonzero(x)
        idx, val = nz + 1, x[nz].astype(np.float64)
    elif isinstance(x, dict):
        items = sorted(x.items())
        idx = np.array([k for k, _ in items], dtype=np.intp)
        val = np.array([v for _, v in items], dtype=np.float64)
    elif isinstance(x, tuple) and len(x) == 2 and np.ndim(x[0]) == 1:
        idx = np.asarray(x[0], dtype=np.intp)
        val = np.asarray(x[1], dtype=np.float64)
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
    else:
        pairs = list(x)
        idx = np.array([p[0] for p in pairs], dtype=np.intp)
        val = np.array([p[1] for p in pairs], dtype=np.float64)
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
    if idx.size and idx[0] < 1:
        raise ValueError("feature indices are 1-based")
    if np.any(np.diff(idx) == 0):
        raise ValueError("duplicate feature index")
    if d is not None and idx.size and idx[-1] > d:
        raise ValueError(f"feature index {idx[-1]} exceeds dimension {d}")
    return idx, val


def vectors_to_csr(vectors, d=None):
    """Stack sparse vectors (any form accepted by `as_sparse_vector`) into CSR."""
    parsed = [as_sparse_vector(v) for v in vectors]
    if d is None:
        d = max((int(i[-1]) for i, _ in parsed if i.size), default=0)
    indptr = np.zeros(len(parsed) + 1, dtype=np.intp)
    for k, (i, _) in enumerate(parsed):
        indptr[k + 1] = indptr[k] + i.size
    indices = np.concatenate([i - 1 for i, _ in parsed]) if parsed else np.zeros(0, np.intp)
    data = np.concatenate([v for _, v in parsed]) if parsed else np.zeros(0)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(parsed), d))


# ---------------------------------------------------------------- libsvm I/O


def _parse_line(line, lineno):
    tokens = line.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise LibsvmParseError(lineno, f"bad label {tokens[0]!r}") from None
    if not math.isfinite(label):
        raise LibsvmParseError(lineno, "label is not finite")
    indices, values = [], []
    prev = 0
    for tok in tokens[1:]:
        if tok.startswith("#"):
            raise LibsvmParseError(lineno, "comments are not supported")
        head, sep, tail = tok.partition(":")
        if not sep:
            raise LibsvmParseError(lineno, f"expected index:value, got {tok!r}")
        try:
            idx = int(head)
            val = float(tail)
        except ValueError:
            raise LibsvmParseError(lineno, f"bad pair {tok!r}") from None
        if idx < 1:
            raise LibsvmParseError(lineno, f"feature index {idx} is not 1-based")
        if not math.isfinite(val):
            raise LibsvmParseError(lineno, f"value in {tok!r} is not finite")
        if idx <= prev:
            raise LibsvmIndexOrderError(
                lineno, f"index {idx} after {prev}: indices must strictly increase"
            )
        prev = idx
        indices.append(idx - 1)
        values.append(val)
    return label, indices, values


def load_libsvm(path) -> SparseDataset:
    """Read a libsvm sparse text file.

    Blank lines are skipped; LF and CRLF endings are both accepted.
    """
    labels, indptr, indices, values = [], [0], [], []
    with open(path, "r", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            label, idx, val = _parse_line(line, lineno)
            labels.append(label)
            indices.extend(idx)
            values.extend(val)
            indptr.append(len(indices))
    d = max(indices) + 1 if indices else 0
    X = sparse.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.intp), np.array(indptr)),
        shape=(len(labels), d),
    )
    return SparseDataset(X, np.array(labels, dtype=np.float64))


def _fmt(v):
    return format(float(v), ".17g")


def save_libsvm(ds: SparseDataset, path) -> None:
    classification = ds.is_classification and ds.n > 0
    with open(path, "w", newline="\n") as fh:
        for i in range(ds.n):
            if classification:
                head = "+1" if ds.y[i] > 0 else "-1"
            else:
                head = _fmt(ds.y[i])
            idx, val = ds.example(i)
            pairs = " ".join(f"{j}:{_fmt(v)}" for j, v in zip(idx, val))
            fh.write(f"{head} {pairs}\n" if pairs else f"{head}\n")


# ---------------------------------------------------------------- generators


def _balanced_labels(n, rng):
    n_pos = (n + 1) // 2
    y = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    return rng.permutation(y)


def gen_twonorm(n, seed) -> SparseDataset:
    """20-d Gaussians with unit covariance and means +a*1 / -a*1, a = 2/sqrt(20)."""
    if n < 2:
        raise ValueError("twonorm needs n >= 2")
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, rng)
    X = rng.standard_normal((n, 20)) + TWONORM_A * y[:, None]
    return from_dense(X, y)


def gen_ringnorm(n, seed) -> SparseDataset:
    """Class +1 ~ N(1, 4I), class -1 ~ N(a*1, I), 20-d."""
    if n < 2:
        raise ValueError("ringnorm needs n >= 2")
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, rng)
    z = rng.standard_normal((n, 20))
    X = np.where(y[:, None] > 0, 1.0 + 2.0 * z, TWONORM_A + z)
    return from_dense(X, y)


def checkerboard_label(x1, x2):
    """-1 where the integer parts of both coordinates share parity, else +1."""
    same = np.mod(np.floor(x1), 2) == np.mod(np.floor(x2), 2)
    return np.where(same, -1.0, 1.0)


def gen_checkerboard(n, seed) -> SparseDataset:
    if n < 1:
        raise ValueError("checkerboard needs n >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 4.0, size=(n, 2))
    return from_dense(X, checkerboard_label(X[:, 0], X[:, 1]))


def friedman_target(X):
    """Noise-free regression surface over the first five input columns."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5)
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def gen_friedman_regression(n, seed) -> SparseDataset:
    """10 uniform inputs on [0, 1]; columns 6-10 do not enter the target."""
    if n < 1:
        raise ValueError("friedman needs n >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, 10))
    y = friedman_target(X) + rng.standard_normal(n)
    return from_dense(X, y)


def gen_separable(n, seed, d=2, gap=0.2, scale=1.0) -> SparseDataset:
    """Points in ``[-scale, scale]^d`` labelled by a random hyperplane through the origin.

    Points closer than ``gap / 2`` to the plane are redrawn, so the
    geometric margin is at least ``gap / 2``. Both classes get ``n // 2``
    or more points when ``n >= 2``.
    """
    if n < 2:
        raise ValueError("separable data needs n >= 2")
    if not 0 <= gap < scale:
        raise ValueError("gap must lie in [0, scale)")
    rng = np.random.default_rng(seed)
    normal = rng.standard_normal(d)
    normal /= np.linalg.norm(normal)
    y = _balanced_labels(n, rng)
    X = np.empty((n, d))
    todo = np.arange(n)
    while todo.size:
        cand = rng.uniform(-scale, scale, size=(todo.size, d))
        dist = cand @ normal * y[todo]
        ok = dist >= gap / 2
        X[todo[ok]] = cand[ok]
        todo = todo[~ok]
    return from_dense(X, y)


GENERATORS = {
    "twonorm": gen_twonorm,
    "ringnorm": gen_ringnorm,
    "checkerboard": gen_checkerboard,
    "friedman": gen_friedman_regression,
}


def generate(name, n, seed) -> SparseDataset:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}") from None
    return gen(n, seed)


# ---------------------------------------------------------------- statistics


def stats(ds: SparseDataset) -> DatasetStats:
    if ds.n == 0:
        raise ValueError("stats of an empty dataset")
    max_norm = float(np.sqrt(ds.sq_norms.max()))
    counts = {}
    if ds.is_classification:
        counts = {+1: int(np.sum(ds.y > 0)), -1: int(np.sum(ds.y < 0))}
    return DatasetStats(n=ds.n, d=ds.d, max_norm=max_norm, class_counts=counts)


# ---------------------------------------------------------------- sampling


def weighted_sample(weights, r, seed) -> np.ndarray:
    """Draw ``r`` distinct indices, each draw proportional to weight.

    Uses exponential keys ``-log(U) / w`` and keeps the ``r`` smallest.
    ``weights`` may be a dataset (its weights are used) or an array.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if isinstance(weights, SparseDataset):
        weights = weights.weights
    w = np.asarray(weights, dtype=np.float64)
    n = w.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"sample size {r} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    keys = -np.log(rng.random(n)) / w
    if r == n:
        return np.arange(n)
    chosen = np.argpartition(keys, r - 1)[:r]
    return np.sort(chosen)


def uniform_sample(n, r, rng) -> np.ndarray:
    if not 1 <= r <= n:
        raise ValueError(f"sample size {r} outside [1, {n}]")
    return np.sort(rng.choice(n, size=r, replace=False))
