"""Linear and Gaussian kernels with an LRU cache of kernel rows."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .dataset import SparseDataset, as_sparse_vector

LINEAR = "linear"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    family: str = LINEAR
    sigma: float | None = None

    def __post_init__(self):
        if self.family not in (LINEAR, GAUSSIAN):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == GAUSSIAN:
            if self.sigma is None or not (self.sigma > 0 and math.isfinite(self.sigma)):
                raise ValueError("gaussian kernel needs a positive finite sigma")

    @classmethod
    def linear(cls):
        return cls(LINEAR)

    @classmethod
    def gaussian(cls, sigma):
        return cls(GAUSSIAN, float(sigma))

    def params_token(self) -> str:
        return "-" if self.family == LINEAR else f"sigma={format(self.sigma, '.17g')}"


def _sparse_dot(ia, va, ib, vb):
    common, pa, pb = np.intersect1d(ia, ib, assume_unique=True, return_indices=True)
    return float(np.dot(va[pa], vb[pb])) if common.size else 0.0


def _sparse_sqdist(ia, va, ib, vb):
    union = np.union1d(ia, ib)
    a = np.zeros(union.size)
    b = np.zeros(union.size)
    a[np.searchsorted(union, ia)] = va
    b[np.searchsorted(union, ib)] = vb
    diff = a - b
    return float(np.dot(diff, diff))


def k_eval(spec: KernelSpec, x, z) -> float:
    """Kernel value between two sparse vectors.

    >>> k_eval(KernelSpec.linear(), {1: 1.0, 2: 2.0}, {2: 3.0})
    6.0
    """
    ix, vx = as_sparse_vector(x)
    iz, vz = as_sparse_vector(z)
    if spec.family == LINEAR:
        out = _sparse_dot(ix, vx, iz, vz)
    else:
        out = math.exp(-_sparse_sqdist(ix, vx, iz, vz) / (2.0 * spec.sigma**2))
    if not math.isfinite(out):
        raise FloatingPointError(f"kernel value {out} is not finite")
    return out


def _cross(A, B):
    """Dense ``A @ B.T`` for any mix of dense and CSR operands."""
    if sparse.issparse(A):
        if sparse.issparse(B):
            return (A @ B.T).toarray()
        return np.asarray(A @ B.T)
    if sparse.issparse(B):
        return np.asarray((B @ A.T).T)
    return A @ B.T


def gram(spec: KernelSpec, A, B, a_sq=None, b_sq=None) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``.

    Squared distances use ``|a|^2 + |b|^2 - 2 a.b`` clipped at zero.
    """
    dots = _cross(A, B)
    if spec.family == LINEAR:
        out = dots
    else:
        if a_sq is None:
            a_sq = _row_sq_norms(A)
        if b_sq is None:
            b_sq = _row_sq_norms(B)
        d2 = a_sq[:, None] + b_sq[None, :] - 2.0 * dots
        np.maximum(d2, 0.0, out=d2)
        out = np.exp(d2 * (-0.5 / spec.sigma**2))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite kernel values")
    return out


def _row_sq_norms(A):
    if sparse.issparse(A):
        return np.asarray(A.multiply(A).sum(axis=1)).reshape(-1)
    return np.einsum("ij,ij->i", A, A)


class KernelCache:
    """LRU map from example index to its kernel row against one working set.

    Binding the cache to a different working set drops every stored row.
    """

    def __init__(self, capacity=256):
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.capacity = int(capacity)
        self._rows = OrderedDict()
        self._key = None
        self.hits = 0
        self.misses = 0

    @classmethod
    def for_budget(cls, row_length, megabytes=256.0):
        per_row = 8 * max(int(row_length), 1)
        return cls(max(2, int(megabytes * 2**20 // per_row)))

    def bind(self, key):
        if key != self._key:
            self._rows.clear()
            self._key = key

    def __len__(self):
        return len(self._rows)

    def __contains__(self, i):
        return i in self._rows

    def get(self, i):
        row = self._rows.get(i)
        if row is None:
            self.misses += 1
            return None
        self.hits += 1
        self._rows.move_to_end(i)
        return row

    def put(self, i, row):
        self._rows[i] = row
        self._rows.move_to_end(i)
        while len(self._rows) > self.capacity:
            self._rows.popitem(last=False)


class WorkingKernel:
    """Kernel rows of dataset examples against a fixed working index list."""

    def __init__(self, spec: KernelSpec, ds: SparseDataset, working, cache=None):
        self.spec = spec
        self.ds = ds
        self.working = np.asarray(working, dtype=np.intp)
        feats = ds.features
        self._W = feats[self.working]
        self._W_sq = ds.sq_norms[self.working]
        self._feats = feats
        self.cache = cache if cache is not None else KernelCache.for_budget(len(self.working))
        self.cache.bind(("working", id(ds), self.working.tobytes()))

    def compute(self, i) -> np.ndarray:
        xi = self._feats[i : i + 1]
        row = gram(self.spec, xi, self._W, self.ds.sq_norms[i : i + 1], self._W_sq)[0]
        if self.spec.family == GAUSSIAN:
            row[self.working == i] = 1.0
        return row

    def row(self, i) -> np.ndarray:
        row = self.cache.get(i)
        if row is None:
            row = self.compute(i)
            row.setflags(write=False)
            self.cache.put(i, row)
        return row

    def diag(self) -> np.ndarray:
        if self.spec.family == LINEAR:
            return self._W_sq.copy()
        return np.ones(len(self.working))


def k_row(spec: KernelSpec, ds: SparseDataset, i, working, cache: KernelCache | None = None):
    """Row ``[k(x_i, x_w) for w in working]``, served from ``cache`` when present."""
    working = np.asarray(working, dtype=np.intp)
    n = ds.n
    if not 0 <= i < n or (working.size and (working.min() < 0 or working.max() >= n)):
        raise IndexError("example index out of range")
    return WorkingKernel(spec, ds, working, cache).row(i)
