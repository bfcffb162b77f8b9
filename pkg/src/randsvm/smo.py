"""SMO solver for the C-SVC and epsilon-SVR duals on a working subset.

Both problems are handled in the common form

    min_a  1/2 a^T Q a + p^T a   s.t.  s^T a = 0,  0 <= a <= C

with ``s`` in {+1, -1}. For classification ``Q_ij = y_i y_j K_ij``,
``p = -1`` and ``s = y``. For regression the variables are
``(a+, a-)`` over the working set, ``Q = [[K, -K], [-K, K]]``,
``p = (eps - y, eps + y)`` and ``s = (+1, -1)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .dataset import SparseDataset, as_sparse_vector, vectors_to_csr, _DENSE_CELL_LIMIT
from .kernels import KernelCache, KernelSpec, WorkingKernel, gram

log = logging.getLogger(__name__)

CLASSIFY = "classify"
REGRESS = "regress"

_TAU = 1e-12
_ITER_PER_VAR = 10_000


class DegenerateModelError(ValueError):
    """The working set holds a single class, so no separator is defined."""


@dataclass(eq=False)
class SvmModel:
    """Kernel expansion ``f(x) = sum_i coef_i k(sv_i, x) + bias``.

    ``sv_indices`` refer to rows of the training dataset and ``sv_vectors``
    holds copies of those rows so the model predicts on its own.
    Classification coefficients are ``alpha_i y_i``, regression ones
    ``alpha_i+ - alpha_i-``.
    """

    task: str
    kernel: KernelSpec
    sv_indices: np.ndarray
    dual_coef: np.ndarray
    bias: float
    C: float
    sv_vectors: sparse.csr_matrix
    epsilon_tube: float = 0.0

    def __post_init__(self):
        if self.task not in (CLASSIFY, REGRESS):
            raise ValueError(f"unknown task {self.task!r}")
        self.sv_indices = np.asarray(self.sv_indices, dtype=np.intp)
        self.dual_coef = np.asarray(self.dual_coef, dtype=np.float64)
        self.sv_vectors = sparse.csr_matrix(self.sv_vectors, dtype=np.float64)
        if not (self.sv_indices.shape == self.dual_coef.shape == (self.sv_vectors.shape[0],)):
            raise ValueError("support vector arrays disagree in length")

    @property
    def n_sv(self) -> int:
        return self.sv_indices.size

    @cached_property
    def _sv_feats(self):
        n, d = self.sv_vectors.shape
        return self.sv_vectors.toarray() if n * d <= _DENSE_CELL_LIMIT else self.sv_vectors

    @cached_property
    def _sv_sq(self):
        return np.asarray(self.sv_vectors.multiply(self.sv_vectors).sum(axis=1)).reshape(-1)

    def linear_weights(self) -> np.ndarray:
        """Explicit ``w = sum coef_i sv_i``; only meaningful for the linear kernel."""
        return np.asarray(self.sv_vectors.T @ self.dual_coef).reshape(-1)


@dataclass
class SolveOutcome:
    model: SvmModel
    dual_objective: float
    iterations: int
    converged: bool
    kkt_gap: float
    working: np.ndarray
    objective_trace: list = field(default_factory=list)


# ---------------------------------------------------------------- core SMO


def _smo(k_row, p, s, C, KD, alpha, tol, max_iter, trace=None):
    """Pairwise coordinate descent with maximal-violating-pair selection.

    ``k_row(t)`` returns kernel values of variable ``t`` against all
    variables, so ``Q_tu = s_t s_u k_row(t)[u]``. ``i`` is the maximal
    violator; ``j`` is picked among violating partners by the second-order
    gain estimate. Returns ``(alpha, G, iterations, converged, gap)``.
    """
    # mG holds -s * grad; only the two updated coordinates change each step
    mG = -s * p
    for t in np.flatnonzero(alpha):
        mG -= (alpha[t] * s[t]) * k_row(t)
    pos = s > 0
    up = np.where(pos, alpha < C, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < C)
    neg_inf = -np.inf
    it = 0
    converged = False
    gap = math.inf
    while True:
        cand = np.where(up, mG, neg_inf)
        i = int(np.argmax(cand))
        g_max = cand[i]
        g_max2 = np.max(np.where(low, -mG, neg_inf))
        if g_max == neg_inf or g_max2 == neg_inf:
            converged, gap = True, 0.0
            break
        gap = g_max + g_max2
        if gap < tol:
            converged = True
            break
        if it >= max_iter:
            break
        Ki = k_row(i)
        grad_diff = g_max - mG
        quad = (KD[i] - 2.0 * Ki) + KD
        quad[quad <= 0] = _TAU
        gain = np.where(low & (grad_diff > 0), -(grad_diff * grad_diff) / quad, np.inf)
        j = int(np.argmin(gain))
        Kj = k_row(j)

        si, sj = s[i], s[j]
        q_ij = si * sj * Ki[j]
        g_i, g_j = -si * mG[i], -sj * mG[j]
        ai, aj = alpha[i], alpha[j]
        if si != sj:
            qc = KD[i] + KD[j] + 2.0 * q_ij
            if qc <= 0:
                qc = _TAU
            delta = (-g_i - g_j) / qc
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            qc = KD[i] + KD[j] - 2.0 * q_ij
            if qc <= 0:
                qc = _TAU
            delta = (g_i - g_j) / qc
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        mG -= (si * (ni - ai)) * Ki + (sj * (nj - aj)) * Kj
        for t in (i, j):
            if pos[t]:
                up[t], low[t] = alpha[t] < C, alpha[t] > 0
            else:
                up[t], low[t] = alpha[t] > 0, alpha[t] < C
        it += 1
        if trace is not None:
            trace.append(-0.5 * float(alpha @ (p - s * mG)))
    return alpha, -s * mG, it, converged, gap


def _bias(alpha, G, s, C):
    """KKT-implied bias: mean over free variables, else midpoint of the bounds."""
    sG = s * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(sG[free].mean())
    else:
        ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
        lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
        ub = sG[ub_mask].min() if ub_mask.any() else math.inf
        lb = sG[lb_mask].max() if lb_mask.any() else -math.inf
        if math.isinf(ub) and math.isinf(lb):
            rho = 0.0
        elif math.isinf(ub):
            rho = float(lb)
        elif math.isinf(lb):
            rho = float(ub)
        else:
            rho = float((ub + lb) / 2)
    return -rho


def _check_common(ds, working, C, kkt_tol):
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    if not kkt_tol > 0:
        raise ValueError("kkt_tol must be positive")
    working = np.asarray(working, dtype=np.intp).reshape(-1)
    if working.size == 0:
        raise ValueError("empty working set")
    if working.min() < 0 or working.max() >= ds.n:
        raise IndexError("working index out of range")
    if np.unique(working).size != working.size:
        raise ValueError("duplicate indices in working set")
    return working


def _warm_coefs(warm, working, kernel, C):
    """Warm-start coefficients aligned to ``working``; None means cold start."""
    if warm is None or warm.n_sv == 0:
        return None
    if warm.kernel != kernel or warm.C != C:
        log.debug("warm start ignored: kernel or C differs")
        return None
    pos = {int(w): k for k, w in enumerate(working)}
    coef = np.zeros(working.size)
    for idx, c in zip(warm.sv_indices, warm.dual_coef):
        k = pos.get(int(idx))
        if k is None:
            log.debug("warm start ignored: support vector %d not in working set", idx)
            return None
        coef[k] = c
    return coef


def _finish(task, ds, working, kernel, C, eps, coef, bias, obj, it, conv, gap, trace):
    nz = np.flatnonzero(coef)
    sv = working[nz]
    order = np.argsort(sv, kind="stable")
    sv, c = sv[order], coef[nz][order]
    model = SvmModel(
        task=task,
        kernel=kernel,
        sv_indices=sv,
        dual_coef=c,
        bias=bias,
        C=float(C),
        sv_vectors=ds.X[sv],
        epsilon_tube=float(eps),
    )
    if not conv:
        log.warning("SMO hit its iteration cap after %d steps (gap %.3g)", it, gap)
    return SolveOutcome(model, obj, it, conv, gap, working, trace or [])


def solve_csvc(
    ds: SparseDataset,
    working,
    kernel: KernelSpec,
    C: float,
    warm_start: SvmModel | None = None,
    kkt_tol: float = 1e-3,
    cache: KernelCache | None = None,
    max_iter: int | None = None,
    track_objective: bool = False,
) -> SolveOutcome:
    """Solve the soft-margin classification dual restricted to ``working``.

    Raises
    ------
    DegenerateModelError
        If the working set contains only one class.
    """
    working = _check_common(ds, working, C, kkt_tol)
    y = ds.y[working]
    if not np.all(np.abs(y) == 1):
        raise ValueError("classification labels must be +1 or -1")
    if np.all(y > 0) or np.all(y < 0):
        raise DegenerateModelError("working set holds a single class")
    wk = WorkingKernel(kernel, ds, working, cache)
    KD = wk.diag()

    def k_row(t):
        return wk.row(working[t])

    alpha = np.zeros(working.size)
    coef = _warm_coefs(warm_start, working, kernel, C)
    if coef is not None:
        alpha = np.clip(coef * y, 0.0, C)
    p = -np.ones(working.size)
    trace = [] if track_objective else None
    if max_iter is None:
        max_iter = _ITER_PER_VAR * working.size
    alpha, G, it, conv, gap = _smo(k_row, p, y, C, KD, alpha, kkt_tol, max_iter, trace)
    obj = -0.5 * float(alpha @ (G + p))
    bias = _bias(alpha, G, y, C)
    return _finish(CLASSIFY, ds, working, kernel, C, 0.0, alpha * y, bias, obj, it, conv, gap, trace)


def solve_svr(
    ds: SparseDataset,
    working,
    kernel: KernelSpec,
    C: float,
    epsilon_tube: float,
    warm_start: SvmModel | None = None,
    kkt_tol: float = 1e-3,
    cache: KernelCache | None = None,
    max_iter: int | None = None,
    track_objective: bool = False,
) -> SolveOutcome:
    """Solve the epsilon-tube regression dual restricted to ``working``."""
    working = _check_common(ds, working, C, kkt_tol)
    if not epsilon_tube >= 0:
        raise ValueError("tube width must be non-negative")
    m = working.size
    y = ds.y[working]
    wk = WorkingKernel(kernel, ds, working, cache)
    kd = wk.diag()
    KD = np.concatenate([kd, kd])
    s = np.concatenate([np.ones(m), -np.ones(m)])

    tiled = {}

    def k_row(t):
        t %= m
        row = tiled.get(t)
        if row is None:
            row = wk.row(working[t])
            row = np.concatenate([row, row])
            if len(tiled) < wk.cache.capacity // 2:
                tiled[t] = row
        return row

    alpha = np.zeros(2 * m)
    coef = _warm_coefs(warm_start, working, kernel, C)
    if coef is not None:
        alpha[:m] = np.clip(coef, 0.0, C)
        alpha[m:] = np.clip(-coef, 0.0, C)
    p = np.concatenate([epsilon_tube - y, epsilon_tube + y])
    trace = [] if track_objective else None
    if max_iter is None:
        max_iter = _ITER_PER_VAR * 2 * m
    alpha, G, it, conv, gap = _smo(k_row, p, s, C, KD, alpha, kkt_tol, max_iter, trace)
    # a+ and a- of one example both positive: shift both down, which leaves
    # Q a (hence G) unchanged and lowers the objective by 2 eps min(a+, a-)
    both = np.minimum(alpha[:m], alpha[m:])
    if np.any(both > 0):
        alpha[:m] -= both
        alpha[m:] -= both
    obj = -0.5 * float(alpha @ (G + p))
    bias = _bias(alpha, G, s, C)
    coef = alpha[:m] - alpha[m:]
    return _finish(REGRESS, ds, working, kernel, C, epsilon_tube, coef, bias, obj, it, conv, gap, trace)


def solve(ds, working, kernel, C, task=CLASSIFY, epsilon_tube=0.0, **kw) -> SolveOutcome:
    if task == CLASSIFY:
        return solve_csvc(ds, working, kernel, C, **kw)
    if task == REGRESS:
        return solve_svr(ds, working, kernel, C, epsilon_tube, **kw)
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------- prediction

_CHUNK = 4096


def _pad_cols(A, d):
    if A.shape[1] == d:
        return A
    if sparse.issparse(A):
        A = A.copy()
        A.resize((A.shape[0], d))
        return A
    out = np.zeros((A.shape[0], d))
    out[:, : A.shape[1]] = A
    return out


def decision_function(model: SvmModel, X, x_sq=None) -> np.ndarray:
    """Decision values for every row of ``X`` (a dataset, CSR or dense array)."""
    if isinstance(X, SparseDataset):
        X, x_sq = X.features, X.sq_norms
    n = X.shape[0]
    out = np.full(n, model.bias, dtype=np.float64)
    if model.n_sv == 0 or n == 0:
        return out
    if x_sq is None:
        x_sq = (
            np.asarray(X.multiply(X).sum(axis=1)).reshape(-1)
            if sparse.issparse(X)
            else np.einsum("ij,ij->i", X, X)
        )
    d = max(X.shape[1], model.sv_vectors.shape[1])
    S = _pad_cols(model._sv_feats, d)
    X = _pad_cols(X, d)
    for lo in range(0, n, _CHUNK):
        hi = min(n, lo + _CHUNK)
        K = gram(model.kernel, X[lo:hi], S, x_sq[lo:hi], model._sv_sq)
        out[lo:hi] += K @ model.dual_coef
    return out


def predict(model: SvmModel, x) -> float:
    """Raw decision value ``f(x)`` for one sparse vector."""
    idx, val = as_sparse_vector(x)
    row = vectors_to_csr([(idx, val)], d=max(int(idx[-1]) if idx.size else 0, 1))
    return float(decision_function(model, row)[0])


def violation_mask(model: SvmModel, y, f, tol) -> np.ndarray:
    """Margin (classification) or tube (regression) violation per point."""
    if model.task == CLASSIFY:
        return y * f < 1.0 - tol
    return np.abs(f - y) > model.epsilon_tube + tol


def violates(model: SvmModel, ds: SparseDataset, i: int, tol: float = 1e-3) -> bool:
    """KKT check for a point whose dual coefficient is zero."""
    f = decision_function(model, ds.features[i : i + 1], ds.sq_norms[i : i + 1])
    return bool(violation_mask(model, ds.y[i : i + 1], f, tol)[0])


def kkt_violations(model: SvmModel, ds: SparseDataset, tol: float = 1e-3) -> np.ndarray:
    """Indices of all training points that break their KKT condition.

    Zero-coefficient points must sit outside the margin (or inside the
    tube); free support vectors on it; bounded ones on or inside it.
    """
    f = decision_function(model, ds)
    coef = np.zeros(ds.n)
    coef[model.sv_indices] = model.dual_coef
    a = np.abs(coef)
    C = model.C
    if model.task == CLASSIFY:
        m = ds.y * f
        zero = (a == 0) & (m < 1 - tol)
        free = (a > 0) & (a < C) & (np.abs(m - 1) > tol)
        bound = (a >= C) & (m > 1 + tol)
        return np.flatnonzero(zero | free | bound)
    r = f - ds.y  # coef > 0 pushes f up, so it belongs to points with y above f
    eps = model.epsilon_tube
    zero = (a == 0) & (np.abs(r) > eps + tol)
    free = (a > 0) & (a < C) & (np.abs(-np.sign(coef) * r - eps) > tol)
    bound = (a >= C) & (-np.sign(coef) * r < eps - tol)
    return np.flatnonzero(zero | free | bound)


# ---------------------------------------------------------------- model files

MAGIC = "randsvm-model"
VERSION = "v1"


def _fmt(v):
    return format(float(v), ".17g")


def save_model(model: SvmModel, path) -> None:
    """Write the plain-text model format.

    Header ``randsvm-model v1 <task> <kernel> <params> <C> <bias> <nsv>``
    where ``<task>`` is ``classify`` or ``regress:<eps>``, then one line per
    support vector: ``<index> <coef> <i:v> ...`` with the SV's features.
    """
    task = CLASSIFY if model.task == CLASSIFY else f"{REGRESS}:{_fmt(model.epsilon_tube)}"
    head = [MAGIC, VERSION, task, model.kernel.family, model.kernel.params_token(),
            _fmt(model.C), _fmt(model.bias), str(model.n_sv)]
    X = model.sv_vectors
    with open(path, "w", newline="\n") as fh:
        fh.write(" ".join(head) + "\n")
        for k in range(model.n_sv):
            lo, hi = X.indptr[k], X.indptr[k + 1]
            feats = " ".join(f"{j + 1}:{_fmt(v)}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
            line = f"{model.sv_indices[k]} {_fmt(model.dual_coef[k])}"
            fh.write(f"{line} {feats}\n" if feats else line + "\n")


def load_model(path) -> SvmModel:
    with open(path, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty model file")
    head = lines[0].split()
    if len(head) != 8 or head[0] != MAGIC or head[1] != VERSION:
        raise ValueError(f"{path}: not a {MAGIC} {VERSION} file")
    task_tok, family, params, C, bias, nsv = head[2:]
    if task_tok == CLASSIFY:
        task, eps = CLASSIFY, 0.0
    elif task_tok.startswith(REGRESS + ":"):
        task, eps = REGRESS, float(task_tok.split(":", 1)[1])
    else:
        raise ValueError(f"{path}: bad task token {task_tok!r}")
    if family == "linear":
        kernel = KernelSpec.linear()
    elif params.startswith("sigma="):
        kernel = KernelSpec.gaussian(float(params[len("sigma="):]))
    else:
        raise ValueError(f"{path}: bad kernel parameters {params!r}")
    nsv = int(nsv)
    body = lines[1:]
    if len(body) != nsv:
        raise ValueError(f"{path}: header promises {nsv} support vectors, found {len(body)}")
    idx, coef, vecs = [], [], []
    for ln in body:
        toks = ln.split()
        idx.append(int(toks[0]))
        coef.append(float(toks[1]))
        pairs = [t.split(":") for t in toks[2:]]
        vecs.append([(int(a), float(b)) for a, b in pairs])
    X = vectors_to_csr(vecs) if vecs else sparse.csr_matrix((0, 0))
    return SvmModel(task, kernel, np.array(idx, dtype=np.intp), np.array(coef), float(bias),
                    float(C), X, eps)
