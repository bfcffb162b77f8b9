"""Monte-Carlo checks of Gaussian random projections.

A projection maps ``u`` in R^d to ``R^T u / sqrt(k)`` with ``R`` a ``d x k``
matrix of independent N(0, 1) entries. The checks count how often norms,
dot products and SVM margins are distorted beyond the stated slack and
report the count next to the closed-form failure bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .bounds import margin_term
from .dataset import SparseDataset, from_dense
from .kernels import KernelSpec
from .smo import DegenerateModelError, solve_csvc

HARD_MARGIN_C = 1e6


@dataclass(frozen=True)
class ProjectionMatrix:
    entries: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2 or not np.all(np.isfinite(self.entries)):
            raise ValueError("projection entries must be a finite 2-D array")

    @classmethod
    def draw(cls, d, k, seed=None):
        if d < 1 or k < 1:
            raise ValueError("dimensions must be >= 1")
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((d, k)))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def k(self) -> int:
        return self.entries.shape[1]

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.k)


def project(R: ProjectionMatrix, u) -> np.ndarray:
    """``R^T u / sqrt(k)``; ``u`` may be one vector or rows of a matrix."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != R.d:
        raise ValueError(f"expected last dimension {R.d}, got {u.shape[-1]}")
    return (u @ R.entries) * R.scale


@dataclass(frozen=True)
class TrialSummary:
    check: str
    trials: int
    failures: int
    bound: float
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def empirical_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    def slack(self) -> float:
        """Monte-Carlo allowance ``3 sqrt(bound / trials)``."""
        return 3.0 * math.sqrt(max(self.bound, 0.0) / self.trials) if self.trials else 0.0

    def within_bound(self) -> bool:
        return self.empirical_rate <= self.bound + self.slack()

    def csv_row(self) -> str:
        return f"{self.check},{self.trials},{self.failures},{self.empirical_rate:.6g},{self.bound:.6g}"


def norm_failure_bound(eps_jl, k) -> float:
    return 2.0 * math.exp(-(eps_jl**2 - eps_jl**3) * k / 4.0)


def dot_failure_bound(eps_jl, k) -> float:
    return 4.0 * math.exp(-(eps_jl**2) * k / 8.0)


def _check_eps(eps_jl):
    if not 0.0 < eps_jl < 1.0:
        raise ValueError(f"eps_jl must lie in (0, 1), got {eps_jl}")


def _check_trials(d, k, trials):
    if d < 1 or k < 1:
        raise ValueError("dimensions must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")


def _projected(vectors, k, rng, full_matrix):
    """Columns of ``R^T V / sqrt(k)`` for one fresh Gaussian ``R``.

    Only ``R^T V`` is observed, so by default the draw is restricted to
    span(V): with ``Q`` an orthonormal basis of that span, ``Q^T R`` is
    itself a matrix of independent N(0, 1) entries. ``full_matrix`` draws
    all ``d x k`` entries instead; the two have the same distribution.
    """
    d = vectors.shape[0]
    if full_matrix:
        return project(ProjectionMatrix.draw(d, k, rng), vectors.T).T
    Q, B = np.linalg.qr(vectors)
    return rng.standard_normal((k, Q.shape[1])) @ B / math.sqrt(k)


def _fixed_unit(d, seed):
    u = np.random.default_rng(seed).standard_normal(d)
    return u / np.linalg.norm(u)


def check_norm_preservation(d, k, eps_jl, trials, seed, u=None, full_matrix=False) -> TrialSummary:
    """Count trials where ``|u'|^2`` leaves ``[(1 - eps) |u|^2, (1 + eps) |u|^2]``.

    Trial ``t`` uses the stream ``default_rng([seed, t])``; ``u`` defaults
    to a fixed random unit vector.
    """
    _check_eps(eps_jl)
    _check_trials(d, k, trials)
    u = _fixed_unit(d, seed) if u is None else np.asarray(u, dtype=np.float64)
    sq = float(u @ u)
    V = u[:, None]
    fails = 0
    for t in range(trials):
        p = _projected(V, k, np.random.default_rng([seed, t]), full_matrix)[:, 0]
        psq = float(p @ p)
        fails += not ((1 - eps_jl) * sq <= psq <= (1 + eps_jl) * sq)
    return TrialSummary("norm", trials, fails, norm_failure_bound(eps_jl, k))


def check_dot_preservation(d, k, eps_jl, trials, seed, u=None, v=None, full_matrix=False) -> TrialSummary:
    """Count trials where ``|u'.v' - u.v| > (eps / 2) (|u|^2 + |v|^2)``.

    ``u`` and ``v`` default to fixed orthogonal unit vectors.
    """
    _check_eps(eps_jl)
    _check_trials(d, k, trials)
    if u is None or v is None:
        Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, 2)))
        u = Q[:, 0] if u is None else u
        v = Q[:, 1] if v is None else v
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dot = float(u @ v)
    slack = 0.5 * eps_jl * float(u @ u + v @ v)
    V = np.column_stack([u, v])
    fails = 0
    for t in range(trials):
        P = _projected(V, k, np.random.default_rng([seed, t]), full_matrix)
        fails += abs(float(P[:, 0] @ P[:, 1]) - dot) > slack
    return TrialSummary("dot", trials, fails, dot_failure_bound(eps_jl, k))


def separable(X, y) -> bool:
    """Whether some ``(w, b)`` gives ``y_i (w.x_i + b) >= 1`` for every point (LP feasibility)."""
    n, d = X.shape
    A = -y[:, None] * np.column_stack([X, np.ones(n)])
    res = linprog(np.zeros(d + 1), A_ub=A, b_ub=-np.ones(n), bounds=[(None, None)] * (d + 1),
                  method="highs")
    return res.status == 0


def hard_margin(X, y) -> tuple[float, np.ndarray, float]:
    """Geometric margin ``1 / |w|`` of the hard-margin separator, with ``(w, b)``.

    Non-separable points get margin 0 and a zero separator. Separable ones
    are solved by SMO with a box large enough to stay inactive.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not separable(X, y):
        return 0.0, np.zeros(X.shape[1]), 0.0
    ds = from_dense(X, y)
    out = solve_csvc(ds, np.arange(ds.n), KernelSpec.linear(), HARD_MARGIN_C, kkt_tol=1e-6)
    model = out.model
    w = model.linear_weights()
    if w.size < X.shape[1]:
        w = np.concatenate([w, np.zeros(X.shape[1] - w.size)])
    norm = float(np.linalg.norm(w))
    return (1.0 / norm if norm > 0 else 0.0), w, model.bias


def margin_instance(n, d, seed, margin=0.5, spread=0.2, noise=0.5) -> SparseDataset:
    """Separable points with norm at most about one and margin at least ``margin``.

    Each point is ``y (margin + U(0, spread)) e`` for a random unit ``e``
    plus a component orthogonal to ``e`` of norm at most ``noise``.
    """
    if n < 2 or d < 2:
        raise ValueError("need n >= 2 and d >= 2")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(d)
    e /= np.linalg.norm(e)
    y = rng.permutation(np.where(np.arange(n) < (n + 1) // 2, 1.0, -1.0))
    Z = rng.standard_normal((n, d))
    Z -= np.outer(Z @ e, e)
    Z *= (noise * rng.uniform(0, 1, n) / np.linalg.norm(Z, axis=1))[:, None]
    X = Z + np.outer(y * (margin + spread * rng.uniform(0, 1, n)), e)
    return from_dense(X, y)


def check_margin_preservation(ds: SparseDataset, gamma, delta, trials, seed, k=None) -> TrialSummary:
    """Count projection trials whose hard margin drops below ``l* (1 - gamma)``.

    ``l*`` comes from a hard-margin solve on the original data. ``k``
    defaults to ``(8 / gamma^2) (1 + (1 + L^2) / (2 l*))^2 ln(4n / delta)``.
    The bound field is ``delta``.

    Raises
    ------
    ValueError
        If the data are not linearly separable.
    """
    if not 0 < gamma < 1 or not 0 < delta < 1:
        raise ValueError("gamma and delta must lie in (0, 1)")
    if not ds.is_classification:
        raise ValueError("margin check needs +1/-1 labels")
    X = ds.X.toarray()
    y = ds.y
    try:
        l_star, _, _ = hard_margin(X, y)
    except DegenerateModelError:
        raise ValueError("margin check needs both classes") from None
    if l_star == 0:
        raise ValueError("data are not linearly separable")
    L = float(np.sqrt(ds.sq_norms.max()))
    if k is None:
        k = math.ceil(margin_term(gamma, delta, ds.n, L, l_star))
    threshold = l_star * (1 - gamma)
    margins = []
    fails = 0
    for t in range(trials):
        R = ProjectionMatrix.draw(X.shape[1], k, np.random.default_rng([seed, t]))
        l_p, _, _ = hard_margin(project(R, X), y)
        margins.append(l_p)
        fails += l_p < threshold
    return TrialSummary("margin", trials, fails, float(delta),
                        extra={"k": k, "l_star": l_star, "margins": np.array(margins)})


def orthogonal_extension(w_p, b, d) -> tuple[np.ndarray, float]:
    """Pad a ``k``-dimensional separator with zeros up to dimension ``d``."""
    w_p = np.asarray(w_p, dtype=np.float64).reshape(-1)
    if w_p.size > d:
        raise ValueError(f"cannot extend a {w_p.size}-vector to dimension {d}")
    w = np.zeros(d)
    w[: w_p.size] = w_p
    return w, float(b)
