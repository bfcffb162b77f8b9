"""Dense reference solver for small SVM duals.

Slow on purpose: it forms the full dual matrix, computes Gaussian kernels
from explicit coordinate differences, and runs projected-gradient ascent
with an exact projection onto the box intersected with the hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SparseDataset
from .kernels import GAUSSIAN, KernelSpec

MAX_DENSE = 500


@dataclass
class DenseQP:
    """maximize ``linear @ a - a @ Q @ a / 2`` over ``box_lo <= a <= box_hi``, ``eq_coef @ a = eq_rhs``."""

    Q: np.ndarray
    linear: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    eq_coef: np.ndarray
    eq_rhs: float = 0.0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=np.float64)
        n = self.Q.shape[0]
        for name in ("linear", "box_lo", "box_hi", "eq_coef"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if v.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            setattr(self, name, v)
        if self.Q.shape != (n, n) or not np.allclose(self.Q, self.Q.T, rtol=0, atol=1e-12):
            raise ValueError("Q must be square and symmetric")
        if np.any(self.box_lo > self.box_hi):
            raise ValueError("box_lo exceeds box_hi")

    def objective(self, a) -> float:
        return float(self.linear @ a - 0.5 * a @ (self.Q @ a))


def _dense_kernel(kernel: KernelSpec, X):
    if kernel.family == GAUSSIAN:
        diff = X[:, None, :] - X[None, :, :]
        return np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * kernel.sigma**2))
    return X @ X.T


def build_dual(ds: SparseDataset, working, kernel: KernelSpec, C, task="classify", epsilon_tube=0.0):
    """Dense form of the classification or epsilon-tube regression dual.

    For regression the variables are ``(a+, a-)`` stacked, giving
    ``2 * len(working)`` unknowns.
    """
    working = np.asarray(working, dtype=np.intp)
    m = working.size
    if m > MAX_DENSE:
        raise ValueError(f"dense oracle limited to {MAX_DENSE} points, got {m}")
    X = ds.X[working].toarray()
    y = ds.y[working].astype(np.float64)
    K = _dense_kernel(kernel, X)
    if task == "classify":
        Q = (y[:, None] * y[None, :]) * K
        return DenseQP(Q, np.ones(m), np.zeros(m), np.full(m, float(C)), y, 0.0)
    if task == "regress":
        Q = np.block([[K, -K], [-K, K]])
        linear = np.concatenate([y - epsilon_tube, -y - epsilon_tube])
        eq = np.concatenate([np.ones(m), -np.ones(m)])
        return DenseQP(Q, linear, np.zeros(2 * m), np.full(2 * m, float(C)), eq, 0.0)
    raise ValueError(f"unknown task {task!r}")


def project(qp: DenseQP, z) -> np.ndarray:
    """Euclidean projection of ``z`` onto the feasible set.

    The minimizer is ``clip(z - lam * c, lo, hi)`` where ``lam`` solves
    ``h(lam) = c @ clip(z - lam * c, lo, hi) = rhs``. ``h`` is piecewise
    linear and nonincreasing; its values at the sorted breakpoints come
    from cumulative slopes, a binary search brackets ``lam`` and linear
    interpolation inside the bracket finishes exactly.
    """
    z = np.asarray(z, dtype=np.float64)
    c, lo, hi, rhs = qp.eq_coef, qp.box_lo, qp.box_hi, qp.eq_rhs
    active = c != 0
    if not active.any():
        if abs(rhs) > 1e-12:
            raise ValueError("infeasible equality constraint")
        return np.minimum(np.maximum(z, lo), hi)
    ca, za = c[active], z[active]
    b1, b2 = (za - hi[active]) / ca, (za - lo[active]) / ca
    enter, leave = np.minimum(b1, b2), np.maximum(b1, b2)
    # far left every coordinate sits at the bound that c points towards
    h_left = float(ca @ np.where(ca > 0, hi[active], lo[active]))
    bps = np.concatenate([enter, leave])
    dslope = np.concatenate([-ca * ca, ca * ca])
    order = np.argsort(bps, kind="stable")
    bps, dslope = bps[order], dslope[order]
    slope = np.cumsum(dslope)  # slope of h just right of each breakpoint
    hv = np.empty(bps.size)
    hv[0] = h_left
    hv[1:] = h_left + np.cumsum(slope[:-1] * np.diff(bps))
    scale = max(1.0, float(np.abs(ca).sum() * np.abs(np.concatenate([lo, hi])).max()))
    if rhs > hv[0] + 1e-12 * scale or rhs < hv[-1] - 1e-12 * scale:
        raise ValueError("infeasible equality constraint")
    # hv is nonincreasing: find the last breakpoint with hv >= rhs
    k = int(np.searchsorted(-hv, -rhs, side="right")) - 1
    if k < 0:
        lam = bps[0]
    elif k >= bps.size - 1 or slope[k] == 0:
        lam = bps[min(k, bps.size - 1)]
    else:
        lam = min(max(bps[k] + (hv[k] - rhs) / -slope[k], bps[k]), bps[k + 1])
    return np.minimum(np.maximum(z - lam * c, lo), hi)


class OracleDidNotConverge(ArithmeticError):
    pass


def solve_dense(qp: DenseQP, tol=1e-6, max_iter=1_000_000, trace=None):
    """Projected-gradient ascent to a stationary point of the dense dual.

    Accelerated steps of length ``1/L`` (``L`` the top eigenvalue of ``Q``)
    in the monotone FISTA form: a trial point is accepted only when it does
    not lower the objective, and momentum restarts whenever it is rejected.
    Stops when ``|P(a + g) - a| <= tol * max(1, max|a|)`` with ``g`` the
    gradient at ``a``.

    Returns
    -------
    alpha : ndarray
    objective : float

    Raises
    ------
    OracleDidNotConverge
        After ``max_iter`` steps, or once plain gradient steps from the
        current point are rejected repeatedly (rounding floor reached above
        the tolerance).
    """
    Q, lin = qp.Q, qp.linear
    L = float(np.linalg.eigvalsh(Q)[-1]) if lin.size else 0.0
    step = 1.0 / L if L > 0 else 1.0
    a = project(qp, np.zeros(lin.size))
    v, t = a, 1.0
    stalls = 0
    for _ in range(max_iter):
        g = lin - Q @ a
        residual = np.linalg.norm(project(qp, a + g) - a)
        if residual <= tol * max(1.0, float(np.max(np.abs(a), initial=0.0))):
            return a, qp.objective(a)
        restarted = v is a
        z = project(qp, v + step * (lin - Q @ v))
        s = z - a
        # objective change from the step itself; differencing two large
        # objective values would drown it in cancellation error
        gain = float(g @ s) - 0.5 * float(s @ (Q @ s))
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if gain >= 0:
            v = z + ((t - 1.0) / t_next) * s
            a = z
            t = t_next
            stalls = 0
        else:
            v, t = a, 1.0
            stalls += restarted
            if stalls >= 50:
                raise OracleDidNotConverge(f"stalled at projected-gradient norm {residual:.3g}")
        if trace is not None:
            trace.append(qp.objective(a))
    raise OracleDidNotConverge(f"no convergence within {max_iter} iterations")
