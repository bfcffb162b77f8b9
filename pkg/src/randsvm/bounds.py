"""Support-vector count estimates and subset-size plans.

All logarithms are natural: every bound inverts a failure probability of
the form ``n * 4 * exp(-c k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import DatasetStats

SEPARABLE = "separable"
NONSEPARABLE = "nonseparable"
REGRESSION = "regression"
KINDS = (SEPARABLE, NONSEPARABLE, REGRESSION)

DEFAULT_C_MULT = 2.0


def _open_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")


def _check_n(n):
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


def _kappa(kappa):
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return kappa


def margin_term(gamma, delta, n, L, margin_lb) -> float:
    """``(8 / gamma^2) (1 + (1 + L^2) / (2 l))^2 ln(4n / delta)`` before rounding."""
    _open_unit("gamma", gamma)
    _open_unit("delta", delta)
    _check_n(n)
    if not margin_lb > 0:
        raise ValueError("margin lower bound must be positive")
    if L < 0:
        raise ValueError("L must be non-negative")
    return (8.0 / gamma**2) * (1.0 + (1.0 + L * L) / (2.0 * margin_lb)) ** 2 * math.log(4.0 * n / delta)


def estimate_k_margin(gamma, delta, n, L, margin_lb, kappa=0.0) -> int:
    """Support vectors needed to keep the margin within a factor ``1 - gamma``.

    ``margin_lb`` lower-bounds the optimal margin; ``kappa * n`` points are
    allowed on the wrong side for almost separable data.
    """
    return math.ceil(margin_term(gamma, delta, n, L, margin_lb) + _kappa(kappa) * n)


def eps_term(eps_jl, delta, n) -> float:
    """``(16 / eps^2) ln(4n / delta)`` before rounding."""
    _open_unit("eps_jl", eps_jl)
    _open_unit("delta", delta)
    _check_n(n)
    return 16.0 / eps_jl**2 * math.log(4.0 * n / delta)


def estimate_k_from_eps(eps_jl, delta, n) -> int:
    return math.ceil(eps_term(eps_jl, delta, n))


def estimate_k_nonsep(eps_jl, delta, n) -> int:
    """Twice the separable estimate, used for non-separable data and regression."""
    return math.ceil(2.0 * eps_term(eps_jl, delta, n))


def regression_term(gamma, delta, n, L, W, tube_eps) -> float:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    _open_unit("delta", delta)
    _check_n(n)
    if not tube_eps > 0:
        raise ValueError("tube width must be positive; the bound diverges at 0")
    if not W > 0:
        raise ValueError("W must be positive")
    return 2.0 * ((W * W + L * L) / (gamma * tube_eps)) ** 2 * math.log(4.0 * n / delta)


def estimate_k_regression(gamma, delta, n, L, W, tube_eps, kappa=0.0) -> int:
    """Support vectors needed to keep an epsilon tube within ``eps (1 + gamma)``."""
    return math.ceil(regression_term(gamma, delta, n, L, W, tube_eps) + _kappa(kappa) * n)


@dataclass(frozen=True)
class SamplePlan:
    k: int
    r: int
    c: float
    delta: float
    n: int
    max_norm: float
    kind: str = NONSEPARABLE
    gamma: float | None = None
    eps_jl: float | None = None
    kappa: float = 0.0
    margin_lb: float | None = None
    tube_eps: float | None = None
    w_norm: float | None = None
    k_raw: int | None = None
    clamped: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.r < self.k:
            raise ValueError("r must be >= k")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.gamma is not None and self.kind != REGRESSION and not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")


def default_kappa(n) -> float:
    """``ln(n) / n``: the almost-separable fraction when nothing better is known."""
    return math.log(n) / n if n > 1 else 0.0


def make_plan(
    kind: str,
    stats: DatasetStats,
    *,
    eps_jl=None,
    delta=0.9,
    gamma=None,
    margin_lb=None,
    kappa=None,
    tube_eps=None,
    w_norm=None,
    c=DEFAULT_C_MULT,
    k_override=None,
) -> SamplePlan:
    """Pick the estimator for ``kind`` and size the working subset.

    separable / nonseparable
        ``gamma`` with ``margin_lb`` selects the margin bound; otherwise
        ``eps_jl`` selects the 16/eps^2 (separable) or 32/eps^2 bound.
    regression
        ``gamma`` with ``tube_eps`` selects the tube bound (``W`` defaults
        to ``1 / tube_eps``); otherwise ``eps_jl`` selects 32/eps^2.

    ``k_override`` skips the estimators. ``r = ceil(c k)`` (never below
    ``k``), and both are clamped to ``n`` with ``clamped`` set.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown plan kind {kind!r}")
    if not c > 0:
        raise ValueError(f"multiplier c must be > 0, got {c}")
    _open_unit("delta", delta)
    n = stats.n
    L = stats.max_norm
    if margin_lb is not None and gamma is None:
        raise ValueError("margin_lb needs gamma")
    if kind != REGRESSION and (tube_eps is not None or w_norm is not None):
        raise ValueError("tube_eps / w_norm only apply to regression plans")
    if kind == REGRESSION and margin_lb is not None:
        raise ValueError("margin_lb does not apply to regression plans")

    if kappa is None:
        kappa = default_kappa(n) if kind == NONSEPARABLE else 0.0

    if k_override is not None:
        k_raw = int(k_override)
        if k_raw < 1:
            raise ValueError("k override must be >= 1")
    elif kind == REGRESSION and gamma is not None:
        if tube_eps is None:
            raise ValueError("regression plan with gamma needs tube_eps")
        if w_norm is None:
            w_norm = 1.0 / tube_eps
        k_raw = estimate_k_regression(gamma, delta, n, L, w_norm, tube_eps, kappa)
    elif kind != REGRESSION and gamma is not None:
        if margin_lb is None:
            raise ValueError("gamma without margin_lb: the margin bound needs both")
        k_raw = estimate_k_margin(gamma, delta, n, L, margin_lb, kappa)
    elif eps_jl is not None:
        if kind == SEPARABLE:
            k_raw = estimate_k_from_eps(eps_jl, delta, n)
        else:
            k_raw = estimate_k_nonsep(eps_jl, delta, n)
    else:
        raise ValueError(f"{kind} plan needs eps_jl, gamma parameters, or k_override")

    k = min(k_raw, n)
    r = max(math.ceil(c * k), k)
    clamped = k_raw > n or r > n
    r = min(r, n)
    return SamplePlan(
        k=k, r=r, c=float(c), delta=delta, n=n, max_norm=L, kind=kind,
        gamma=gamma, eps_jl=eps_jl, kappa=kappa, margin_lb=margin_lb,
        tube_eps=tube_eps, w_norm=w_norm, k_raw=k_raw, clamped=clamped,
    )
