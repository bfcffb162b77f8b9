"""Randomized outer loops that grow a small working set until no point violates.

Both loops call the SMO solver on a subset and scan the rest of the data
for KKT violators. ``train_violator_resampling`` keeps the support vectors
and refills the working set from the violators. ``train_weighted_resampling``
draws independent weighted samples and doubles the weight of violators
when they are light enough.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import SamplePlan
from .dataset import SparseDataset, uniform_sample, weighted_sample
from .kernels import KernelSpec
from .smo import CLASSIFY, REGRESS, DegenerateModelError, SvmModel, decision_function, solve, violation_mask

log = logging.getLogger(__name__)

NO_VIOLATORS = "noViolators"
SV_BUDGET = "svBudgetExceeded"
ITER_CAP = "iterCap"
DEGENERATE = "degenerate"

_DEGENERATE_RETRIES = 5
CSV_HEADER = ("iter", "working", "sv", "violators", "objective", "ms")


@dataclass(frozen=True)
class TrainConfig:
    plan: SamplePlan
    C: float
    kernel: KernelSpec
    kkt_tol: float = 1e-3
    viol_tol: float = 1e-3
    max_outer_iters: int = 200
    seed: int = 0
    scan_parallelism: int = 1
    task: str = CLASSIFY
    tube_eps: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be positive")
        if not self.viol_tol >= 0:
            raise ValueError("viol_tol must be non-negative")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.scan_parallelism < 1:
            raise ValueError("scan_parallelism must be >= 1")
        if self.task not in (CLASSIFY, REGRESS):
            raise ValueError(f"unknown task {self.task!r}")
        if self.tube_eps < 0:
            raise ValueError("tube_eps must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    working_size: int
    sv_count: int
    violator_count: int
    dual_objective: float
    wall_ms: float = field(compare=False)
    doubled: bool = False


@dataclass
class TrainReport:
    """Outcome of one training run.

    Equality ignores wall-clock times, so two runs with the same data,
    configuration and seed compare equal.
    """

    iterations: list
    termination: str
    final_model: SvmModel | None
    final_working: np.ndarray | None = None
    weight_doublings: int = 0
    skipped_updates: int = 0
    global_violators: int | None = None

    @property
    def dual_objective(self) -> float:
        return self.iterations[-1].dual_objective if self.iterations else math.nan

    @property
    def train_ms(self) -> float:
        return sum(rec.wall_ms for rec in self.iterations)

    def __eq__(self, other):
        if not isinstance(other, TrainReport):
            return NotImplemented
        same_model = _models_equal(self.final_model, other.final_model)
        return (
            self.iterations == other.iterations
            and self.termination == other.termination
            and same_model
            and self.weight_doublings == other.weight_doublings
            and self.skipped_updates == other.skipped_updates
            and self.global_violators == other.global_violators
        )

    def write_csv(self, fh) -> None:
        """One row per outer iteration under ``iter,working,sv,violators,objective,ms``."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, rec in enumerate(self.iterations, 1):
            w.writerow([t, rec.working_size, rec.sv_count, rec.violator_count,
                        format(rec.dual_objective, ".17g"), f"{rec.wall_ms:.3f}"])


def _models_equal(a, b):
    if a is None or b is None:
        return a is b
    return (
        a.task == b.task and a.kernel == b.kernel and a.bias == b.bias and a.C == b.C
        and np.array_equal(a.sv_indices, b.sv_indices)
        and np.array_equal(a.dual_coef, b.dual_coef)
    )


def scan_violators(model: SvmModel, ds: SparseDataset, exclude=(), tol: float = 1e-3,
                   parallelism: int = 1) -> np.ndarray:
    """Ascending indices outside ``exclude`` that violate the zero-coefficient KKT condition.

    With ``parallelism > 1`` disjoint index ranges are scanned on a thread
    pool; the merged result does not depend on the degree.
    """
    keep = np.ones(ds.n, dtype=bool)
    keep[np.asarray(exclude, dtype=np.intp)] = False
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return idx

    def scan(chunk):
        f = decision_function(model, ds.features[chunk], ds.sq_norms[chunk])
        return chunk[violation_mask(model, ds.y[chunk], f, tol)]

    if parallelism <= 1 or idx.size < 2 * parallelism:
        return scan(idx)
    chunks = np.array_split(idx, parallelism)
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        parts = list(pool.map(scan, chunks))
    return np.concatenate(parts)


def _solve(ds, working, cfg, warm=None):
    return solve(ds, working, cfg.kernel, cfg.C, task=cfg.task, epsilon_tube=cfg.tube_eps,
                 warm_start=warm, kkt_tol=cfg.kkt_tol)


def _check_inputs(ds, cfg):
    if ds.n == 0:
        raise ValueError("empty dataset")
    if cfg.plan.r > ds.n:
        raise ValueError(f"plan sample size r={cfg.plan.r} exceeds n={ds.n}")
    if cfg.task == CLASSIFY and not ds.is_classification:
        raise ValueError("classification needs +1/-1 labels")


def _initial_solve(ds, cfg, draw):
    """Solve on a fresh sample, redrawing when it holds a single class."""
    for attempt in range(_DEGENERATE_RETRIES + 1):
        S = draw()
        t0 = time.perf_counter()
        try:
            return S, _solve(ds, S, cfg), t0
        except DegenerateModelError:
            log.info("single-class sample (attempt %d), redrawing", attempt + 1)
    return None, None, None


def _ms(t0):
    return (time.perf_counter() - t0) * 1e3


def train_violator_resampling(ds: SparseDataset, cfg: TrainConfig) -> TrainReport:
    """Keep the support vectors and top the working set up with sampled violators.

    Each round solves on ``SV + R`` where ``R`` is a random subset of the
    current violators of size ``r - |SV|`` (all of them when fewer), warm
    starting from the previous coefficients. Stops when no point outside
    the working set violates, when ``|SV|`` reaches ``k`` or at the
    iteration cap.
    """
    _check_inputs(ds, cfg)
    plan = cfg.plan
    rng = np.random.default_rng(cfg.seed)
    S, out, t0 = _initial_solve(ds, cfg, lambda: uniform_sample(ds.n, plan.r, rng))
    if out is None:
        return TrainReport([], DEGENERATE, None)
    working, model = S, out.model
    V = scan_violators(model, ds, working, cfg.viol_tol, cfg.scan_parallelism)
    records = [IterationRecord(working.size, model.n_sv, V.size, out.dual_objective, _ms(t0))]
    best = (out.dual_objective, model, working)

    while V.size > 0 and model.n_sv < plan.k:
        if len(records) >= cfg.max_outer_iters:
            break
        t0 = time.perf_counter()
        m = max(plan.r - model.n_sv, 1)
        R = V if V.size <= m else np.sort(rng.choice(V, size=m, replace=False))
        working = np.union1d(model.sv_indices, R)
        out = _solve(ds, working, cfg, warm=model)
        model = out.model
        V = scan_violators(model, ds, working, cfg.viol_tol, cfg.scan_parallelism)
        records.append(IterationRecord(working.size, model.n_sv, V.size, out.dual_objective, _ms(t0)))
        if out.dual_objective >= best[0]:
            best = (out.dual_objective, model, working)

    if V.size == 0:
        reason = NO_VIOLATORS
    elif model.n_sv >= plan.k:
        reason = SV_BUDGET
    else:
        reason = ITER_CAP
        _, model, working = best
    return TrainReport(records, reason, model, final_working=working)


def train_weighted_resampling(ds: SparseDataset, cfg: TrainConfig) -> TrainReport:
    """Weighted resampling with violator weight doubling.

    Every round draws ``r = min(6 k^2, n)`` points by weight and solves on
    them. When the violators ``V`` outside the sample weigh at most
    ``w(D) / (3 k)`` their weights double; otherwise the round leaves the
    weights alone. On a round with no violators the whole dataset is
    re-scanned and the true count is reported in ``global_violators``.
    """
    _check_inputs(ds, cfg)
    delta = cfg.plan.k
    r = min(6 * delta * delta, ds.n)
    if 6 * delta * delta > ds.n:
        log.info("sample size 6k^2=%d clamped to n=%d", 6 * delta * delta, ds.n)
    rng = np.random.default_rng(cfg.seed)
    w = np.ones(ds.n)
    records = []
    doublings = skipped = 0
    model = working = None
    best = None
    for _ in range(cfg.max_outer_iters):
        S, out, t0 = _initial_solve(ds, cfg, lambda: weighted_sample(w, r, rng))
        if out is None:
            return TrainReport(records, DEGENERATE, model, final_working=working,
                               weight_doublings=doublings, skipped_updates=skipped)
        working, model = S, out.model
        V = scan_violators(model, ds, working, cfg.viol_tol, cfg.scan_parallelism)
        doubled = False
        if V.size:
            if w[V].sum() <= w.sum() / (3.0 * delta):
                w[V] *= 2.0
                doubled = True
                doublings += 1
            else:
                skipped += 1
        records.append(IterationRecord(working.size, model.n_sv, V.size, out.dual_objective,
                                       _ms(t0), doubled))
        if best is None or V.size < best[0]:
            best = (V.size, model, working)
        if V.size == 0:
            # sampled non-support points were only checked by the solver
            G = scan_violators(model, ds, model.sv_indices, cfg.viol_tol, cfg.scan_parallelism)
            return TrainReport(records, NO_VIOLATORS, model, final_working=working,
                               weight_doublings=doublings, skipped_updates=skipped,
                               global_violators=int(G.size))
    _, model, working = best
    return TrainReport(records, ITER_CAP, model, final_working=working,
                       weight_doublings=doublings, skipped_updates=skipped)


def train_full(ds: SparseDataset, cfg: TrainConfig) -> TrainReport:
    """Baseline: one solve over every training point."""
    if ds.n == 0:
        raise ValueError("empty dataset")
    working = np.arange(ds.n)
    t0 = time.perf_counter()
    try:
        out = _solve(ds, working, cfg)
    except DegenerateModelError:
        return TrainReport([], DEGENERATE, None)
    ms = _ms(t0)
    G = scan_violators(out.model, ds, out.model.sv_indices, cfg.viol_tol, cfg.scan_parallelism)
    rec = IterationRecord(ds.n, out.model.n_sv, 0, out.dual_objective, ms)
    return TrainReport([rec], NO_VIOLATORS, out.model, final_working=working,
                       global_violators=int(G.size))


ALGORITHMS = {
    "violator": train_violator_resampling,
    "weighted": train_weighted_resampling,
    "full": train_full,
}


def train(ds: SparseDataset, cfg: TrainConfig, algo: str = "violator") -> TrainReport:
    try:
        fn = ALGORITHMS[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}") from None
    return fn(ds, cfg)
