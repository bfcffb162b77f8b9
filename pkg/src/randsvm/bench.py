"""Train/test benchmark runs over synthetic generators or libsvm files."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .bounds import make_plan
from .dataset import GENERATORS, generate, load_libsvm, stats
from .kernels import KernelSpec
from .smo import CLASSIFY, REGRESS, decision_function
from .training import ALGORITHMS, TrainConfig, train

log = logging.getLogger(__name__)

CSV_HEADER = ("dataset", "algo", "seed", "trainN", "seconds", "accuracy_or_mse", "rho")
TEST_SEED_OFFSET = 1_000_003


def load_defaults() -> dict:
    """Per-dataset kernel, C and plan defaults shipped with the package."""
    text = resources.files("randsvm").joinpath("data/bench_defaults.json").read_text()
    return {k: v for k, v in json.loads(text).items() if not k.startswith("_")}


@dataclass(frozen=True)
class BenchSpec:
    dataset: str
    train_n: int = 20000
    test_n: int = 2000
    algorithms: tuple = ("violator", "full")
    kernel: KernelSpec = KernelSpec.linear()
    C: float = 1.0
    task: str = CLASSIFY
    tube_eps: float = 0.0
    plan_kind: str = "nonseparable"
    eps_jl: float | None = 0.5
    delta: float = 0.9
    k_override: int | None = None
    c_mult: float = 2.0
    seeds: tuple = (0,)
    train_path: str | None = None
    test_path: str | None = None
    max_outer_iters: int = 200

    def __post_init__(self):
        if self.dataset != "file" and self.dataset not in GENERATORS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "file" and not (self.train_path and self.test_path):
            raise ValueError("file datasets need train and test paths")
        if self.train_n < 1 or self.test_n < 1:
            raise ValueError("train and test sizes must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if not self.seeds:
            raise ValueError("at least one seed is needed")

    @classmethod
    def from_defaults(cls, dataset, **overrides):
        """Spec for a generator dataset filled from the shipped defaults."""
        cfg = load_defaults()[dataset]
        kernel = (KernelSpec.gaussian(cfg["sigma"]) if cfg["kernel"] == "gaussian"
                  else KernelSpec.linear())
        base = cls(dataset, train_n=cfg["train_n"], test_n=cfg["test_n"], kernel=kernel,
                   C=cfg["C"], task=cfg["task"], tube_eps=cfg.get("tube_eps", 0.0),
                   plan_kind=cfg["plan"], eps_jl=cfg["eps_jl"])
        return replace(base, **overrides)


@dataclass
class BenchRow:
    dataset: str
    algo: str
    seed: int
    train_n: int
    seconds: float
    score: float
    rho: float
    report: object = field(default=None, repr=False, compare=False)

    def csv_row(self) -> str:
        return (f"{self.dataset},{self.algo},{self.seed},{self.train_n},"
                f"{self.seconds:.4f},{self.score:.6g},{self.rho:.6g}")


def pearson_rho(pred, target) -> float:
    """Pearson correlation; 0 with a warning when either side is constant."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.size < 2 or np.ptp(pred) == 0 or np.ptp(target) == 0:
        log.warning("constant predictions or labels: correlation reported as 0")
        return 0.0
    return float(np.corrcoef(pred, target)[0, 1])


def score(task, f, y) -> float:
    """Accuracy of ``sign(f)`` for classification, MSE for regression.

    A regression run on a +1/-1 target is scored by sign accuracy.
    """
    if task == CLASSIFY or np.all(np.abs(y) == 1):
        return float(np.mean(np.where(f >= 0, 1.0, -1.0) == y))
    return float(np.mean((f - y) ** 2))


def _data(spec, seed):
    if spec.dataset == "file":
        return load_libsvm(spec.train_path), load_libsvm(spec.test_path)
    return (generate(spec.dataset, spec.train_n, seed),
            generate(spec.dataset, spec.test_n, seed + TEST_SEED_OFFSET))


def config_for(spec: BenchSpec, train_stats, seed) -> TrainConfig:
    plan = make_plan(spec.plan_kind, train_stats, eps_jl=spec.eps_jl, delta=spec.delta,
                     c=spec.c_mult, k_override=spec.k_override)
    return TrainConfig(plan=plan, C=spec.C, kernel=spec.kernel, seed=seed, task=spec.task,
                       tube_eps=spec.tube_eps, max_outer_iters=spec.max_outer_iters)


def run_seed(spec: BenchSpec, seed: int) -> list:
    tr, te = _data(spec, seed)
    cfg = config_for(spec, stats(tr), seed)
    rows = []
    for algo in spec.algorithms:
        t0 = time.perf_counter()
        rep = train(tr, cfg, algo)
        seconds = time.perf_counter() - t0
        if rep.final_model is None:
            raise RuntimeError(f"{algo} on {spec.dataset} seed {seed}: {rep.termination}")
        f = decision_function(rep.final_model, te)
        rows.append(BenchRow(spec.dataset, algo, seed, tr.n, seconds,
                             score(spec.task, f, te.y), pearson_rho(f, te.y), rep))
    return rows


def run_bench(spec: BenchSpec, parallel_seeds: int = 1) -> list:
    """Rows for every (seed, algorithm) pair, in seed order then algorithm order."""
    if parallel_seeds > 1:
        with ThreadPoolExecutor(max_workers=parallel_seeds) as pool:
            per_seed = list(pool.map(lambda s: run_seed(spec, s), spec.seeds))
    else:
        per_seed = [run_seed(spec, s) for s in spec.seeds]
    return [row for rows in per_seed for row in rows]


def aggregate(rows) -> dict:
    """``{(dataset, algo): {"seconds": (mean, std), "score": ..., "rho": ...}}``."""
    groups = {}
    for r in rows:
        groups.setdefault((r.dataset, r.algo), []).append(r)
    out = {}
    for key, rs in groups.items():
        out[key] = {
            name: (float(np.mean(v)), float(np.std(v)))
            for name, v in (("seconds", [r.seconds for r in rs]),
                            ("score", [r.score for r in rs]),
                            ("rho", [r.rho for r in rs]))
        }
    return out


def write_csv(rows, fh, summary=True) -> None:
    fh.write(",".join(CSV_HEADER) + "\n")
    for r in rows:
        fh.write(r.csv_row() + "\n")
    if summary:
        for (ds, algo), m in aggregate(rows).items():
            fh.write(f"# {ds} {algo} seconds {m['seconds'][0]:.4f}+-{m['seconds'][1]:.4f} "
                     f"score {m['score'][0]:.6g}+-{m['score'][1]:.6g} "
                     f"rho {m['rho'][0]:.6g}+-{m['rho'][1]:.6g}\n")
