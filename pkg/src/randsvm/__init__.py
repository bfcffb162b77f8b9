"""Randomized sampling for large-scale SVM training.

A small working set is solved exactly with SMO and grown from the points
that violate its KKT conditions until none remain.
"""

from .bounds import SamplePlan, estimate_k_from_eps, estimate_k_margin, estimate_k_nonsep, make_plan
from .dataset import SparseDataset, from_dense, generate, load_libsvm, save_libsvm, stats
from .kernels import KernelSpec
from .smo import SvmModel, decision_function, load_model, save_model, solve
from .training import (
    TrainConfig,
    TrainReport,
    scan_violators,
    train,
    train_full,
    train_violator_resampling,
    train_weighted_resampling,
)

__all__ = [
    "KernelSpec", "SamplePlan", "SparseDataset", "SvmModel", "TrainConfig", "TrainReport",
    "decision_function", "estimate_k_from_eps", "estimate_k_margin", "estimate_k_nonsep",
    "from_dense", "generate", "load_libsvm", "load_model", "make_plan", "save_libsvm",
    "save_model", "scan_violators", "solve", "stats", "train", "train_full",
    "train_violator_resampling", "train_weighted_resampling",
]
__version__ = "0.1.0"
