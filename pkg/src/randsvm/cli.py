"""Command-line entry point: gen, train, predict, bench and lab subcommands.

Exit status is 0 on success, 1 on runtime failure and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import bench as bench_mod
from . import projection
from .bounds import KINDS, REGRESSION, make_plan
from .dataset import GENERATORS, LibsvmParseError, generate, load_libsvm, save_libsvm, stats
from .kernels import KernelSpec
from .smo import CLASSIFY, REGRESS, decision_function, load_model, save_model
from .training import ALGORITHMS, TrainConfig, train

log = logging.getLogger("randsvm")


class CommandError(Exception):
    """Runtime failure reported with exit status 1."""


def _common(p, top=False):
    # subparsers suppress the default so a value given before the
    # subcommand is not overwritten
    default = 0 if top else argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=default, help="random seed (default 0)")
    p.add_argument("--quiet", action="store_true", default=False if top else argparse.SUPPRESS,
                   help="only print errors")


def _kernel_args(p):
    p.add_argument("--kernel", choices=["linear", "gaussian"], default=None)
    p.add_argument("--sigma", type=float, default=None, help="gaussian kernel width")
    p.add_argument("--C", type=float, default=None, help="box constraint")
    p.add_argument("--task", choices=[CLASSIFY, REGRESS], default=None)
    p.add_argument("--tube-eps", type=float, default=None, help="regression tube half-width")


def _plan_args(p):
    p.add_argument("--plan", choices=KINDS, default=None, help="sample-size estimator")
    p.add_argument("--eps-jl", type=float, default=None)
    p.add_argument("--delta", type=float, default=0.9)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--margin-lb", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--c-mult", type=float, default=2.0, help="r = c k")
    p.add_argument("--k-override", type=int, default=None, help="skip the estimators")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randsvm", description=__doc__.splitlines()[0])
    _common(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic dataset in libsvm format")
    _common(g)
    g.add_argument("--name", required=True, choices=sorted(GENERATORS))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a model")
    _common(t)
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="libsvm training file")
    src.add_argument("--gen", choices=sorted(GENERATORS), help="generate training data")
    t.add_argument("--n", type=int, default=None, help="size for --gen")
    _kernel_args(t)
    _plan_args(t)
    t.add_argument("--algo", choices=sorted(ALGORITHMS), default="violator")
    t.add_argument("--kkt-tol", type=float, default=1e-3)
    t.add_argument("--viol-tol", type=float, default=1e-3)
    t.add_argument("--max-iters", type=int, default=200, help="outer iteration cap")
    t.add_argument("--parallelism", type=int, default=1, help="threads for violator scans")
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--report", default=None, help="per-iteration CSV (default <out>.csv)")

    pr = sub.add_parser("predict", help="predict with a saved model")
    _common(pr)
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", default=None, help="prediction file (default stdout)")

    b = sub.add_parser("bench", help="train/test comparison across algorithms and seeds")
    _common(b)
    b.add_argument("--dataset", required=True, choices=sorted(GENERATORS) + ["file"])
    b.add_argument("--train-path")
    b.add_argument("--test-path")
    b.add_argument("--train-n", type=int, default=None)
    b.add_argument("--test-n", type=int, default=None)
    b.add_argument("--algos", default="violator,full", help="comma-separated")
    b.add_argument("--seeds", default=None, help="comma-separated (default: --seed)")
    b.add_argument("--parallel-seeds", type=int, default=1)
    _kernel_args(b)
    _plan_args(b)
    b.add_argument("--out", default=None, help="CSV file (default stdout)")

    lab = sub.add_parser("lab", help="random projection Monte-Carlo checks")
    _common(lab)
    lab.add_argument("--check", required=True, choices=["norm", "dot", "margin"])
    lab.add_argument("--d", type=int, default=1000)
    lab.add_argument("--k", type=int, default=None, help="target dimension (margin: default from the bound)")
    lab.add_argument("--eps", type=float, default=0.3)
    lab.add_argument("--gamma", type=float, default=0.5)
    lab.add_argument("--delta", type=float, default=0.5)
    lab.add_argument("--n", type=int, default=300, help="points for the margin check")
    lab.add_argument("--trials", type=int, default=1000)
    return parser


def _kernel_from(args, parser, fallback=None):
    family = args.kernel or (fallback or {}).get("kernel", "linear")
    if family == "gaussian":
        sigma = args.sigma if args.sigma is not None else (fallback or {}).get("sigma")
        if sigma is None:
            parser.error("--kernel gaussian needs --sigma")
        if not sigma > 0:
            parser.error("--sigma must be positive")
        return KernelSpec.gaussian(sigma)
    return KernelSpec.linear()


def _emit(args, msg):
    if not args.quiet:
        print(msg)


def cmd_gen(args, parser):
    if args.n < 1:
        parser.error("--n must be >= 1")
    ds = generate(args.name, args.n, args.seed)
    save_libsvm(ds, args.out)
    _emit(args, f"wrote {ds.n} examples to {args.out}")
    return 0


def cmd_train(args, parser):
    defaults = {}
    if args.gen:
        if args.n is None or args.n < 1:
            parser.error("--gen needs --n >= 1")
        defaults = bench_mod.load_defaults().get(args.gen, {})
        ds = generate(args.gen, args.n, args.seed)
    else:
        ds = load_libsvm(args.data)
    kernel = _kernel_from(args, parser, defaults if args.kernel is None else None)
    task = args.task or defaults.get("task", CLASSIFY)
    C = args.C if args.C is not None else defaults.get("C", 1.0)
    tube = args.tube_eps if args.tube_eps is not None else defaults.get("tube_eps", 0.0)
    if task == REGRESS and args.tube_eps is None and not defaults:
        parser.error("regression needs --tube-eps")
    kind = args.plan or defaults.get("plan", REGRESSION if task == REGRESS else "nonseparable")
    eps_jl = args.eps_jl if args.eps_jl is not None else defaults.get("eps_jl")
    if eps_jl is None and args.gamma is None and args.k_override is None:
        parser.error("pick a sample size: --eps-jl, --gamma with --margin-lb, or --k-override")
    try:
        plan = make_plan(kind, stats(ds), eps_jl=eps_jl, delta=args.delta, gamma=args.gamma,
                         margin_lb=args.margin_lb, kappa=args.kappa,
                         tube_eps=tube if (task == REGRESS and args.gamma is not None) else None,
                         c=args.c_mult, k_override=args.k_override)
        cfg = TrainConfig(plan=plan, C=C, kernel=kernel, kkt_tol=args.kkt_tol, viol_tol=args.viol_tol,
                          max_outer_iters=args.max_iters, seed=args.seed,
                          scan_parallelism=args.parallelism, task=task, tube_eps=tube)
    except ValueError as exc:
        parser.error(str(exc))
    rep = train(ds, cfg, args.algo)
    if rep.final_model is None:
        raise CommandError(f"training failed: {rep.termination} (single-class samples)")
    save_model(rep.final_model, args.out)
    report_path = args.report or args.out + ".csv"
    with open(report_path, "w") as fh:
        rep.write_csv(fh)
    last = rep.iterations[-1]
    _emit(args, f"termination={rep.termination} iterations={len(rep.iterations)} "
                f"k={plan.k} r={plan.r} sv={rep.final_model.n_sv} violators={last.violator_count}")
    return 0


def cmd_predict(args, parser):
    model = load_model(args.model)
    ds = load_libsvm(args.data)
    f = decision_function(model, ds)
    if model.task == CLASSIFY:
        lines = ["+1" if v >= 0 else "-1" for v in f]
    else:
        lines = [format(v, ".17g") for v in f]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if ds.n:
        score = bench_mod.score(model.task, f, ds.y)
        name = "accuracy" if model.task == CLASSIFY else "mse"
        rho = bench_mod.pearson_rho(f, ds.y)
        if not args.quiet:
            print(f"{name}={score:.6g} rho={rho:.6g}", file=sys.stderr)
    return 0


def cmd_bench(args, parser):
    algos = tuple(a for a in args.algos.split(",") if a)
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else (args.seed,)
    overrides = {"algorithms": algos, "seeds": seeds}
    if args.dataset != "file":
        defaults = bench_mod.load_defaults()[args.dataset]
    else:
        defaults = {}
        overrides.update(train_path=args.train_path, test_path=args.test_path)
    if args.kernel or args.sigma is not None or not defaults:
        overrides["kernel"] = _kernel_from(args, parser, None if args.kernel else defaults)
    for flag, key in (("train_n", "train_n"), ("test_n", "test_n"), ("C", "C"), ("task", "task"),
                      ("tube_eps", "tube_eps"), ("plan", "plan_kind"), ("eps_jl", "eps_jl"),
                      ("k_override", "k_override")):
        v = getattr(args, flag)
        if v is not None:
            overrides[key] = v
    overrides["delta"] = args.delta
    overrides["c_mult"] = args.c_mult
    try:
        if defaults:
            spec = bench_mod.BenchSpec.from_defaults(args.dataset, **overrides)
        else:
            spec = bench_mod.BenchSpec("file", **overrides)
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))
    rows = bench_mod.run_bench(spec, parallel_seeds=args.parallel_seeds)
    if args.out:
        with open(args.out, "w") as fh:
            bench_mod.write_csv(rows, fh)
    else:
        bench_mod.write_csv(rows, sys.stdout)
    return 0


def cmd_lab(args, parser):
    if args.trials < 1 or args.d < 1:
        parser.error("--trials and --d must be >= 1")
    try:
        if args.check == "norm":
            s = projection.check_norm_preservation(args.d, args.k or 200, args.eps, args.trials, args.seed)
        elif args.check == "dot":
            s = projection.check_dot_preservation(args.d, args.k or 200, args.eps, args.trials, args.seed)
        else:
            ds = projection.margin_instance(args.n, args.d, args.seed)
            s = projection.check_margin_preservation(ds, args.gamma, args.delta, args.trials,
                                                     args.seed, k=args.k)
    except ValueError as exc:
        parser.error(str(exc))
    print("check,trials,failures,rate,bound")
    print(s.csv_row())
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "predict": cmd_predict, "bench": cmd_bench, "lab": cmd_lab}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except (CommandError, OSError, LibsvmParseError, RuntimeError, ValueError) as exc:
        print(f"randsvm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
