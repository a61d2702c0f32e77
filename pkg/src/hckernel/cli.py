"""Command-line interface: train, predict, eval, bench and kpca."""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys

import numpy as np

from . import io as hio
from .bench import BENCH_COLUMNS, bench_method, subsample_sizes
from .kernels import KernelSpec, kernel_cross
from .kpca import alignment_diff, approx_gram, embed
from .learner import canonical_task, evaluate, fit, predict

log = logging.getLogger("hckernel")

METHOD_CHOICES = ("hier", "nystrom", "rff", "indep")
KERNEL_CHOICES = ("gaussian", "laplace", "invmq")
TASK_CHOICES = ("reg", "bin", "multi")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_csv(rows, columns, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    finally:
        if out:
            fh.close()


def parse_grid(text: str) -> dict:
    """``"sigma=0.1,1;lambda=0.01"`` -> ``{'sigma': [0.1, 1.0], 'lambda': [0.01]}``."""
    grid = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        key, sep, vals = part.partition("=")
        key = key.strip()
        if not sep or key not in ("sigma", "lambda"):
            raise argparse.ArgumentTypeError(f"bad grid entry {part!r}")
        grid[key] = [float(v) for v in vals.split(",") if v.strip()]
    return grid


def _load_data(args):
    task = canonical_task(args.task)
    integer = task != "regression"
    train = hio.parse_libsvm(args.train, integer_labels=integer)
    test = None
    if getattr(args, "test", None):
        test = hio.parse_libsvm(args.test, integer_labels=integer)
        d = max(train.d, test.d)
        train = hio.parse_libsvm(args.train, integer_labels=integer, n_features=d)
        test = hio.parse_libsvm(args.test, integer_labels=integer, n_features=d)
    elif getattr(args, "split_seed", None) is not None:
        train, test = hio.split_dataset(train, 0.8, args.split_seed)
    train, test, stats = hio.preprocess(train, test, normalize=not args.no_normalize)
    return task, train, test, stats


def _sizing(args, n):
    if args.levels is not None:
        return {"levels": args.levels}
    return {"n0": args.n0, "r": args.rank}


def _spec(args, sigma, lam):
    jitter = lam / 10 if args.jitter is None else args.jitter
    if jitter >= lam:
        raise SystemExit(f"--jitter ({jitter:g}) must be smaller than --lambda ({lam:g})")
    return KernelSpec(args.kernel, sigma, jitter)


def cmd_train(args):
    task, train, test, stats = _load_data(args)
    X, y = train.dense(), train.targets
    sizing = _sizing(args, train.n)
    if args.grid:
        if test is None:
            raise SystemExit("--grid needs held-out data: pass --test or --split-seed")
        grid = parse_grid(args.grid)
        sigmas = grid.get("sigma", [args.sigma])
        lams = grid.get("lambda", [args.lam])
        rows, best = [], None
        for sigma, lam in itertools.product(sigmas, lams):
            model = fit(X, y, args.method, _spec(args, sigma, lam), lam, seed=args.seed, task=task, **sizing)
            metric = evaluate(predict(model, test.dense()), test.targets, task)
            rows.append({"sigma": sigma, "lambda": lam, "metric": metric})
            better = best is None or (metric < best[0] if task == "regression" else metric > best[0])
            if better:
                best = (metric, model)
            log.info("sigma=%g lambda=%g metric=%.6g", sigma, lam, metric)
        _write_csv(rows, ("sigma", "lambda", "metric"), args.out)
        model = best[1]
    else:
        model = fit(X, y, args.method, _spec(args, args.sigma, args.lam), args.lam, seed=args.seed,
                    task=task, **sizing)
        if test is not None:
            metric = evaluate(predict(model, test.dense()), test.targets, task)
            _write_csv([{"method": model.method, "metric": metric}], ("method", "metric"), args.out)
    model.train_stats = stats
    if args.model:
        hio.save_model(model, args.model)
    return 0


def _test_points(model, path):
    integer = model.task != "regression"
    data = hio.parse_libsvm(path, integer_labels=integer, n_features=model.d)
    X = data.dense()
    if model.train_stats is not None:
        X = hio.apply_stats(X, model.train_stats)
    return X, data.targets


def cmd_predict(args):
    model = hio.load_model(args.model)
    X, _ = _test_points(model, args.test)
    pred = predict(model, X)
    _write_csv([{"prediction": p} for p in pred], ("prediction",), args.out)
    return 0


def cmd_eval(args):
    model = hio.load_model(args.model)
    X, y = _test_points(model, args.test)
    metric = evaluate(predict(model, X), y, model.task)
    name = "relative_error" if model.task == "regression" else "accuracy"
    _write_csv([{"method": model.method, name: metric}], ("method", name), args.out)
    return 0


def cmd_bench(args):
    task, train, test, _ = _load_data(args)
    if test is None:
        raise SystemExit("bench needs held-out data: pass --test or --split-seed")
    X, y = train.dense(), train.targets
    rng = np.random.default_rng(args.seed)
    ranks = [int(v) for v in args.ranks.split(",")]
    methods = args.methods.split(",")
    rows = []
    for n in subsample_sizes(train.n, args.halvings):
        rows_sel = np.sort(rng.permutation(train.n)[:n])
        for r, method in itertools.product(ranks, methods):
            spec = _spec(args, args.sigma, args.lam)
            rows.append(bench_method(method, X[rows_sel], y[rows_sel], test.dense(), test.targets, r, spec,
                                     args.lam, task, args.seed))
            log.info("%s n=%d r=%d done", method, n, r)
    _write_csv(rows, BENCH_COLUMNS, args.out)
    return 0


def cmd_kpca(args):
    args.task = "reg"
    _, train, _, _ = _load_data(args)
    X = train.dense()
    rng = np.random.default_rng(args.seed)
    if args.subsample and args.subsample < train.n:
        X = X[np.sort(rng.choice(train.n, size=args.subsample, replace=False))]
    exact = KernelSpec(args.kernel, args.sigma, 0.0)
    U = embed(kernel_cross(exact, X), args.dim)
    spec = _spec(args, args.sigma, args.lam)
    rows = []
    for r in (int(v) for v in args.ranks.split(",")):
        for method in args.methods.split(","):
            Ut = embed(approx_gram(X, method, spec, r, args.seed), args.dim)
            rows.append({"method": method, "n": X.shape[0], "r": r, "alignment_diff": alignment_diff(U, Ut)})
    _write_csv(rows, ("method", "n", "r", "alignment_diff"), args.out)
    if args.embedding_out:
        np.savetxt(args.embedding_out, U, delimiter=",", fmt="%.17g")
    return 0


def _common(p, data=True):
    if data:
        p.add_argument("--train", required=True)
        p.add_argument("--test")
        p.add_argument("--split-seed", type=int, default=None,
                       help="4:1 random split of --train when no --test is given")
        p.add_argument("--task", choices=TASK_CHOICES, default="reg")
        p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--kernel", choices=KERNEL_CHOICES, default="gaussian")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-2)
    p.add_argument("--jitter", type=float, default=None, help="default: lambda/10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hckernel", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model, optionally grid-searching sigma and lambda")
    _common(p)
    p.add_argument("--method", choices=METHOD_CHOICES, default="hier")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--levels", type=int, help="tree levels j; n0=ceil(n/2^j), r=floor(n/2^j)")
    size.add_argument("--rank", type=int, default=None)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--grid", help='e.g. "sigma=0.1,1,10;lambda=0.001,0.01"')
    p.add_argument("--model", help="where to save the fitted model")
    p.set_defaults(func=cmd_train)

    for name, func in (("predict", cmd_predict), ("eval", cmd_eval)):
        p = sub.add_parser(name)
        p.add_argument("--model", required=True)
        p.add_argument("--test", required=True)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="time and score methods over subsample sizes and ranks")
    _common(p)
    p.add_argument("--methods", default="hier,nystrom,rff,indep")
    p.add_argument("--ranks", default="32,64")
    p.add_argument("--halvings", type=int, default=3, help="number of n, n/2, n/4, ... sizes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("kpca", help="kernel PCA alignment difference against the exact kernel")
    _common(p)
    p.add_argument("--methods", default="hier,nystrom,rff,indep")
    p.add_argument("--ranks", default="32,129,516")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--subsample", type=int, default=2000)
    p.add_argument("--embedding-out", help="write the exact-kernel embedding as CSV")
    p.set_defaults(func=cmd_kpca)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "train" and args.levels is None and args.rank is None:
        args.rank = 32
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
