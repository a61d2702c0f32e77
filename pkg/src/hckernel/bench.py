"""Timing and storage measurements for the approximate kernels."""
from __future__ import annotations

import time

import numpy as np

from .hmatrix import assemble, invert
from .kernels import KernelSpec, as_dense
from .learner import evaluate, fit, predict
from .partition import build_tree

__all__ = ["BENCH_COLUMNS", "time_hierarchical", "scaling_sweep", "loglog_slope", "bench_method", "subsample_sizes"]

BENCH_COLUMNS = ("method", "n", "r", "build_s", "invert_s", "predict_s", "floats_stored", "metric")


def time_hierarchical(X, r: int, spec: KernelSpec, lam: float, seed: int = 0, n0: int | None = None) -> dict:
    """Wall-clock phases of hierarchical training on ``X`` with unit targets."""
    X = as_dense(X)
    n0 = r if n0 is None else n0
    t0 = time.perf_counter()
    tree = build_tree(X, n0, r, seed)
    H = assemble(tree, X, spec)
    t1 = time.perf_counter()
    Hi = invert(H, lam - spec.jitter)
    t2 = time.perf_counter()
    return {
        "n": X.shape[0],
        "r": r,
        "build_s": t1 - t0,
        "invert_s": t2 - t1,
        "floats_stored": H.floats_stored(),
        "factors": H,
        "inverse": Hi,
    }


def scaling_sweep(ns, r: int = 64, d: int = 8, spec: KernelSpec | None = None, lam: float = 1e-2,
                  seed: int = 0, repeats: int = 1) -> list:
    """Assemble+invert timings on uniform random data for each n in ``ns``.

    The best of ``repeats`` runs is kept for every n.
    """
    spec = spec or KernelSpec("gaussian", 1.0, lam / 10)
    rng = np.random.default_rng(seed)
    rows = []
    for n in ns:
        X = rng.uniform(-1.0, 1.0, size=(n, d))
        best = None
        for _ in range(repeats):
            res = time_hierarchical(X, r, spec, lam, seed)
            total = res["build_s"] + res["invert_s"]
            if best is None or total < best["total_s"]:
                best = {k: v for k, v in res.items() if k not in ("factors", "inverse")}
                best["total_s"] = total
        rows.append(best)
    return rows


def loglog_slope(ns, times) -> float:
    """Least-squares slope of log(time) against log(n)."""
    return float(np.polyfit(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(times, dtype=float)), 1)[0])


def subsample_sizes(n: int, levels: int) -> list:
    """``n, n/2, n/4, ...`` (``levels`` entries, at least 1 each)."""
    return [max(1, n // 2**k) for k in range(levels)]


def bench_method(method: str, Xtr, ytr, Xte, yte, r: int, spec: KernelSpec, lam: float,
                 task: str = "regression", seed: int = 0) -> dict:
    """Time fit and predict of one method and score it on the test set."""
    Xtr = as_dense(Xtr)
    r = min(r, Xtr.shape[0])
    phases: dict = {}
    model = fit(Xtr, ytr, method, spec, lam, n0=r, r=r, seed=seed, task=task, timings=phases)
    t0 = time.perf_counter()
    pred = predict(model, Xte)
    t1 = time.perf_counter()
    return {
        "method": model.method,
        "n": Xtr.shape[0],
        "r": r,
        "build_s": phases["build_s"],
        "invert_s": phases["invert_s"],
        "predict_s": t1 - t0,
        "floats_stored": int(model.extra["floats_stored"]),
        "metric": evaluate(pred, np.asarray(yte), task),
    }
