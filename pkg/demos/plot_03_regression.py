"""
Kernel ridge regression with four approximate kernels
======================================================

Same data, same rank budget: the hierarchical kernel, Nystrom landmarks,
random Fourier features and independent leaf blocks.

Set ``HCK_CADATA`` to a LIBSVM file to run on real data instead of the
synthetic surface below.
"""

import os

import numpy as np

from hckernel import KernelSpec
from hckernel import io as hio
from hckernel.learner import evaluate, fit, predict

path = os.environ.get("HCK_CADATA")
if path:
    train, test = hio.split_dataset(hio.parse_libsvm(path), 0.8, seed=0)
else:
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 4, size=(6000, 4))
    y = np.sin(X[:, 0] * X[:, 1]) + np.cos(2 * X[:, 2]) + 0.05 * rng.normal(size=6000)
    train, test = hio.split_dataset(hio.Dataset(X, y), 0.8, seed=0)

# Duplicates are dropped and attributes scaled to [-1, 1] with train statistics.
train, test, _ = hio.preprocess(train, test)
Xtr, ytr, Xte, yte = train.dense(), train.targets, test.dense(), test.targets

for r in (32, 128):
    for method in ("hier", "nystrom", "rff", "indep"):
        best = min(
            (evaluate(predict(fit(Xtr, ytr, method, KernelSpec("gaussian", s, lam / 10), lam, r=r), Xte), yte, "reg"), s, lam)
            for s in (0.1, 0.3, 1.0)
            for lam in (1e-3, 1e-2)
        )
        print(f"r={r:4d} {method:8s} relative error {best[0]:.4f} (sigma={best[1]}, lambda={best[2]})")
