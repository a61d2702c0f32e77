"""
Binary and one-vs-all classification
=====================================

Classification reuses ridge regression on +-1 targets.  With several
classes, each class gets its own score and the largest wins.
"""

import numpy as np

from hckernel import KernelSpec
from hckernel.learner import evaluate, fit, predict

rng = np.random.default_rng(4)
X = rng.normal(size=(3000, 2))
angle = np.arctan2(X[:, 1], X[:, 0])
labels = (np.floor((angle + np.pi) / (2 * np.pi / 3)).astype(int) % 3) + 1
Xtr, Xte, ytr, yte = X[:2400], X[2400:], labels[:2400], labels[2400:]

spec = KernelSpec("gaussian", 0.5, 1e-4)
binary = fit(Xtr, np.where(ytr == 1, 1, -1), "hier", spec, 1e-3, r=32, task="bin")
print("class 1 vs rest accuracy:", evaluate(predict(binary, Xte), np.where(yte == 1, 1, -1), "bin"))

multi = fit(Xtr, ytr, "hier", spec, 1e-3, r=32, task="multi")
print("classes:", multi.classes, "accuracy:", evaluate(predict(multi, Xte), yte, "multi"))
