"""Kernel ridge regression and classification on any of the four kernels."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .baselines import (
    IndependentKernel,
    NystromFeatures,
    RffMap,
    draw_rff,
    independent_gram,
    nystrom_features,
    sample_landmarks,
)
from .hmatrix import OosState, assemble, invert, matvec, oos_eval, oos_prepare
from .kernels import KernelSpec, as_dense, kernel_cross
from .partition import PartitionTree, build_tree, levels_to_sizes

__all__ = [
    "METHODS",
    "TASKS",
    "Model",
    "resolve_sizing",
    "fit",
    "decision_function",
    "predict",
    "evaluate",
    "gp_posterior_dense",
]

METHODS = ("hierarchical", "nystrom", "fourier", "independent")
TASKS = ("regression", "binary", "multiclass")

_METHOD_ALIASES = {"hier": "hierarchical", "rff": "fourier", "indep": "independent", "nys": "nystrom"}
_TASK_ALIASES = {"reg": "regression", "bin": "binary", "multi": "multiclass"}


def canonical_method(method: str) -> str:
    m = _METHOD_ALIASES.get(method, method)
    if m not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    return m


def canonical_task(task: str) -> str:
    t = _TASK_ALIASES.get(task, task)
    if t not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    return t


@dataclass
class Model:
    method: str
    spec: KernelSpec
    lam: float
    task: str
    weights: np.ndarray  # (n_train, n_outputs), original training order
    n0: int
    r: int
    seed: int
    d: int
    classes: np.ndarray | None = None
    tree: PartitionTree | None = None
    oos: OosState | None = None
    features: NystromFeatures | RffMap | None = None
    coef: np.ndarray | None = None
    indep: IndependentKernel | None = None
    train_stats: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_train(self) -> int:
        return self.weights.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]


def resolve_sizing(n: int, levels=None, n0=None, r=None) -> tuple:
    """Turn either a level count or an explicit ``(n0, r)`` into ``(n0, r)``."""
    if levels is not None:
        if n0 is not None or r is not None:
            raise ValueError("give either levels or (n0, r), not both")
        return levels_to_sizes(n, levels)
    if r is None:
        raise ValueError("a rank r (or a level count) is required")
    if n0 is None:
        n0 = r
    return int(n0), int(r)


def _targets(y, task, classes=None):
    y = np.asarray(y)
    if task == "regression":
        return y.astype(np.float64).reshape(len(y), 1), None
    if classes is None:
        classes = np.unique(y)
    classes = np.asarray(classes)
    present = np.isin(classes, y)
    if not present.all():
        raise ValueError(f"empty class(es) in training data: {classes[~present].tolist()}")
    if task == "binary":
        if len(classes) != 2:
            raise ValueError(f"binary task needs exactly 2 classes, found {len(classes)}")
        return np.where(y == classes[1], 1.0, -1.0).reshape(len(y), 1), classes
    Y = -np.ones((len(y), len(classes)))
    Y[np.arange(len(y)), np.searchsorted(classes, y)] = 1.0
    return Y, classes


def fit(
    X,
    y,
    method: str = "hierarchical",
    spec: KernelSpec = KernelSpec(),
    lam: float = 1e-2,
    *,
    levels: int | None = None,
    n0: int | None = None,
    r: int | None = None,
    seed: int = 0,
    task: str = "regression",
    classes=None,
    timings: dict | None = None,
) -> Model:
    """Fit kernel ridge regression ``w = (K + (lam - jitter) I)^{-1} y``.

    Classification fits one ridge regression per output on +-1 targets
    (one output for binary, one-vs-all for multiclass); all outputs share
    the same inverted matrix.

    Parameters
    ----------
    X : array_like, shape (n, d)
    y : array_like, shape (n,)
    method : {'hierarchical', 'nystrom', 'fourier', 'independent'}
    spec : KernelSpec
        Base kernel; its jitter is the conditioning shift and the remaining
        ``lam - jitter`` is applied as regularization.
    lam : float
        Total regularization, strictly greater than ``spec.jitter``.
    levels, n0, r
        Tree sizing: either a level count or explicit leaf capacity and
        rank.  Low-rank methods use ``r`` as their rank.
    seed : int
    task : {'regression', 'binary', 'multiclass'}
    timings : dict, optional
        Receives ``build_s`` (partitioning and matrix construction) and
        ``invert_s`` (solve and prediction precomputation) wall times.
    """
    method = canonical_method(method)
    task = canonical_task(task)
    X = as_dense(X)
    n, d = X.shape
    if n == 0:
        raise ValueError("empty training set")
    if not lam > spec.jitter:
        raise ValueError(f"lambda={lam} must exceed the jitter {spec.jitter}")
    n0, r = resolve_sizing(n, levels, n0, r)
    Y, classes = _targets(y, task, classes)
    if len(Y) != n:
        raise ValueError("X and y lengths differ")
    shift = lam - spec.jitter
    model = Model(method=method, spec=spec, lam=float(lam), task=task, weights=None,
                  n0=n0, r=r, seed=int(seed), d=d, classes=classes)

    t0 = time.perf_counter()
    if method == "hierarchical":
        tree = build_tree(X, n0, r, seed)
        H = assemble(tree, X, spec)
        t1 = time.perf_counter()
        W = matvec(invert(H, shift), Y)
        model.tree = tree
        model.oos = oos_prepare(H, X, W)
        model.weights = W
        model.extra["floats_stored"] = H.floats_stored()
    elif method == "independent":
        tree = build_tree(X, n0, min(r, n0), seed)
        ind = independent_gram(spec, X, tree)
        t1 = time.perf_counter()
        model.tree = tree
        model.indep = ind
        model.weights = ind.solve(Y, shift)
        model.extra["floats_stored"] = sum(b.size for b in ind.blocks.values())
    else:
        if method == "nystrom":
            feats = nystrom_features(spec, X, sample_landmarks(n, r, seed))
            Phi = feats.transform(X, ids=np.arange(n))
        else:
            feats = draw_rff(spec, d, r, seed)
            Phi = feats.transform(X)
            # no jitter enters a feature-map kernel
            shift = lam
        t1 = time.perf_counter()
        k = Phi.shape[1]
        z = linalg.solve(Phi.T @ Phi + shift * np.eye(k), Phi.T @ Y, assume_a="pos")
        model.features = feats
        model.coef = z
        model.weights = (Y - Phi @ z) / shift
        model.extra["floats_stored"] = Phi.size
    if timings is not None:
        timings["build_s"] = t1 - t0
        timings["invert_s"] = time.perf_counter() - t1
    return model


def decision_function(model: Model, X) -> np.ndarray:
    """Raw scores ``w^T k_method(X_train, x)``, shape (m, n_outputs)."""
    X = as_dense(X)
    if X.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {model.d}")
    if model.method == "hierarchical":
        s = oos_eval(model.oos, X)
    elif model.method == "independent":
        s = model.indep.cross(model.weights, X)
    else:
        s = model.features.transform(X) @ model.coef
    return np.asarray(s).reshape(X.shape[0], model.n_outputs)


def predict(model: Model, X) -> np.ndarray:
    """Regression values or class labels (multiclass ties go to the lowest class)."""
    s = decision_function(model, X)
    if model.task == "regression":
        return s[:, 0]
    if model.task == "binary":
        return np.where(s[:, 0] > 0, model.classes[1], model.classes[0])
    return model.classes[np.argmax(s, axis=1)]


def evaluate(pred, truth, task: str) -> float:
    """Relative 2-norm error for regression, accuracy for classification."""
    task = canonical_task(task)
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if task == "regression":
        denom = np.linalg.norm(truth)
        if denom == 0:
            raise ValueError("relative error undefined for an all-zero truth vector")
        return float(np.linalg.norm(pred - truth) / denom)
    return float(np.mean(pred == truth))


def gp_posterior_dense(Xtrain, y, Xtest, spec: KernelSpec, lam: float, cap: int = 4096):
    """GP posterior mean and covariance with the exact base kernel.

    Dense O(n^3) helper; ``lam`` is the noise variance.
    """
    Xtrain = as_dense(Xtrain)
    Xtest = as_dense(Xtest)
    if Xtrain.shape[0] > cap:
        raise ValueError(f"n={Xtrain.shape[0]} exceeds dense cap {cap}")
    base = spec.with_jitter(0.0)
    K = kernel_cross(base, Xtrain) + lam * np.eye(Xtrain.shape[0])
    Ks = kernel_cross(base, Xtrain, Xtest)
    Kss = kernel_cross(base, Xtest)
    cf = linalg.cho_factor(K, lower=True)
    mean = Ks.T @ linalg.cho_solve(cf, np.asarray(y, dtype=np.float64))
    cov = Kss - Ks.T @ linalg.cho_solve(cf, Ks)
    return mean, 0.5 * (cov + cov.T)
