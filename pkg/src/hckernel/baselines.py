"""Baseline approximate kernels: Nystrom, random Fourier features and the
cross-domain independent (block-diagonal) kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernels import KernelSpec, as_dense, kernel_cross
from .partition import PartitionTree, locate_leaves

__all__ = [
    "sample_landmarks",
    "nystrom_gram",
    "NystromFeatures",
    "nystrom_features",
    "RffMap",
    "draw_rff",
    "rff_map",
    "IndependentKernel",
    "independent_gram",
]


def sample_landmarks(n: int, r: int, seed: int) -> np.ndarray:
    """``min(r, n)`` distinct indices drawn uniformly, sorted."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=min(r, n), replace=False))


@dataclass
class NystromFeatures:
    """Feature map ``phi(x) = L^{-1} k'(landmarks, x)`` with ``L L^T = K'(Xl, Xl)``."""

    spec: KernelSpec
    landmark_points: np.ndarray
    landmark_ids: np.ndarray
    chol: np.ndarray

    def transform(self, X, ids=None) -> np.ndarray:
        X = as_dense(X)
        C = kernel_cross(self.spec, self.landmark_points, X, self.landmark_ids, ids)
        return linalg.solve_triangular(self.chol, C, lower=True, check_finite=False).T

    @property
    def rank(self) -> int:
        return len(self.landmark_ids)


def nystrom_features(spec: KernelSpec, X, landmark_indices) -> NystromFeatures:
    X = as_dense(X)
    L = np.asarray(landmark_indices, dtype=np.int64)
    if len(np.unique(L)) != len(L):
        raise ValueError("landmark indices must be distinct")
    G = kernel_cross(spec, X[L], y_ids=L)
    try:
        chol = linalg.cholesky(G, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise np.linalg.LinAlgError("landmark Gram is singular; use a positive jitter") from None
    return NystromFeatures(spec, X[L], L, chol)


def nystrom_gram(spec: KernelSpec, X, landmark_indices, factor: bool = False) -> np.ndarray:
    """Nystrom approximation conditioned on the given landmark rows of ``X``.

    With ``factor=True`` returns ``Phi`` (n x r) such that ``Phi Phi^T``
    is the approximate Gram; otherwise the dense n x n matrix.
    """
    X = as_dense(X)
    feats = nystrom_features(spec, X, landmark_indices)
    Phi = feats.transform(X, ids=np.arange(X.shape[0]))
    if factor:
        return Phi
    K = Phi @ Phi.T
    return 0.5 * (K + K.T)


@dataclass
class RffMap:
    omegas: np.ndarray
    phases: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.phases)

    @property
    def scale(self) -> float:
        return float(np.sqrt(2.0 / self.rank))

    def transform(self, X) -> np.ndarray:
        X = as_dense(X)
        return self.scale * np.cos(X @ self.omegas.T + self.phases)


def draw_rff(spec: KernelSpec, d: int, r: int, seed: int) -> RffMap:
    """Draw ``r`` random Fourier features for a stationary base kernel.

    Gaussian frequencies are Normal(0, sigma^-2 I); Laplace frequencies
    have iid Cauchy components with scale 1/sigma.  Phases are
    Uniform(0, 2 pi).
    """
    rng = np.random.default_rng(seed)
    if spec.family == "gaussian":
        omegas = rng.standard_normal((r, d)) / spec.sigma
    elif spec.family == "laplace":
        omegas = rng.standard_cauchy((r, d)) / spec.sigma
    else:
        raise ValueError(f"random Fourier features are not available for the {spec.family} kernel")
    phases = rng.uniform(0.0, 2.0 * np.pi, size=r)
    return RffMap(omegas, phases)


def rff_map(spec: KernelSpec, X, r: int, seed: int) -> np.ndarray:
    """Random Fourier feature matrix of ``X``, shape (n, r)."""
    X = as_dense(X)
    return draw_rff(spec, X.shape[1], r, seed).transform(X)


@dataclass
class IndependentKernel:
    """Block-diagonal kernel over the leaves of a partitioning tree."""

    tree: PartitionTree
    spec: KernelSpec
    points: np.ndarray  # tree order
    blocks: dict

    def materialize(self) -> np.ndarray:
        n = self.tree.n
        M = np.zeros((n, n))
        for leaf in self.tree.leaves():
            idx = self.tree.indices(leaf)
            M[np.ix_(idx, idx)] = self.blocks[leaf.id]
        return M

    def solve(self, y, shift: float = 0.0) -> np.ndarray:
        """``(K + shift I)^{-1} y`` block by block (original order)."""
        y = np.asarray(y, dtype=np.float64)
        out = np.empty_like(y)
        for leaf in self.tree.leaves():
            idx = self.tree.indices(leaf)
            M = self.blocks[leaf.id] + shift * np.eye(leaf.size)
            out[idx] = linalg.cho_solve(linalg.cho_factor(M, lower=True), y[idx])
        return out

    def cross(self, w, Xnew) -> np.ndarray:
        """``w^T k_independent(X, x)`` for new points; ``w`` in original order."""
        Q = as_dense(Xnew)
        w = np.asarray(w, dtype=np.float64)
        wp = w[self.tree.perm]
        leaf_ids = locate_leaves(self.tree, Q)
        out = np.zeros((Q.shape[0],) + w.shape[1:])
        for leaf in np.unique(leaf_ids):
            rows = np.flatnonzero(leaf_ids == leaf)
            nd = self.tree.nodes[leaf]
            out[rows] = kernel_cross(self.spec, Q[rows], self.points[nd.lo:nd.hi]) @ wp[nd.lo:nd.hi]
        return out


def independent_gram(spec: KernelSpec, X, tree: PartitionTree) -> IndependentKernel:
    """Keep only the leaf diagonal blocks ``K'(X_i, X_i)``."""
    X = as_dense(X)
    blocks = {}
    for leaf in tree.leaves():
        idx = tree.indices(leaf)
        blocks[leaf.id] = kernel_cross(spec, X[idx], y_ids=idx)
    return IndependentKernel(tree, spec, X[tree.perm], blocks)
