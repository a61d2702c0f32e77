"""Kernel PCA embeddings and the alignment-difference metric."""
from __future__ import annotations

import warnings

import numpy as np

__all__ = ["KPCA_CAP", "center_gram", "embed", "alignment_diff", "approx_gram"]

KPCA_CAP = 8192


def center_gram(K: np.ndarray) -> np.ndarray:
    """Double centering ``H K H`` with ``H = I - 11^T / n``."""
    K = np.asarray(K, dtype=np.float64)
    row = K.mean(axis=0, keepdims=True)
    col = K.mean(axis=1, keepdims=True)
    C = K - row - col + K.mean()
    return 0.5 * (C + C.T)


def embed(gram, q: int = 3, cap: int = KPCA_CAP, tol: float = 1e-8) -> np.ndarray:
    """Top-``q`` kernel PCA embedding of a Gram matrix.

    Column ``j`` is ``sqrt(lambda_j) v_j`` for the ``j``-th largest
    eigenpair of the centered Gram.  Each eigenvector is signed so that its
    largest-magnitude entry is positive.
    """
    K = np.asarray(gram, dtype=np.float64)
    n = K.shape[0]
    if K.shape != (n, n):
        raise ValueError(f"gram must be square, got {K.shape}")
    if n > cap:
        raise ValueError(f"n={n} exceeds the dense kPCA cap {cap}")
    if not 1 <= q <= n:
        raise ValueError(f"embedding dimension q={q} must lie in [1, {n}]")
    C = center_gram(K)
    vals, vecs = np.linalg.eigh(C, UPLO="L")
    vals = vals[::-1][:q]
    vecs = vecs[:, ::-1][:, :q]
    scale = max(1.0, abs(vals[0]))
    if vals[0] < -tol * scale:
        raise ValueError(f"gram is not positive semidefinite (leading eigenvalue {vals[0]:.3e})")
    if np.any(vals < -tol * scale):
        raise ValueError("requested eigenpairs include a negative eigenvalue; gram is not PSD")
    pick = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pick, np.arange(q)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def alignment_diff(U, U_tilde) -> float:
    """``||U - U_tilde M||_F / ||U||_F`` with ``M`` the least-squares aligner."""
    U = np.asarray(U, dtype=np.float64)
    Ut = np.asarray(U_tilde, dtype=np.float64)
    if U.shape != Ut.shape:
        raise ValueError(f"shape mismatch: {U.shape} vs {Ut.shape}")
    M, _, rank, _ = np.linalg.lstsq(Ut, U, rcond=None)
    if rank < Ut.shape[1]:
        warnings.warn("U_tilde is rank deficient; using the minimum-norm aligner", RuntimeWarning, stacklevel=2)
    return float(np.linalg.norm(U - Ut @ M) / np.linalg.norm(U))


def approx_gram(X, method: str, spec, r: int, seed: int = 0, n0: int | None = None) -> np.ndarray:
    """Dense Gram of one of the approximate kernels on ``X`` (small n only)."""
    from .baselines import draw_rff, independent_gram, nystrom_gram, sample_landmarks
    from .hmatrix import assemble, materialize
    from .kernels import as_dense
    from .learner import canonical_method
    from .partition import build_tree

    X = as_dense(X)
    n = X.shape[0]
    method = canonical_method(method)
    n0 = r if n0 is None else n0
    if method == "hierarchical":
        return materialize(assemble(build_tree(X, n0, r, seed), X, spec), cap=KPCA_CAP)
    if method == "independent":
        return independent_gram(spec, X, build_tree(X, n0, min(r, n0), seed)).materialize()
    if method == "nystrom":
        return nystrom_gram(spec, X, sample_landmarks(n, r, seed))
    Phi = draw_rff(spec, X.shape[1], r, seed).transform(X)
    return Phi @ Phi.T
