"""Recursively low-rank compressed kernel matrix.

The hierarchical kernel matrix is stored through the factors

* ``A[i]``     dense diagonal block of every leaf ``i``,
* ``U[i]``     basis of leaf ``i`` (``|X_i| x r_p``, ``p`` its parent),
* ``Sigma[p]`` middle factor of every nonleaf ``p``,
* ``W[p]``     transfer factor of every nonleaf, nonroot ``p``,

so that the block between sibling subtrees ``a`` and ``b`` of ``p`` is
``B_a Sigma[p] B_b^T`` with nested bases ``B_q = [B_c for c in Ch(q)] W[q]``.

All tree passes work on vectors stored in tree (``perm``) order; the public
functions take and return vectors in the caller's original order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .kernels import KernelSpec, as_dense, kernel_cross
from .partition import PartitionTree, locate_leaves

__all__ = [
    "FactorizationError",
    "HierFactors",
    "OosState",
    "assemble",
    "matvec",
    "invert",
    "oos_prepare",
    "oos_eval",
    "materialize",
    "MATERIALIZE_CAP",
]

MATERIALIZE_CAP = 4096


class FactorizationError(np.linalg.LinAlgError):
    """A Cholesky factorization inside a tree pass failed."""

    def __init__(self, node: int, stage: str):
        super().__init__(f"factorization failed at node {node} ({stage}); matrix is not positive definite")
        self.node = node
        self.stage = stage


@dataclass
class HierFactors:
    tree: PartitionTree
    spec: KernelSpec
    A: dict = field(default_factory=dict)
    U: dict = field(default_factory=dict)
    Sigma: dict = field(default_factory=dict)
    W: dict = field(default_factory=dict)
    # lower Cholesky factors of the landmark Grams, nonleaf nodes only
    chol: dict = field(default_factory=dict)
    inverted: bool = False
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.tree.n

    def floats_stored(self, include_chol: bool = True) -> int:
        blocks = [self.A, self.U, self.Sigma, self.W]
        if include_chol:
            blocks.append(self.chol)
        return int(sum(a.size for group in blocks for a in group.values()))


def _cholesky(M: np.ndarray, node: int, stage: str) -> np.ndarray:
    try:
        return linalg.cholesky(M, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise FactorizationError(node, stage) from None


def _solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return linalg.cho_solve((L, True), B, check_finite=False)


def assemble(tree: PartitionTree, points, spec: KernelSpec) -> HierFactors:
    """Instantiate the compressed factors of ``K'_hierarchical(X, X)``."""
    X = as_dense(points)
    if X.shape[0] != tree.n:
        raise ValueError(f"tree was built over {tree.n} points, got {X.shape[0]}")
    H = HierFactors(tree=tree, spec=spec)
    nodes = tree.nodes

    for p in tree.nonleaves():
        L = p.landmarks
        G = kernel_cross(spec, X[L], y_ids=L)
        H.Sigma[p.id] = G
        H.chol[p.id] = _cholesky(G, p.id, "landmark Gram")

    for nd in tree.nodes:
        if nd.is_leaf:
            idx = tree.indices(nd)
            H.A[nd.id] = kernel_cross(spec, X[idx], y_ids=idx)
            if nd.parent >= 0:
                Lp = nodes[nd.parent].landmarks
                H.U[nd.id] = _solve(H.chol[nd.parent], kernel_cross(spec, X[Lp], X[idx], Lp, idx)).T
        elif nd.parent >= 0:
            Lg = nodes[nd.parent].landmarks
            L = nd.landmarks
            H.W[nd.id] = _solve(H.chol[nd.parent], kernel_cross(spec, X[Lg], X[L], Lg, L)).T
    return H


def _as_columns(b, n):
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != n or b.ndim > 2:
        raise ValueError(f"expected a vector of length {n}, got shape {b.shape}")
    return b.reshape(n, -1), b.ndim == 1


def _matvec_tree_order(H: HierFactors, b: np.ndarray) -> np.ndarray:
    tree = H.tree
    nodes = tree.nodes
    y = np.empty_like(b)
    root = tree.root
    if root.is_leaf:
        return H.A[root.id] @ b

    c = {}
    for nd in tree.postorder():
        if nd.is_leaf:
            bl = b[nd.lo:nd.hi]
            y[nd.lo:nd.hi] = H.A[nd.id] @ bl
            c[nd.id] = H.U[nd.id].T @ bl
        elif nd.parent >= 0:
            c[nd.id] = H.W[nd.id].T @ sum(c[j] for j in nd.children)

    d = {}
    for nd in nodes:
        if nd.is_leaf:
            y[nd.lo:nd.hi] += H.U[nd.id] @ d[nd.id]
            continue
        S = H.Sigma[nd.id]
        inherited = H.W[nd.id] @ d[nd.id] if nd.parent >= 0 else None
        for j in nd.children:
            acc = S @ sum(c[s] for s in nd.children if s != j)
            d[j] = acc if inherited is None else acc + inherited
    return y


def matvec(H: HierFactors, b) -> np.ndarray:
    """Return ``A b`` for the matrix represented by ``H`` (one or many columns)."""
    tree = H.tree
    B, flat = _as_columns(b, tree.n)
    y = np.empty_like(B)
    y[tree.perm] = _matvec_tree_order(H, B[tree.perm])
    return y[:, 0] if flat else y


def invert(H: HierFactors, lambda_shift: float = 0.0) -> HierFactors:
    """Factors of ``(A + lambda_shift I)^{-1}`` with the same block skeleton.

    One post-order pass builds the inverse level by level through
    Sherman-Morrison-Woodbury updates; one pre-order pass applies the
    accumulated down-cascading corrections to the middle factors and leaf
    blocks.
    """
    if H.inverted:
        raise ValueError("factors are already inverted")
    if lambda_shift < 0:
        raise ValueError("lambda_shift must be nonnegative")
    tree = H.tree
    nodes = tree.nodes
    out = HierFactors(tree=tree, spec=H.spec, inverted=True, shift=float(lambda_shift))
    root = tree.root
    if root.is_leaf:
        M = H.A[root.id] + lambda_shift * np.eye(root.size)
        L = _cholesky(M, root.id, "leaf block")
        out.A[root.id] = _sym(_solve(L, np.eye(root.size)))
        return out

    At, Ut, Theta, Xi, Wt, St, E = {}, {}, {}, {}, {}, {}, {}
    for nd in tree.postorder():
        i = nd.id
        if nd.is_leaf:
            p = nd.parent
            U = H.U[i]
            M = H.A[i] + lambda_shift * np.eye(nd.size) - U @ H.Sigma[p] @ U.T
            L = _cholesky(_sym(M), i, "upward leaf Schur complement")
            At[i] = _sym(_solve(L, np.eye(nd.size)))
            Ut[i] = At[i] @ U
            Theta[i] = U.T @ Ut[i]
            continue
        for j in nd.children:
            if not nodes[j].is_leaf:
                Wj = H.W[j]
                Wt[j] = Wj + St[j] @ (Xi[j] @ Wj)
                Theta[j] = Wj.T @ Xi[j] @ Wt[j]
        Xi[i] = sum(Theta[j] for j in nd.children)
        if nd.parent >= 0:
            Wi = H.W[i]
            Lam = H.Sigma[i] - Wi @ H.Sigma[nd.parent] @ Wi.T
        else:
            Lam = H.Sigma[i]
        k = Lam.shape[0]
        try:
            St[i] = -np.linalg.solve(np.eye(k) + Lam @ Xi[i], Lam)
        except np.linalg.LinAlgError:
            raise FactorizationError(i, "upward middle factor") from None
        St[i] = _sym(St[i])
        for j in nd.children:
            if not nodes[j].is_leaf:
                E[j] = Wt[j] @ St[i] @ Wt[j].T
        if nd.parent < 0:
            E[i] = np.zeros_like(St[i])

    for nd in nodes:
        i = nd.id
        if nd.is_leaf:
            At[i] = At[i] + Ut[i] @ St[nd.parent] @ Ut[i].T
        else:
            if nd.parent >= 0:
                E[i] = E[i] + Wt[i] @ E[nd.parent] @ Wt[i].T
            St[i] = St[i] + E[i]

    out.A, out.U, out.Sigma, out.W = At, Ut, St, Wt
    return out


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


@dataclass
class OosState:
    """x-independent precomputation for ``w^T k_hierarchical(X, x)``.

    Holds the tree, the training points and weights in tree order, the
    transfer factors, the retained landmark Cholesky factors of the leaf
    parents and the per-node vectors ``c``.
    """

    tree: PartitionTree
    spec: KernelSpec
    points: np.ndarray
    weights: np.ndarray
    W: dict
    chol: dict
    landmark_points: dict
    c: dict
    e: dict

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]


def oos_prepare(H: HierFactors, points, w) -> OosState:
    """Precompute the per-node vectors of the out-of-sample inner product."""
    if H.inverted:
        raise ValueError("out-of-sample evaluation needs the uninverted factors")
    tree = H.tree
    nodes = tree.nodes
    X = as_dense(points)
    Wm, _ = _as_columns(w, tree.n)
    Xp = X[tree.perm]
    wp = Wm[tree.perm]
    e, c = {}, {}
    for nd in tree.postorder():
        if nd.parent < 0:
            continue
        if nd.is_leaf:
            e[nd.id] = H.U[nd.id].T @ wp[nd.lo:nd.hi]
        else:
            e[nd.id] = H.W[nd.id].T @ sum(e[j] for j in nd.children)
    for p in tree.nonleaves():
        S = H.Sigma[p.id]
        for q in p.children:
            c[q] = S.T @ sum(e[l] for l in p.children if l != q)
    leaf_parents = {nd.parent for nd in tree.leaves() if nd.parent >= 0}
    chol = {p: H.chol[p] for p in leaf_parents}
    lm = {p: X[nodes[p].landmarks] for p in leaf_parents}
    return OosState(
        tree=tree, spec=H.spec, points=Xp, weights=wp, W=dict(H.W),
        chol=chol, landmark_points=lm, c=c, e=e,
    )


def oos_eval(state: OosState, x) -> np.ndarray:
    """Evaluate ``w^T k_hierarchical(X, x)`` for new point(s) ``x``.

    A 1-D ``x`` is a single point; a 2-D ``x`` holds one point per row.
    The result has one entry per point (and per output column when the
    weights had several).  Points are treated as new: no jitter applies.
    """
    tree = state.tree
    nodes = tree.nodes
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    Xq = as_dense(x)
    if Xq.shape[1] != tree.d:
        raise ValueError(f"dimension mismatch: {Xq.shape[1]} vs {tree.d}")
    spec = state.spec
    leaf_ids = locate_leaves(tree, Xq)
    z = np.zeros((Xq.shape[0], state.n_outputs))
    for leaf in np.unique(leaf_ids):
        rows = np.flatnonzero(leaf_ids == leaf)
        nd = nodes[leaf]
        Xr = Xq[rows]
        zr = kernel_cross(spec, Xr, state.points[nd.lo:nd.hi]) @ state.weights[nd.lo:nd.hi]
        if nd.parent >= 0:
            p = nd.parent
            d = _solve(state.chol[p], kernel_cross(spec, state.landmark_points[p], Xr))
            zr += d.T @ state.c[nd.id]
            q = p
            while nodes[q].parent >= 0:
                d = state.W[q].T @ d
                zr += d.T @ state.c[q]
                q = nodes[q].parent
        z[rows] = zr
    if state.n_outputs == 1:
        z = z[:, 0]
    return z[0] if single else z


def materialize(H: HierFactors, cap: int = MATERIALIZE_CAP) -> np.ndarray:
    """Expand the factors into a dense matrix in the original point order."""
    tree = H.tree
    n = tree.n
    if n > cap:
        raise ValueError(f"refusing to materialize n={n} > cap={cap}")
    nodes = tree.nodes
    M = np.zeros((n, n))
    basis = {}
    for nd in tree.postorder():
        if nd.is_leaf:
            M[nd.lo:nd.hi, nd.lo:nd.hi] = H.A[nd.id]
            if nd.parent >= 0:
                basis[nd.id] = H.U[nd.id]
            continue
        S = H.Sigma[nd.id]
        for ia, a in enumerate(nd.children):
            for b in nd.children[ia + 1:]:
                na, nb = nodes[a], nodes[b]
                blk = basis[a] @ S @ basis[b].T
                M[na.lo:na.hi, nb.lo:nb.hi] = blk
                M[nb.lo:nb.hi, na.lo:na.hi] = blk.T
        if nd.parent >= 0:
            basis[nd.id] = np.vstack([basis[j] for j in nd.children]) @ H.W[nd.id]
    out = np.empty_like(M)
    out[np.ix_(tree.perm, tree.perm)] = M
    return out
