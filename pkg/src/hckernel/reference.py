"""Dense oracles for the hierarchical kernel.

These evaluate the kernel straight from its recursive definition with
fresh LU solves and no shared factorizations, so they share no linear
algebra with :mod:`hckernel.hmatrix`.  Costs are O(n^2) to O(n^3); every
entry point is capped.
"""
from __future__ import annotations

import numpy as np

from .kernels import KernelSpec, as_dense, kernel_cross
from .partition import PartitionTree, locate_leaf

__all__ = [
    "DENSE_CAP",
    "dense_hier",
    "dense_cross",
    "dense_path_cov",
    "xi_decomposition",
    "compositional_gram",
    "nystrom_dense",
]

DENSE_CAP = 4096


def _check_cap(n, cap):
    if n > cap:
        raise ValueError(f"dense oracle refused: n={n} exceeds cap={cap}")


def _landmark_gram(spec, X, L):
    return kernel_cross(spec, X[L], y_ids=L)


def _psi_blocks(tree: PartitionTree, X: np.ndarray, spec: KernelSpec) -> dict:
    """psi^{(p)}(X_c, landmarks of p) for every nonroot node c with parent p.

    Rows follow ``tree.indices(c)``.
    """
    nodes = tree.nodes
    psi = {}
    for nd in tree.postorder():
        if nd.parent < 0:
            continue
        Lp = nodes[nd.parent].landmarks
        idx = tree.indices(nd)
        if nd.is_leaf:
            psi[nd.id] = kernel_cross(spec, X[idx], X[Lp], idx, Lp)
        else:
            L = nd.landmarks
            inner = np.vstack([psi[j] for j in nd.children])
            transfer = np.linalg.solve(_landmark_gram(spec, X, L), kernel_cross(spec, X[L], X[Lp], L, Lp))
            psi[nd.id] = inner @ transfer
    return psi


def dense_hier(tree: PartitionTree, points, spec: KernelSpec, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``K'_hierarchical(X, X)`` in the original point order."""
    X = as_dense(points)
    n = X.shape[0]
    _check_cap(n, cap)
    nodes = tree.nodes
    psi = _psi_blocks(tree, X, spec)
    K = np.zeros((n, n))
    for nd in nodes:
        if nd.is_leaf:
            idx = tree.indices(nd)
            K[np.ix_(idx, idx)] = kernel_cross(spec, X[idx], y_ids=idx)
            continue
        G = _landmark_gram(spec, X, nd.landmarks)
        kids = list(nd.children)
        for s, a in enumerate(kids):
            for b in kids[s + 1:]:
                ia, ib = tree.indices(nodes[a]), tree.indices(nodes[b])
                block = psi[a] @ np.linalg.solve(G, psi[b].T)
                K[np.ix_(ia, ib)] = block
                K[np.ix_(ib, ia)] = block.T
    return K


def dense_cross(tree: PartitionTree, points, spec: KernelSpec, Xnew, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``k_hierarchical(X, x)`` for new points, shape (n, m).

    New points carry no identity, so no jitter enters their entries.
    """
    X = as_dense(points)
    Q = as_dense(Xnew)
    n = X.shape[0]
    _check_cap(n, cap)
    nodes = tree.nodes
    psi = _psi_blocks(tree, X, spec)
    out = np.zeros((n, Q.shape[0]))
    for col, x in enumerate(Q):
        path = locate_leaf(tree, x)
        leaf = nodes[path[-1]]
        idx = tree.indices(leaf)
        out[idx, col] = kernel_cross(spec, X[idx], x[None, :])[:, 0]
        if leaf.parent < 0:
            continue
        child = leaf.id
        a = leaf.parent
        phi = kernel_cross(spec, x[None, :], X[nodes[a].landmarks])[0]
        while True:
            La = nodes[a].landmarks
            G = _landmark_gram(spec, X, La)
            coef = np.linalg.solve(G, phi)
            for s in nodes[a].children:
                if s != child:
                    out[tree.indices(nodes[s]), col] = psi[s] @ coef
            g = nodes[a].parent
            if g < 0:
                break
            Lg = nodes[g].landmarks
            phi = coef @ kernel_cross(spec, X[La], X[Lg], La, Lg)
            child, a = a, g
    return out


def dense_path_cov(tree: PartitionTree, points, spec: KernelSpec, x, xp, x_id=None, xp_id=None) -> float:
    """Expanded cross-leaf product for one pair of points.

    ``x`` and ``xp`` must fall in distinct leaves.  ``x_id``/``xp_id`` give
    training identities so that the jitter applies against landmarks that
    are the same training point.
    """
    X = as_dense(points)
    x = np.asarray(x, dtype=np.float64).ravel()
    xp = np.asarray(xp, dtype=np.float64).ravel()
    nodes = tree.nodes
    pj = locate_leaf(tree, x)
    pl = locate_leaf(tree, xp)
    if pj[-1] == pl[-1]:
        raise ValueError("points share a leaf; the expanded product applies only across leaves")
    common = max(t for t in range(min(len(pj), len(pl))) if pj[t] == pl[t])
    lca = pj[common]

    def climb(point, pid, path):
        # path is root..leaf; ancestors strictly between leaf and lca, bottom up
        chain = path[common + 1:-1][::-1]
        first = chain[0] if chain else lca
        L = nodes[first].landmarks
        ids = None if pid is None else np.array([pid])
        vec = kernel_cross(spec, point[None, :], X[L], ids, L)[0]
        for a, nxt in zip(chain, chain[1:] + [lca]):
            La, Ln = nodes[a].landmarks, nodes[nxt].landmarks
            vec = np.linalg.solve(_landmark_gram(spec, X, La), vec) @ kernel_cross(spec, X[La], X[Ln], La, Ln)
        return vec

    left = climb(x, x_id, pj)
    right = climb(xp, xp_id, pl)
    G = _landmark_gram(spec, X, nodes[lca].landmarks)
    return float(left @ np.linalg.solve(G, right))


def xi_decomposition(tree: PartitionTree, points, spec: KernelSpec, cap: int = DENSE_CAP, padded: bool = True):
    """Per-node positive semidefinite terms whose sum is ``dense_hier``.

    Returns one matrix per node in pre-order.  With ``padded`` each term is
    an n x n matrix; otherwise each item is ``(indices, block)``.
    """
    X = as_dense(points)
    n = X.shape[0]
    _check_cap(n, cap)
    nodes = tree.nodes
    psi = _psi_blocks(tree, X, spec)
    terms = []
    for nd in nodes:
        idx = tree.indices(nd)
        if nd.is_leaf:
            block = kernel_cross(spec, X[idx], y_ids=idx)
            if nd.parent >= 0:
                Lp = nodes[nd.parent].landmarks
                C = kernel_cross(spec, X[Lp], X[idx], Lp, idx)
                block = block - C.T @ np.linalg.solve(_landmark_gram(spec, X, Lp), C)
        else:
            L = nd.landmarks
            P = np.vstack([psi[j] for j in nd.children])
            G = _landmark_gram(spec, X, L)
            if nd.parent >= 0:
                Lp = nodes[nd.parent].landmarks
                C = kernel_cross(spec, X[Lp], X[L], Lp, L)
                middle = G - C.T @ np.linalg.solve(_landmark_gram(spec, X, Lp), C)
                R = np.linalg.solve(G, P.T)
                block = R.T @ middle @ R
            else:
                block = P @ np.linalg.solve(G, P.T)
        block = 0.5 * (block + block.T)
        if padded:
            full = np.zeros((n, n))
            full[np.ix_(idx, idx)] = block
            terms.append(full)
        else:
            terms.append((idx, block))
    return terms


def nystrom_dense(spec: KernelSpec, X, landmarks) -> np.ndarray:
    """``K(X, Xl) K(Xl, Xl)^{-1} K(Xl, X)`` by a direct solve."""
    X = as_dense(X)
    L = np.asarray(landmarks)
    ids = np.arange(X.shape[0])
    C = kernel_cross(spec, X[L], X, L, ids)
    return C.T @ np.linalg.solve(_landmark_gram(spec, X, L), C)


def compositional_gram(spec: KernelSpec, X, labels, landmarks) -> np.ndarray:
    """Flat composition: exact within each label group, Nystrom across groups."""
    X = as_dense(X)
    labels = np.asarray(labels)
    K = nystrom_dense(spec, X, landmarks)
    for g in np.unique(labels):
        idx = np.flatnonzero(labels == g)
        K[np.ix_(idx, idx)] = kernel_cross(spec, X[idx], y_ids=idx)
    return K
