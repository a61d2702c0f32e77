"""Balanced binary random-projection partitioning tree.

Each nonleaf node splits its points in two halves around the median of
their projections on a random unit direction, and carries a uniformly
sampled landmark set drawn from its own points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import as_dense

__all__ = [
    "TreeNode",
    "PartitionTree",
    "levels_to_sizes",
    "build_tree",
    "locate_leaf",
    "locate_leaves",
]


@dataclass
class TreeNode:
    id: int
    parent: int
    lo: int
    hi: int
    children: tuple = ()
    direction: np.ndarray | None = None
    threshold: float = 0.0
    # original point indices (not positions in ``perm``)
    landmarks: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def size(self) -> int:
        return self.hi - self.lo


@dataclass
class PartitionTree:
    """Pre-order list of nodes plus the point permutation.

    ``perm[lo:hi]`` lists the original indices of the points owned by a node
    whose range is ``[lo, hi)``.
    """

    nodes: list
    perm: np.ndarray
    n0: int
    r: int
    seed: int
    d: int

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def leaves(self) -> list:
        return [nd for nd in self.nodes if nd.is_leaf]

    def nonleaves(self) -> list:
        return [nd for nd in self.nodes if not nd.is_leaf]

    def postorder(self):
        # reversed pre-order visits every child before its parent
        return reversed(self.nodes)

    def indices(self, node: TreeNode) -> np.ndarray:
        return self.perm[node.lo:node.hi]

    def depth(self) -> int:
        """Number of levels; a single-leaf tree has depth 1."""
        best = 1
        depth = [1] * len(self.nodes)
        for nd in self.nodes[1:]:
            depth[nd.id] = depth[nd.parent] + 1
            best = max(best, depth[nd.id])
        return best

    def leaf_of_position(self) -> np.ndarray:
        """Leaf id for every position of ``perm``."""
        out = np.empty(self.n, dtype=np.int64)
        for nd in self.leaves():
            out[nd.lo:nd.hi] = nd.id
        return out

    def path_to_root(self, node_id: int) -> list:
        path = [node_id]
        while self.nodes[path[-1]].parent >= 0:
            path.append(self.nodes[path[-1]].parent)
        return path


def levels_to_sizes(n: int, j: int) -> tuple:
    """Coupled leaf capacity and rank for a tree with ``j`` levels.

    Returns ``(n0, r) = (ceil(n / 2**j), floor(n / 2**j))``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    jmax = int(math.floor(math.log2(n)))
    if not 0 <= j <= jmax:
        raise ValueError(f"level count {j} out of range [0, {jmax}] for n={n}")
    return -(-n // 2**j), n // 2**j


def _project(X: np.ndarray, direction: np.ndarray) -> np.ndarray:
    # Row-wise reduction, identical for one row or many, so that test-time
    # routing reproduces the build-time split bit for bit.
    return (X * direction).sum(axis=1)


def _node_rng(seed: int, path: tuple) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=path))


def _split_point(sorted_proj: np.ndarray) -> int:
    m = len(sorted_proj)
    k = (m + 1) // 2
    v = sorted_proj[k - 1]
    if sorted_proj[k] != v:
        return k
    # ties straddle the median: move the cut to the nearest value change
    k_lo = int(np.searchsorted(sorted_proj, v, side="left"))
    k_hi = int(np.searchsorted(sorted_proj, v, side="right"))
    options = [c for c in (k_lo, k_hi) if 0 < c < m]
    if not options:
        return k
    return min(options, key=lambda c: (abs(c - k), c))


def build_tree(points, n0: int, r: int, seed: int = 0) -> PartitionTree:
    """Recursively bisect ``points`` until every range holds at most ``n0``.

    Parameters
    ----------
    points : array_like, shape (n, d)
    n0 : int
        Leaf capacity.
    r : int
        Landmark count per nonleaf node (clamped to the node size).
    seed : int
        Seeds the per-node random streams (keyed on the node's path from
        the root), so the tree is a deterministic function of the inputs.
    """
    X = as_dense(points)
    n, d = X.shape
    if n < 1:
        raise ValueError("cannot partition an empty point set")
    if n0 < 1 or r < 1:
        raise ValueError("n0 and r must be positive")
    if r > n0:
        raise ValueError(f"rank r={r} exceeds leaf capacity n0={n0}")

    perm = np.arange(n, dtype=np.int64)
    nodes: list = []

    def grow(lo, hi, parent, path):
        node = TreeNode(id=len(nodes), parent=parent, lo=lo, hi=hi)
        nodes.append(node)
        m = hi - lo
        if m <= n0:
            return node.id
        rng = _node_rng(seed, path)
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        idx = perm[lo:hi]
        proj = _project(X[idx], u)
        order = np.lexsort((idx, proj))
        sp = proj[order]
        k = _split_point(sp)
        perm[lo:hi] = idx[order]
        node.direction = u
        node.threshold = float(sp[k - 1])
        node.landmarks = np.sort(rng.choice(perm[lo:hi], size=min(r, m), replace=False))
        left = grow(lo, lo + k, node.id, path + (0,))
        right = grow(lo + k, hi, node.id, path + (1,))
        node.children = (left, right)
        return node.id

    grow(0, n, -1, ())
    return PartitionTree(nodes=nodes, perm=perm, n0=n0, r=r, seed=seed, d=d)


def locate_leaf(tree: PartitionTree, x) -> list:
    """Root-to-leaf path of node ids for a single point."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != tree.d:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {tree.d}")
    row = x[None, :]
    node = tree.root
    path = [node.id]
    while not node.is_leaf:
        p = _project(row, node.direction)[0]
        node = tree.nodes[node.children[0] if p <= node.threshold else node.children[1]]
        path.append(node.id)
    return path


def locate_leaves(tree: PartitionTree, X) -> np.ndarray:
    """Leaf id for every row of ``X`` (vectorized :func:`locate_leaf`)."""
    X = as_dense(X)
    if X.shape[1] != tree.d:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {tree.d}")
    out = np.empty(X.shape[0], dtype=np.int64)
    stack = [(tree.root.id, np.arange(X.shape[0]))]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            out[rows] = nid
            continue
        if len(rows) == 0:
            continue
        go_left = _project(X[rows], node.direction) <= node.threshold
        stack.append((node.children[0], rows[go_left]))
        stack.append((node.children[1], rows[~go_left]))
    return out
