"""
Splitting a point cloud with random projections
================================================

The hierarchical kernel starts from a balanced binary tree over the
training points.  Each internal node projects its points onto a random
unit direction and cuts at the median.
"""

import numpy as np

from hckernel import build_tree, levels_to_sizes, locate_leaf

rng = np.random.default_rng(0)
X = rng.uniform(-1, 1, size=(1000, 2))

# Leaf capacity and landmark count can be tied to a level count: with
# three levels the 1000 points end up in eight leaves of about 125.
n0, r = levels_to_sizes(len(X), 3)
tree = build_tree(X, n0, r, seed=7)
print(f"n0={n0}, r={r}, depth={tree.depth()}, leaves={len(tree.leaves())}")
print("leaf sizes:", [leaf.size for leaf in tree.leaves()])

# Every internal node keeps its direction, its cut value and a random
# subset of its points as landmarks.
root = tree.root
print("root direction", np.round(root.direction, 3), "cut at", round(root.threshold, 4))
print("first root landmarks", root.landmarks[:5])

# New points descend by comparing their projection with each cut.
path = locate_leaf(tree, np.array([0.2, -0.4]))
print("path of (0.2, -0.4):", path)

# Training points always route back to the leaf that holds them.
owner = tree.leaf_of_position()
assert all(locate_leaf(tree, X[tree.perm[k]])[-1] == owner[k] for k in range(0, 1000, 37))
