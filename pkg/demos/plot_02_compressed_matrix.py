"""
The compressed kernel matrix and its three fast operations
===========================================================

Assembling the hierarchical kernel over a tree yields dense leaf blocks
plus small landmark matrices.  Products, inverses and out-of-sample
evaluations all run in time linear in n.  For a small problem we can
check each against its dense counterpart.
"""

import numpy as np

from hckernel import KernelSpec, assemble, build_tree, invert, materialize, matvec, oos_eval, oos_prepare
from hckernel.reference import dense_cross, dense_hier

rng = np.random.default_rng(1)
X = rng.uniform(-1, 1, size=(512, 3))
spec = KernelSpec("laplace", sigma=0.8, jitter=1e-4)
tree = build_tree(X, 16, 16, seed=0)
H = assemble(tree, X, spec)

K = materialize(H)
print("matches the direct recursion:", np.linalg.norm(K - dense_hier(tree, X, spec)) / np.linalg.norm(K))
print(f"floats stored: {H.floats_stored()} ({H.floats_stored() / (512 * 16):.2f} n r) vs {512**2} dense")

b = rng.normal(size=512)
print("product error:", np.linalg.norm(matvec(H, b) - K @ b) / np.linalg.norm(K @ b))

# The inverse keeps the same block layout, so it is applied the same way.
shift = 1e-2 - spec.jitter
Hinv = invert(H, shift)
print("solve residual:", np.abs(matvec(Hinv, K @ b + shift * b) - b).max())

# For new points only the root-to-leaf path matters.
w = matvec(Hinv, np.sin(3 * X[:, 0]))
state = oos_prepare(H, X, w)
Xnew = rng.uniform(-1, 1, size=(5, 3))
print("out-of-sample:", oos_eval(state, Xnew))
print("dense check:  ", w @ dense_cross(tree, X, spec, Xnew))
