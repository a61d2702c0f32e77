"""
How well do approximate kernels preserve a kernel PCA embedding?
=================================================================

Embed with the exact Gram, embed again with an approximation, then find
the best linear map between the two.  The leftover residual measures how
far apart the embeddings are.
"""

import numpy as np

from hckernel import KernelSpec, kernel_cross
from hckernel.kpca import alignment_diff, approx_gram, embed

rng = np.random.default_rng(5)
X = rng.uniform(-1, 1, size=(1500, 3))
X[:, 2] = np.sin(2 * X[:, 0]) + 0.1 * X[:, 2]

exact = embed(kernel_cross(KernelSpec("gaussian", 0.5), X), 3)
spec = KernelSpec("gaussian", 0.5, 1e-8)
for r in (16, 64, 256):
    row = {m: alignment_diff(exact, embed(approx_gram(X, m, spec, r, seed=0), 3)) for m in ("hier", "nystrom", "rff", "indep")}
    print(f"r={r:4d}  " + "  ".join(f"{m} {v:.4f}" for m, v in row.items()))

# The metric ignores invertible linear maps of the embedding.
print("after a random linear map:", alignment_diff(exact, exact @ rng.normal(size=(3, 3))))
