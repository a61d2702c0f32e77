"""
Linear cost in the number of points
====================================

At a fixed rank, building and inverting the hierarchical matrix should
scale linearly with n, and storage should stay near four n r floats plus
one more n r for the landmark Cholesky factors.
"""

from hckernel.bench import loglog_slope, scaling_sweep

ns = [2**k for k in range(11, 16)]
rows = scaling_sweep(ns, r=32, d=8, repeats=2)
for row in rows:
    print(f"n={row['n']:6d}  build {row['build_s']:.3f}s  invert {row['invert_s']:.3f}s  "
          f"floats/(n r) {row['floats_stored'] / (row['n'] * 32):.3f}")
print("log-log slope of total time:", round(loglog_slope(ns, [row["total_s"] for row in rows]), 3))
