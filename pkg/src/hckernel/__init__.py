"""Hierarchically compositional kernels with linear-cost matrix algebra."""
from .kernels import KernelSpec, kernel_cross, kernel_eval
from .partition import PartitionTree, build_tree, levels_to_sizes, locate_leaf, locate_leaves
from .hmatrix import HierFactors, assemble, invert, materialize, matvec, oos_eval, oos_prepare

__version__ = "0.1.0"

__all__ = [
    "KernelSpec", "kernel_cross", "kernel_eval",
    "PartitionTree", "build_tree", "levels_to_sizes", "locate_leaf", "locate_leaves",
    "HierFactors", "assemble", "invert", "materialize", "matvec", "oos_eval", "oos_prepare",
]
