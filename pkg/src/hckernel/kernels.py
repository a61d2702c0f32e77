"""Base kernel functions and cross-Gram evaluation.

Every approximate kernel in the package is built on top of a strictly
positive-definite base kernel ``k``.  For conditioning, the base kernel is
optionally jittered::

    k'(x, x') = k(x, x') + jitter * delta(x, x')

where ``delta`` is keyed on point *identity* (a training index), never on
coordinate equality.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist, pdist, squareform

__all__ = ["FAMILIES", "KernelSpec", "kernel_eval", "kernel_cross", "as_dense"]

FAMILIES = ("gaussian", "laplace", "inv_multiquadric")

_ALIASES = {
    "gauss": "gaussian",
    "rbf": "gaussian",
    "exponential": "laplace",
    "invmq": "inv_multiquadric",
    "inverse_multiquadric": "inv_multiquadric",
}


@dataclass(frozen=True)
class KernelSpec:
    """Base kernel family, range parameter and diagonal jitter.

    Parameters
    ----------
    family : {'gaussian', 'laplace', 'inv_multiquadric'}
        ``'invmq'`` is accepted as an alias.
    sigma : float
        Range parameter, strictly positive.
    jitter : float
        Diagonal stabilizer added on identical points.  Must stay below any
        regularization it is paired with; that is checked at fit time.
    """

    family: str = "gaussian"
    sigma: float = 1.0
    jitter: float = 0.0

    def __post_init__(self):
        family = _ALIASES.get(self.family, self.family)
        if family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.jitter >= 0:
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")

    def with_jitter(self, jitter: float) -> "KernelSpec":
        return KernelSpec(self.family, self.sigma, jitter)

    @property
    def peak(self) -> float:
        """Value of k(x, x) without jitter."""
        return self.sigma if self.family == "inv_multiquadric" else 1.0


def as_dense(X) -> np.ndarray:
    """Return a C-contiguous 2-D float64 array (densifying sparse input)."""
    if sparse.issparse(X):
        X = X.toarray()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D point set, got shape {X.shape}")
    return np.ascontiguousarray(X)


def _profile(spec: KernelSpec, dist: np.ndarray) -> np.ndarray:
    # dist is squared Euclidean for gaussian/invmq, L1 for laplace
    s = spec.sigma
    if spec.family == "gaussian":
        return np.exp(-dist / (2.0 * s * s))
    if spec.family == "laplace":
        return np.exp(-dist / s)
    return (s * s) / np.sqrt(dist + s * s)


def _metric(spec: KernelSpec) -> str:
    return "cityblock" if spec.family == "laplace" else "sqeuclidean"


def kernel_eval(spec: KernelSpec, x, xp, same_identity: bool = False) -> float:
    """Evaluate k'(x, x') for a single pair of points.

    The jitter is added only when ``same_identity`` is set; two distinct
    points with equal coordinates do not receive it.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    xp = np.asarray(xp, dtype=np.float64).ravel()
    if x.shape != xp.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {xp.shape[0]}")
    diff = x - xp
    if spec.family == "laplace":
        dist = np.sum(np.abs(diff))
    else:
        dist = np.sum(diff * diff)
    value = float(_profile(spec, np.float64(dist)))
    if same_identity:
        value += spec.jitter
    return value


def kernel_cross(spec: KernelSpec, Y, Z=None, y_ids=None, z_ids=None) -> np.ndarray:
    """Cross-Gram matrix K'(Y, Z).

    Parameters
    ----------
    spec : KernelSpec
    Y : array_like, shape (n_Y, d)
    Z : array_like, shape (n_Z, d), optional
        When omitted the symmetric Gram K'(Y, Y) is returned; it is
        assembled from the condensed upper triangle so it is exactly
        symmetric.
    y_ids, z_ids : array_like of int, optional
        Point identities.  The jitter is added to entry (i, j) iff
        ``y_ids[i] == z_ids[j]``.  For the symmetric case the identities
        default to positions, so the jitter lands on the diagonal; for the
        cross case no jitter is applied unless both are given.

    Returns
    -------
    ndarray, shape (n_Y, n_Z)
    """
    Y = as_dense(Y)
    metric = _metric(spec)
    if Z is None:
        n = Y.shape[0]
        if n == 1:
            K = np.full((1, 1), _profile(spec, np.float64(0.0)))
        else:
            K = squareform(_profile(spec, pdist(Y, metric)), checks=False)
            np.fill_diagonal(K, _profile(spec, np.float64(0.0)))
        if spec.jitter:
            if y_ids is None:
                K[np.diag_indices(n)] += spec.jitter
            else:
                ids = np.asarray(y_ids)
                K += spec.jitter * (ids[:, None] == ids[None, :])
        return K

    Z = as_dense(Z)
    if Y.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {Y.shape[1]} vs {Z.shape[1]}")
    K = _profile(spec, cdist(Y, Z, metric))
    if spec.jitter and y_ids is not None and z_ids is not None:
        yi = np.asarray(y_ids)
        zi = np.asarray(z_ids)
        K += spec.jitter * (yi[:, None] == zi[None, :])
    return K
