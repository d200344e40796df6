"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .data import InteractionMatrix


def check_interactions(X, n_items: int | None = None, name: str = "X") -> InteractionMatrix:
    """Coerce a user x item 0/1 matrix (dense, sparse or InteractionMatrix)."""
    if isinstance(X, InteractionMatrix):
        ix = X
    else:
        if sp.issparse(X):
            mat = sp.csr_matrix(X, dtype=np.float64)
            values = mat.data
        else:
            mat = np.asarray(X, dtype=np.float64)
            if mat.ndim != 2:
                raise ValueError(f"{name} must be 2-dimensional, got shape {mat.shape}")
            values = mat
        if not np.isfinite(values).all():
            raise ValueError(f"{name} contains non-finite values")
        if not np.isin(values, (0.0, 1.0)).all():
            raise ValueError(f"{name} must be a binary (0/1) interaction matrix")
        ix = InteractionMatrix.from_csr(mat)
    if ix.m == 0:
        raise ValueError(f"{name} has no users")
    if n_items is not None and ix.n != n_items:
        raise ValueError(f"{name} has {ix.n} items, expected {n_items}")
    return ix


def check_same_users(X: InteractionMatrix, Y: InteractionMatrix, name: str = "X_valid") -> None:
    if (X.m, X.n) != (Y.m, Y.n):
        raise ValueError(f"{name} shape {(Y.m, Y.n)} does not match X {(X.m, X.n)}")
    for u, (a, b) in enumerate(zip(X.rows, Y.rows)):
        if np.intersect1d(a, b).size:
            raise ValueError(f"{name} overlaps X for user {u}")


def check_k(k) -> int:
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    return int(k)
