"""Dense linear-algebra kernels used by the filters.

All arrays are float64 ndarrays. Covariance-like matrices are kept exactly
symmetric by construction: every routine that could break symmetry through
rounding re-symmetrizes before returning.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionError, SingularInnovationError

__all__ = ["bullet", "spd_solve", "symmetrize"]


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part (a + a.T) / 2."""
    return (a + a.T) / 2.0


def bullet(tensor: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Contract a 3-tensor with a matrix over the last two axes.

    ``out[v] = sum_{i,j} tensor[v, i, j] * mat[i, j]`` — the product that
    applies a matrix-valued perturbation through its Jacobian tensor. For a
    stack of matrices this is just a reshape and a matvec, which is how it
    is implemented.

    Parameters
    ----------
    tensor : (m, p, q) ndarray
    mat : (p, q) ndarray

    Returns
    -------
    (m,) ndarray
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    mat = np.asarray(mat, dtype=np.float64)
    if tensor.ndim != 3:
        raise DimensionError(f"bullet: expected 3-d tensor, got shape {tensor.shape}")
    if mat.shape != tensor.shape[1:]:
        raise DimensionError(
            f"bullet: matrix shape {mat.shape} does not match tensor trailing dims {tensor.shape[1:]}"
        )
    m = tensor.shape[0]
    return tensor.reshape(m, -1) @ mat.reshape(-1)


def spd_solve(s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``s @ x = b`` for symmetric positive-definite ``s``.

    Uses a Cholesky factorization; the explicit inverse is never formed.
    ``s`` is symmetrized first so callers may pass matrices that are
    symmetric only up to rounding.

    Raises
    ------
    SingularInnovationError
        If the factorization fails. The error carries the smallest
        diagonal pivot encountered by a reference factorization, which is
        the quantity that went non-positive.
    """
    s = np.asarray(s, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"spd_solve: expected square matrix, got shape {s.shape}")
    s = symmetrize(s)
    if b.shape[0] != s.shape[0]:
        raise DimensionError(f"spd_solve: rhs leading dim {b.shape[0]} != matrix dim {s.shape[0]}")
    try:
        return cho_solve(cho_factor(s, lower=True), b)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("spd_solve: matrix is not positive definite", _min_pivot(s)) from exc


def _min_pivot(s: np.ndarray) -> float:
    """Smallest diagonal pivot of a (possibly failing) Cholesky sweep.

    Only runs on the error path, so a plain python loop is fine. Stops at
    the first non-positive pivot, which is the value of interest.
    """
    a = s.copy()
    n = a.shape[0]
    min_pivot = np.inf
    for k in range(n):
        pivot = a[k, k]
        min_pivot = min(min_pivot, pivot)
        if pivot <= 0.0:
            return float(pivot)
        root = np.sqrt(pivot)
        a[k:, k] /= root
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k + 1 :, k])
    return float(min_pivot)
