"""Small dense linear-algebra kernel.

Every matrix is a 2-D ``float64`` numpy array. The systems solved here are
tiny (SINDy libraries have at most a handful of columns, GP kernel matrices
are ``N_mu x N_mu``), so everything goes through Cholesky factorizations of
symmetric positive definite matrices.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, RankDeficient

SYMMETRY_RTOL = 1e-8
JITTER_START = 1e-10
JITTER_MAX = 1e-4


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _symmetrize(spd):
    spd = as_matrix(spd, "spd")
    n, m = spd.shape
    if n != m:
        raise DimensionMismatch(f"expected a square matrix, got {spd.shape}")
    scale = np.max(np.abs(spd)) if spd.size else 0.0
    if np.max(np.abs(spd - spd.T), initial=0.0) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise NotPositiveDefinite("matrix is not symmetric within tolerance")
    return 0.5 * (spd + spd.T)


def _cholesky_once(a):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None


def cholesky_lower(spd, jitter=True):
    """Lower-triangular ``L`` with ``L @ L.T == spd``.

    If the plain factorization fails and ``jitter`` is set, ``c * trace/n`` is
    added to the diagonal with ``c`` escalating by 10x from 1e-10 up to 1e-4.
    """
    a = _symmetrize(spd)
    n = a.shape[0]
    L = _cholesky_once(a)
    if L is not None:
        return L
    if jitter:
        base = abs(np.trace(a)) / n if n else 0.0
        base = base if base > 0 else 1.0
        c = JITTER_START
        while c <= JITTER_MAX * (1 + 1e-9):
            L = _cholesky_once(a + c * base * np.eye(n))
            if L is not None:
                return L
            c *= 10.0
    raise NotPositiveDefinite("Cholesky factorization failed (non-positive pivot)")


def cho_solve_factor(L, rhs):
    """Solve ``(L L^T) X = rhs`` given the lower factor ``L``."""
    y = solve_triangular(L, rhs, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def cholesky_solve(spd, rhs):
    """Solve ``spd @ X = rhs`` for a symmetric positive definite ``spd``.

    Raises :class:`NotPositiveDefinite` if a pivot is non-positive; no jitter
    is applied here, callers that want conditioning use :func:`cholesky_lower`.
    """
    rhs_arr = np.asarray(rhs, dtype=np.float64)
    squeeze = rhs_arr.ndim == 1
    rhs_m = as_matrix(rhs_arr, "rhs")
    a = _symmetrize(spd)
    if a.shape[0] != rhs_m.shape[0]:
        raise DimensionMismatch(f"spd is {a.shape}, rhs has {rhs_m.shape[0]} rows")
    L = _cholesky_once(a)
    if L is None:
        raise NotPositiveDefinite("Cholesky factorization failed (non-positive pivot)")
    x = cho_solve_factor(L, rhs_m)
    return x[:, 0] if squeeze else x


def solve_ridge_least_squares(design, targets, ridge=0.0):
    """``argmin_W ||targets - design @ W||^2 + ridge * ||W||^2``.

    Solved through the normal equations ``(X^T X + ridge I) W = X^T Y`` with a
    Cholesky factorization. With ``ridge == 0`` the design must have full
    column rank.
    """
    t_arr = np.asarray(targets, dtype=np.float64)
    squeeze = t_arr.ndim == 1
    X = as_matrix(design, "design")
    Y = as_matrix(t_arr, "targets")
    n, p = X.shape
    if n < 1 or p < 1:
        raise DimensionMismatch(f"design must be non-empty, got {X.shape}")
    if Y.shape[0] != n:
        raise DimensionMismatch(f"design has {n} rows but targets have {Y.shape[0]}")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    gram = X.T @ X
    if ridge == 0:
        if np.linalg.matrix_rank(X) < p:
            raise RankDeficient("design is rank deficient and ridge is 0")
    else:
        gram[np.diag_indices(p)] += ridge
    L = _cholesky_once(0.5 * (gram + gram.T))
    if L is None:
        raise RankDeficient("normal equations are numerically singular")
    W = cho_solve_factor(L, X.T @ Y)
    return W[:, 0] if squeeze else W
