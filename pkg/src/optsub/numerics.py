"""Small dense linear-algebra helpers shared by the estimators.

Matrices and vectors are plain ``numpy`` float64 arrays. The helpers here
add the validation and the ridge fallback used for information matrices
that are close to singular (strongly collinear covariates).
"""

from __future__ import annotations

import numpy as np

from .errors import NotPositiveDefinite

PIVOT_FLOOR = 1e-12
RIDGE = 1e-10
SYMMETRY_TOL = 1e-10


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_symmetric(a) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = 1.0 + np.max(np.abs(m)) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return m


def _cholesky(a: np.ndarray) -> np.ndarray:
    """Cholesky factor with one ridge retry; raises NotPositiveDefinite."""
    dim = a.shape[0]
    level = np.trace(a) / dim if dim else 0.0
    if not np.isfinite(level) or level <= 0:
        raise NotPositiveDefinite("matrix has non-positive trace")
    floor = PIVOT_FLOOR * level
    candidate = a
    for attempt in range(2):
        try:
            chol = np.linalg.cholesky(candidate)
        except np.linalg.LinAlgError:
            chol = None
        if chol is not None and np.min(np.diag(chol)) ** 2 > floor:
            return chol
        if attempt == 0:
            candidate = a + RIDGE * level * np.eye(dim)
    raise NotPositiveDefinite("factorization failed after ridge retry")


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive-definite ``a``."""
    a = as_symmetric(a)
    b = np.asarray(b, dtype=float)
    chol = _cholesky(a)
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, y)


def invert_spd(a) -> np.ndarray:
    a = as_symmetric(a)
    chol = _cholesky(a)
    inv_chol = np.linalg.solve(chol, np.eye(a.shape[0]))
    out = inv_chol.T @ inv_chol
    return 0.5 * (out + out.T)


def frobenius_norm(a) -> float:
    """Scaled by the largest entry so tiny or huge matrices neither underflow nor overflow."""
    a = np.abs(np.asarray(a, dtype=float))
    top = float(a.max()) if a.size else 0.0
    if top == 0.0 or not np.isfinite(top):
        return top
    return top * float(np.sqrt(np.sum((a / top) ** 2)))


def sandwich(bread: np.ndarray, meat: np.ndarray) -> np.ndarray:
    """``bread @ meat @ bread`` symmetrized."""
    out = bread @ meat @ bread
    return 0.5 * (out + out.T)


def weighted_gram(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Return ``sum_i w_i x_i x_i^T``."""
    out = (x * w[:, None]).T @ x
    return 0.5 * (out + out.T)
