"""Dense linear-algebra kernels shared by the geometric checks."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from contact_hj.errors import SingularSystemError

RANK_RTOL = 1e-10
PIVOT_TOL = 1e-12


def matrix_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0
    s = scipy.linalg.svdvals(a)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def null_space(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the kernel of ``a``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 0 or not np.any(a):
        return np.eye(a.shape[1])
    return scipy.linalg.null_space(a, rcond=rtol)


def solve_pivoted(a: np.ndarray, b: np.ndarray, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve ``a x = b`` by partial-pivoting LU.

    Raises SingularSystemError when the smallest pivot is below
    ``pivot_tol`` times the largest one.
    """
    a = np.asarray(a, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    pivots = np.abs(np.diag(lu))
    scale = pivots.max() if pivots.size else 0.0
    if scale == 0.0 or pivots.min() < pivot_tol * scale:
        raise SingularSystemError(
            f"singular {a.shape[0]}x{a.shape[1]} system (pivot ratio {pivots.min() / scale if scale else 0.0:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), np.asarray(b, dtype=float))


def pfaffian(a: np.ndarray) -> float:
    """Pfaffian of an antisymmetric matrix by expansion along the first row."""
    a = np.asarray(a, dtype=float)
    size = a.shape[0]
    if size == 0:
        return 1.0
    if size % 2 == 1:
        return 0.0
    if size == 2:
        return float(a[0, 1])
    total = 0.0
    rest = np.arange(1, size)
    for j in range(1, size):
        if a[0, j] == 0.0:
            continue
        keep = rest[rest != j]
        sign = 1.0 if j % 2 == 1 else -1.0
        total += sign * a[0, j] * pfaffian(a[np.ix_(keep, keep)])
    return total


def bordered(omega: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
    """``[[omega^T, A], [A^T, 0]]``, the system behind Reeb and contact fields."""
    omega = np.asarray(omega, dtype=float)
    a = np.asarray(coefficients, dtype=float).reshape(-1, 1)
    top = np.hstack([omega.T, a])
    bottom = np.hstack([a.T, np.zeros((1, 1))])
    return np.vstack([top, bottom])


def curl(jac: np.ndarray) -> np.ndarray:
    """Exterior derivative matrix ``d_i A_j - d_j A_i`` from ``jac[a, b] = dA_a/dm_b``."""
    jac = np.asarray(jac, dtype=float)
    return jac.T - jac
