"""Numerical kernels: dense linear algebra, quadrature and solvers."""

from contact_hj.numerics.linalg import bordered, curl, matrix_rank, null_space, pfaffian, solve_pivoted
from contact_hj.numerics.quadrature import integrate
from contact_hj.numerics.solvers import (
    LeastSquaresResult,
    bracketed_root,
    gauss_newton,
    newton_scalar,
    newton_system,
)

__all__ = [
    "LeastSquaresResult",
    "bordered",
    "bracketed_root",
    "curl",
    "gauss_newton",
    "integrate",
    "matrix_rank",
    "newton_scalar",
    "newton_system",
    "null_space",
    "pfaffian",
    "solve_pivoted",
]
