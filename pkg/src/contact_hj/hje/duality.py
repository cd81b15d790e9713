"""First integrals from a complete solution: F = p_Lambda o Sigma^{-1}."""

from __future__ import annotations

import itertools
import logging
from typing import Any, Sequence

import numpy as np

from contact_hj.errors import ContactError, ConvergenceError
from contact_hj.expr import jacobian, primal
from contact_hj.hje.solution import CompleteSolution
from contact_hj.numerics.linalg import null_space
from contact_hj.numerics.solvers import newton_system

logger = logging.getLogger(__name__)

_SEARCH_PER_AXIS = 5


def _initial_guess(solution: CompleteSolution, p: Sequence[float], target: np.ndarray) -> np.ndarray:
    best, best_norm = solution.param_box.center, float("inf")
    axes = [np.linspace(lo, hi, _SEARCH_PER_AXIS) for lo, hi in zip(solution.param_box.lows, solution.param_box.highs)]
    for lam in itertools.product(*axes):
        try:
            value = np.array([primal(v) for v in solution.fiber(list(p), list(lam))])
        except ContactError:
            continue
        norm = float(np.linalg.norm(value - target))
        if norm < best_norm:
            best, best_norm = np.asarray(lam, dtype=float), norm
    return best


def first_integrals_from_solution(
    solution: CompleteSolution,
    point: Sequence[float],
    *,
    initial: Sequence[float] | None = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """lambda with Sigma(Pi(point), lambda) = point, by damped Newton."""
    point = np.asarray(point, dtype=float)
    p = [float(v) for v in solution.fibration.project(point)]
    target = point[list(solution.fibration.fiber_indices)]
    guess = np.asarray(initial, dtype=float) if initial is not None else _initial_guess(solution, p, target)

    def residual(lam: np.ndarray) -> np.ndarray:
        return np.array([primal(v) for v in solution.fiber(p, list(lam))]) - target

    try:
        return newton_system(residual, lambda lam: solution.fiber_jacobian_lambda(p, lam), guess, tol=tol)
    except ConvergenceError:
        logger.warning("Inverting the complete solution failed at %s", point.tolist())
        raise


def first_integrals_generic(solution: CompleteSolution, point: Sequence[Any]) -> list[Any]:
    """Dual-aware F: float inversion plus one Newton correction carried in dual arithmetic."""
    lam0 = first_integrals_from_solution(solution, [primal(v) for v in point])
    p = solution.fibration.project(list(point))
    target = [point[i] for i in solution.fibration.fiber_indices]
    p_float = [primal(v) for v in p]
    inverse = np.linalg.inv(solution.fiber_jacobian_lambda(p_float, lam0))
    r = [f - t for f, t in zip(solution.fiber(p, [float(v) for v in lam0]), target)]
    k = len(lam0)
    return [float(lam0[i]) - sum(float(inverse[i, j]) * r[j] for j in range(k)) for i in range(k)]


def first_integral_jacobian(solution: CompleteSolution, point: Sequence[float]) -> np.ndarray:
    """F_* at ``point`` (k x dim)."""
    return np.array(jacobian(lambda m: first_integrals_generic(solution, m), [float(v) for v in point]), dtype=float)


def kernel_image_residual(solution: CompleteSolution, p: Sequence[float], lam: Sequence[float]) -> float:
    """max |F_* (sigma_lambda)_* v| over base basis vectors v."""
    m = solution.point_at(p, lam)
    f_star = first_integral_jacobian(solution, m)
    s = solution.section(lam).jacobian(p)
    return float(np.max(np.abs(f_star @ s)))


def leaf_isotropy_residual(solution: CompleteSolution, p: Sequence[float], lam: Sequence[float]) -> float:
    """d eta restricted to the F-leaf through Sigma(p, lambda), leaf taken as Ker F_*."""
    m = solution.point_at(p, lam)
    basis = null_space(first_integral_jacobian(solution, m))
    omega = solution.chart.darboux_omega()
    return float(np.max(np.abs(basis.T @ omega @ basis))) if basis.size else 0.0
