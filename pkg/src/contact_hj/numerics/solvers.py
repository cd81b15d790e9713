"""Root finding and least squares on floats."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from contact_hj.errors import ConvergenceError
from contact_hj.numerics.linalg import solve_pivoted

logger = logging.getLogger(__name__)

MAX_ITER = 50
STEP_TOL = 1e-12
_MAX_HALVINGS = 30


def newton_scalar(
    f: Callable[[float], float],
    df: Callable[[float], float],
    x0: float,
    *,
    tol: float = 1e-13,
    step_tol: float = STEP_TOL,
    max_iter: int = MAX_ITER,
) -> float:
    """Damped scalar Newton; the step is halved until |f| decreases."""
    x = float(x0)
    fx = f(x)
    for it in range(max_iter):
        if abs(fx) <= tol:
            return x
        slope = df(x)
        if slope == 0.0:
            raise ConvergenceError("zero derivative in Newton iteration", residual=abs(fx), iterations=it)
        step = -fx / slope
        for _ in range(_MAX_HALVINGS):
            candidate = x + step
            try:
                fc = f(candidate)
            except ArithmeticError:
                step *= 0.5
                continue
            if abs(fc) < abs(fx):
                break
            step *= 0.5
        else:
            raise ConvergenceError("Newton step could not reduce the residual", residual=abs(fx), iterations=it)
        x, fx = candidate, fc
        if abs(step) <= step_tol * max(1.0, abs(x)):
            return x
    if abs(fx) <= math.sqrt(tol):
        return x
    raise ConvergenceError("Newton iteration did not converge", residual=abs(fx), iterations=max_iter)


def newton_system(
    fn: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    tol: float = 1e-12,
    step_tol: float = STEP_TOL,
    max_iter: int = MAX_ITER,
) -> np.ndarray:
    """Damped Newton for square systems (halving, at most ``max_iter`` steps)."""
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fn(x), dtype=float)
    norm = float(np.linalg.norm(r))
    for it in range(max_iter):
        if norm <= tol:
            return x
        step = solve_pivoted(jac(x), -r)
        t = 1.0
        for _ in range(_MAX_HALVINGS):
            candidate = x + t * step
            try:
                rc = np.asarray(fn(candidate), dtype=float)
            except ArithmeticError:
                t *= 0.5
                continue
            if np.linalg.norm(rc) < norm:
                break
            t *= 0.5
        else:
            raise ConvergenceError("damped Newton could not reduce the residual", residual=norm, iterations=it)
        x, r = candidate, rc
        norm = float(np.linalg.norm(r))
        if np.linalg.norm(t * step) <= step_tol * max(1.0, float(np.linalg.norm(x))):
            break
    if norm <= max(tol, 1e-9):
        return x
    raise ConvergenceError("damped Newton did not converge", residual=norm, iterations=max_iter)


def bracketed_root(
    f: Callable[[float], float],
    df: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-15,
    max_iter: int = 200,
) -> float:
    """Safeguarded Newton-bisection on a sign-changing bracket."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise ConvergenceError("root is not bracketed", residual=min(abs(flo), abs(fhi)))
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0.0) == (flo > 0.0):
            lo, flo = x, fx
        else:
            hi = x
        slope = df(x)
        candidate = x - fx / slope if slope != 0.0 else math.nan
        if not (min(lo, hi) < candidate < max(lo, hi)):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - x) <= xtol * max(1.0, abs(x)):
            return candidate
        x = candidate
    return x


@dataclass(frozen=True)
class LeastSquaresResult:
    x: np.ndarray
    residual: float
    iterations: int


def gauss_newton(
    fn: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    tol: float = 1e-9,
    step_tol: float = STEP_TOL,
    max_iter: int = MAX_ITER,
) -> LeastSquaresResult:
    """Damped Gauss-Newton for overdetermined systems.

    Accepts when the residual norm drops below ``tol``; raises
    ConvergenceError otherwise.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fn(x), dtype=float)
    norm = float(np.linalg.norm(r))
    it = 0
    for it in range(max_iter):
        if norm < tol:
            return LeastSquaresResult(x, norm, it)
        step = scipy.linalg.lstsq(np.asarray(jac(x), dtype=float), -r)[0]
        t = 1.0
        improved = False
        for _ in range(_MAX_HALVINGS):
            candidate = x + t * step
            try:
                rc = np.asarray(fn(candidate), dtype=float)
            except ArithmeticError:
                t *= 0.5
                continue
            nc = float(np.linalg.norm(rc))
            if nc < norm:
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        x, r, norm = candidate, rc, nc
        if np.linalg.norm(t * step) <= step_tol * max(1.0, float(np.linalg.norm(x))):
            break
    if norm < tol:
        return LeastSquaresResult(x, norm, it + 1)
    logger.debug("Gauss-Newton stalled at residual %.3e after %d iterations", norm, it + 1)
    raise ConvergenceError("Gauss-Newton did not reach the tolerance", residual=norm, iterations=it + 1)
