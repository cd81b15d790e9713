"""Adaptive Simpson quadrature with Richardson correction.

Integrands may return floats, duals or numpy arrays. Refinement decisions
look only at primal values, so the quadrature of a dual-valued integrand is
the exact derivative of the float quadrature on the same mesh.
"""

from __future__ import annotations

import logging
from typing import Any, Callable

import numpy as np

from contact_hj.errors import QuadratureError
from contact_hj.expr.dual import Dual, primal

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_INTERVALS = 1 << 20
_INITIAL_PANELS = 4


def _magnitude(value: Any) -> float:
    if isinstance(value, np.ndarray):
        if value.dtype == object:
            return max((abs(primal(v)) for v in value.ravel()), default=0.0)
        return float(np.max(np.abs(value))) if value.size else 0.0
    return abs(primal(value))


def integrate(
    fn: Callable[[float], Any],
    a: Any,
    b: Any,
    *,
    tol: float = DEFAULT_TOL,
    max_intervals: int = MAX_INTERVALS,
) -> Any:
    """Integral of ``fn`` over ``[a, b]`` to absolute tolerance ``tol``.

    Dual endpoints are handled by mapping onto ``[0, 1]``.
    """
    if isinstance(a, Dual) or isinstance(b, Dual):
        width = b - a
        return integrate(lambda s: fn(a + width * s) * width, 0.0, 1.0, tol=tol, max_intervals=max_intervals)

    a, b = float(a), float(b)
    if a == b:
        return 0.0 * fn(a)

    edges = np.linspace(a, b, _INITIAL_PANELS + 1)
    values = [fn(float(x)) for x in edges]
    stack: list[tuple[float, float, Any, Any, Any, Any, float]] = []
    for i in range(_INITIAL_PANELS - 1, -1, -1):
        lo, hi = float(edges[i]), float(edges[i + 1])
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        whole = (hi - lo) / 6.0 * (values[i] + 4.0 * fm + values[i + 1])
        stack.append((lo, hi, values[i], fm, values[i + 1], whole, tol / _INITIAL_PANELS))

    total: Any = 0.0
    intervals = _INITIAL_PANELS
    span = abs(b - a)
    # error estimates of intervals accepted at the width floor without converging
    unresolved, floor_hits = 0.0, 0
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        lmid, rmid = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fn(lmid), fn(rmid)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        if _magnitude(delta) <= 15.0 * eps:
            total = total + left + right + delta / 15.0
            continue
        if abs(hi - lo) <= 1e-14 * span:
            unresolved += _magnitude(delta) / 15.0
            floor_hits += 1
            total = total + left + right + delta / 15.0
            continue
        intervals += 1
        if intervals > max_intervals:
            raise QuadratureError(f"no convergence on [{a:.6g}, {b:.6g}] within {max_intervals} intervals")
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps))
    if unresolved > tol:
        raise QuadratureError(f"integrand not resolved on [{a:.6g}, {b:.6g}]: error estimate {unresolved:.3e} at the width floor exceeds {tol:.1e}")
    if floor_hits:
        logger.debug("quadrature on [%.6g, %.6g]: %d intervals at the width floor, error estimate %.3e", a, b, floor_hits, unresolved)
    logger.debug("quadrature on [%.6g, %.6g]: %d intervals", a, b, intervals)
    return total
