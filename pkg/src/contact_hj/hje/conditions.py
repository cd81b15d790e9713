"""Residuals of the Hamilton-Jacobi conditions on sections and complete solutions."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from contact_hj.errors import ContactError
from contact_hj.expr import ScalarField, primal
from contact_hj.geometry import ContactSystem, contact_field, lxhg_residual, xi_of_H
from contact_hj.hje.fibration import Fibration
from contact_hj.hje.solution import CompleteSolution, Section
from contact_hj.numerics.linalg import matrix_rank, null_space

logger = logging.getLogger(__name__)


def _max_abs(a: Any) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def pullback_form(section: Section, system: ContactSystem, p: Sequence[float]) -> np.ndarray:
    """Coefficients of sigma*eta' on the base basis."""
    return section.jacobian(p).T @ system.form_at(section.point_at(p))


def pullback_dform(section: Section, system: ContactSystem, p: Sequence[float]) -> np.ndarray:
    s = section.jacobian(p)
    return s.T @ system.d_form(section.point_at(p)) @ s


def projected_field(section: Section, system: ContactSystem, p: Sequence[float]) -> np.ndarray:
    """X^sigma = Pi_* X(sigma(p))."""
    x = contact_field(system, section.point_at(p))
    return x[list(section.fibration.base_indices)]


def hje_residual(section: Section, system: ContactSystem, p: Sequence[float]) -> np.ndarray:
    m = section.point_at(p)
    x = contact_field(system, m)
    x_sigma = x[list(section.fibration.base_indices)]
    return section.jacobian(p) @ x_sigma - x


def weak_hje_residual(section: Section, system: ContactSystem, p: Sequence[float]) -> tuple[np.ndarray, float]:
    """Contraction residual on the base basis and the scalar ``i_X sigma*eta - sigma*H`` residual."""
    m = section.point_at(p)
    s = section.jacobian(p)
    x_sigma = contact_field(system, m)[list(section.fibration.base_indices)]
    pushed = s @ x_sigma
    omega = system.d_form(m)
    a = system.form_at(m)
    grad = system.grad_H_eff(m)
    c = xi_of_H(system, m)
    vector = pushed @ omega @ s - (c * a - grad) @ s
    scalar = float(a @ pushed) - primal(system.H_eff(m))
    return vector, scalar


@dataclass
class FibrationReport:
    preisotropy: bool
    coisotropy_of_section: bool | None
    details: dict[str, float | int] = field(default_factory=dict)


def fibration_condition(
    fibration: Fibration,
    system: ContactSystem,
    point: Sequence[float],
    section: Section | None = None,
    base_point: Sequence[float] | None = None,
    tol: float = 1e-9,
) -> FibrationReport:
    """Subspace conditions under which the strong and weak HJE agree.

    Pre-isotropy: ``Ker Pi_* cap Ker eta`` is d eta-orthogonal to ``Ker Pi_*``.
    Co-isotropy: ``(Im sigma_*)^perp cap Ker eta`` lies inside ``Im sigma_*``.
    """
    point = np.asarray(point, dtype=float)
    omega = system.d_form(point)
    a = system.form_at(point)
    k = fibration.kernel_basis()
    v = k @ null_space((a @ k).reshape(1, -1))
    pairing = v.T @ omega @ k
    scale = max(1.0, _max_abs(omega))
    details: dict[str, float | int] = {
        "kernel_dim": k.shape[1],
        "kernel_cap_ker_eta_dim": v.shape[1],
        "pairing_rank": matrix_rank(pairing) if pairing.size and _max_abs(pairing) > tol * scale else 0,
        "pairing_max": _max_abs(pairing),
    }
    pre = details["pairing_max"] <= tol * scale

    coiso: bool | None = None
    if section is not None:
        if base_point is None:
            base_point = fibration.project(point)
        m = section.point_at(base_point)
        s = section.jacobian(base_point)
        omega_m = system.d_form(m)
        a_m = system.form_at(m)
        u = null_space(np.vstack([s.T @ omega_m, a_m.reshape(1, -1)]))
        rank_s = matrix_rank(s)
        rank_su = matrix_rank(np.hstack([s, u])) if u.size else rank_s
        details.update({"image_rank": rank_s, "orthogonal_dim": u.shape[1], "joint_rank": rank_su})
        coiso = rank_su == rank_s
    return FibrationReport(pre, coiso, details)


def pseudo_isotropy_residual(solution: CompleteSolution, lam: Sequence[float], p: Sequence[float], system: ContactSystem | None = None) -> float:
    """Max entry of sigma_lambda* d eta (Darboux form unless ``system`` carries g)."""
    section = solution.section([float(v) for v in lam])
    if system is None:
        s = section.jacobian(p)
        return _max_abs(s.T @ solution.chart.darboux_omega() @ s)
    return _max_abs(pullback_dform(section, system, p))


def g_pseudo_isotropy_residual(
    solution: CompleteSolution,
    system: ContactSystem,
    g: ScalarField,
    lam: Sequence[float],
    p: Sequence[float],
) -> tuple[float, float]:
    """``sigma_lambda* d(g eta)`` and ``X_H(g) + g xi(H)`` at sigma_lambda(p)."""
    rescaled = system.plain.with_conformal(g)
    matrix = pseudo_isotropy_residual(solution, lam, p, rescaled)
    m = solution.point_at(p, lam)
    return matrix, abs(lxhg_residual(system, g, m))


@dataclass
class SolutionReport:
    passed: bool
    samples: int
    min_abs_det: float
    max_hje: float
    max_t2_vector: float
    max_t2_scalar: float
    worst: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    def residuals(self) -> dict[str, float]:
        return {
            "min_abs_det": self.min_abs_det,
            "max_hje": self.max_hje,
            "max_t2_vector": self.max_t2_vector,
            "max_t2_scalar": self.max_t2_scalar,
        }


def _check_one(solution: CompleteSolution, system: ContactSystem, p: np.ndarray, lam: np.ndarray) -> tuple[float, float, float, float]:
    j = solution.jacobian(p, lam)
    det = abs(float(np.linalg.det(j)))
    section = solution.section(lam)
    hje = _max_abs(hje_residual(section, system, p))
    m = solution.point_at(p, lam)
    x = contact_field(system, m)
    # X^Sigma = (Pi_* X, 0) on N x Lambda
    x_sigma = np.concatenate([x[list(solution.fibration.base_indices)], np.zeros(solution.param_dim)])
    pushed = j @ x_sigma
    omega = system.d_form(m)
    a = system.form_at(m)
    grad = system.grad_H_eff(m)
    c = xi_of_H(system, m)
    t2_vector = _max_abs(pushed @ omega @ j - (c * a - grad) @ j)
    t2_scalar = abs(float(a @ pushed) - primal(system.H_eff(m)))
    return det, hje, t2_vector, t2_scalar


def complete_solution_check(
    solution: CompleteSolution,
    system: ContactSystem,
    samples: Sequence[tuple[np.ndarray, np.ndarray]],
    *,
    tol: float = 1e-8,
    det_threshold: float = 1e-10,
    workers: int = 1,
) -> SolutionReport:
    """Jacobian, HJE and contact-field (t2) residuals aggregated over ``samples``."""
    samples = [(np.asarray(p, dtype=float), np.asarray(lam, dtype=float)) for p, lam in samples]

    def run(item: tuple[np.ndarray, np.ndarray]) -> tuple[float, float, float, float] | ContactError:
        try:
            return _check_one(solution, system, *item)
        except ContactError as exc:
            return exc

    if workers > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(samples))) as ex:
            results = list(ex.map(run, samples))
    else:
        results = [run(item) for item in samples]

    report = SolutionReport(True, len(samples), float("inf"), 0.0, 0.0, 0.0)
    for (p, lam), res in zip(samples, results):
        where = {"p": p.tolist(), "lambda": lam.tolist()}
        if isinstance(res, ContactError):
            report.failures.append(f"evaluation failed at {where}: {res}")
            continue
        det, hje, t2v, t2s = res
        if det < report.min_abs_det:
            report.min_abs_det = det
            report.worst["min_abs_det"] = where
        if det <= det_threshold:
            report.failures.append(f"singular Jacobian (|det|={det:.3e}) at {where}")
        for name, value in (("max_hje", hje), ("max_t2_vector", t2v), ("max_t2_scalar", t2s)):
            if value > getattr(report, name):
                setattr(report, name, value)
                report.worst[name] = where
    for name in ("max_hje", "max_t2_vector", "max_t2_scalar"):
        if getattr(report, name) > tol:
            report.failures.append(f"{name}={getattr(report, name):.3e} exceeds {tol:.1e} at {report.worst[name]}")
    report.passed = not report.failures
    logger.debug("complete solution check: %d samples, passed=%s", len(samples), report.passed)
    return report
