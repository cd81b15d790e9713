"""Integration by quadratures for pseudo-isotropic complete solutions.

Given Sigma with sigma_lambda* d eta' = 0 and xi'(H') = 0 for the effective
pair (eta' = g eta, H' = g H), the tables hold

  W(p, lambda)   line integral of sigma_lambda* eta' from the base point p0
  phi(p, lambda) dW/dlambda - eta'(dSigma/dlambda)
  h(lambda)      H'(Sigma(p0, lambda))

and trajectories follow from phi(gamma(t)) = phi(gamma(0)) + t dh and
W(gamma(t)) = W(gamma(0)) + t h, solved for gamma(t) by Gauss-Newton.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Literal, Sequence

import numpy as np

from contact_hj.errors import ConvergenceError, ImmersionError, PreconditionError
from contact_hj.expr import ScalarField, jacobian, jvp, primal, reciprocal
from contact_hj.geometry import ContactSystem, lxhg_residual, xi_of_H
from contact_hj.hje.conditions import pseudo_isotropy_residual
from contact_hj.hje.duality import first_integrals_from_solution
from contact_hj.hje.solution import CompleteSolution
from contact_hj.numerics import gauss_newton, integrate, matrix_rank
from contact_hj.refint import Trajectory

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 12
DEFAULT_SEED = 42
PATH_CHECKS = 3
FALLBACK_SUBSTEPS = 8

GMode = Literal["none", "explicit", "reciprocal"]
G_MODES: tuple[str, ...] = ("none", "explicit", "reciprocal")

Samples = Sequence[tuple[Sequence[float], Sequence[float]]]


@dataclass(frozen=True)
class ReconstructionTables:
    solution: CompleteSolution
    system: ContactSystem
    base_origin: np.ndarray
    tol: float = 1e-10
    stages: frozenset[str] = frozenset()
    check: dict[str, float] = field(default_factory=dict)

    def _require(self, stage: str) -> None:
        if stage not in self.stages:
            raise ValueError(f"reconstruction tables have no {stage!r} stage yet")

    @property
    def base_dim(self) -> int:
        return self.solution.base_dim

    # --- W ------------------------------------------------------------------

    def _integrand(self, start: Sequence[Any], end: Sequence[Any], lam: Sequence[Any], s: Any) -> Any:
        direction = [b - a for a, b in zip(start, end)]
        base = [a + s * d for a, d in zip(start, direction)]
        values, tangents = jvp(lambda b: self.solution.point(b, lam), base, direction)
        return sum(c * t for c, t in zip(self.system.form(values), tangents))

    def line_integral(self, start: Sequence[Any], end: Sequence[Any], lam: Sequence[Any]) -> Any:
        """Integral of sigma_lambda* eta' along the straight segment start -> end."""
        return integrate(lambda s: self._integrand(start, end, lam, s), 0.0, 1.0, tol=self.tol)

    def W(self, p: Sequence[Any], lam: Sequence[Any]) -> Any:
        """Generic in p and lambda: dual inputs give exact derivatives of the quadrature."""
        self._require("W")
        return self.line_integral([float(v) for v in self.base_origin], list(p), list(lam))

    def W_and_dlam(self, p: Sequence[float], lam: Sequence[float]) -> np.ndarray:
        """``[W, dW/dlambda_1, ...]`` from a single vector-valued quadrature."""
        self._require("W")
        p0 = [float(v) for v in self.base_origin]
        p = [float(v) for v in p]
        lam = [float(v) for v in lam]
        k = len(lam)

        def integrand(s: float) -> np.ndarray:
            out = np.empty(k + 1)
            for j in range(k):
                value, d = jvp(lambda l: self._integrand(p0, p, l, s), lam, [1.0 if i == j else 0.0 for i in range(k)])
                out[0] = primal(value)
                out[j + 1] = primal(d)
            return out

        result = integrate(integrand, 0.0, 1.0, tol=self.tol)
        return np.asarray(result, dtype=float)

    # --- phi, W and their base Jacobians ---------------------------------------

    def values(self, p: Sequence[float], lam: Sequence[float]) -> tuple[float, np.ndarray]:
        """W and phi at (p, lambda)."""
        self._require("phi")
        wd = self.W_and_dlam(p, lam)
        d = self.base_dim
        j = self.solution.jacobian(p, lam)
        a = self.system.form_at(self.solution.point_at(p, lam))
        return float(wd[0]), wd[1:] - j[:, d:].T @ a

    def phi(self, p: Sequence[float], lam: Sequence[float]) -> np.ndarray:
        return self.values(p, lam)[1]

    def jacobians(self, p: Sequence[float], lam: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """d phi/dp (k x d) and dW/dp (d,), from the pulled-back forms."""
        d = self.base_dim
        j = self.solution.jacobian(p, lam)
        m = self.solution.point_at(p, lam)
        omega = self.system.d_form(m)
        a = self.system.form_at(m)
        jp, jl = j[:, :d], j[:, d:]
        return jl.T @ omega @ jp, jp.T @ a

    # --- h -------------------------------------------------------------------

    def h(self, lam: Sequence[Any]) -> Any:
        self._require("h")
        p0 = [float(v) for v in self.base_origin]
        return self.system.H_eff(self.solution.point(p0, list(lam)))

    def dh(self, lam: Sequence[float]) -> np.ndarray:
        return np.array(jacobian(lambda l: self.h(l), [float(v) for v in lam])[0], dtype=float)


def _default_samples(solution: CompleteSolution, samples: Samples | None) -> list[tuple[np.ndarray, np.ndarray]]:
    if samples is None:
        return solution.samples(np.random.default_rng(DEFAULT_SEED), DEFAULT_SAMPLES)
    return [(np.asarray(p, dtype=float), np.asarray(lam, dtype=float)) for p, lam in samples]


def path_discrepancy(tables: ReconstructionTables, p: Sequence[float], lam: Sequence[float]) -> float:
    """Straight segment from p0 versus the two-leg path through (p[0], p0[1:])."""
    p0 = [float(v) for v in tables.base_origin]
    p = [float(v) for v in p]
    lam = [float(v) for v in lam]
    corner = [p[0], *p0[1:]]
    direct = primal(tables.line_integral(p0, p, lam))
    legs = primal(tables.line_integral(p0, corner, lam)) + primal(tables.line_integral(corner, p, lam))
    return abs(direct - legs)


def build_W(
    solution: CompleteSolution,
    system: ContactSystem,
    *,
    base_origin: Sequence[float] | None = None,
    tol: float = 1e-10,
    check_tol: float = 1e-8,
    samples: Samples | None = None,
) -> ReconstructionTables:
    """Tables with W available; verifies sigma_lambda* d eta' = 0 on the samples."""
    origin = solution.base_box.origin_or_center() if base_origin is None else np.asarray(base_origin, dtype=float)
    points = _default_samples(solution, samples)
    worst, where = 0.0, None
    for p, lam in points:
        r = pseudo_isotropy_residual(solution, lam, p, system)
        if r > worst:
            worst, where = r, {"p": p.tolist(), "lambda": lam.tolist()}
    if worst > check_tol:
        raise PreconditionError("pseudo-isotropy", worst, where)

    tables = ReconstructionTables(solution, system, origin, tol, frozenset({"W"}), {"pseudo_isotropy": worst})
    if solution.base_dim > 1:
        gap = max(path_discrepancy(tables, p, lam) for p, lam in points[:PATH_CHECKS])
        if gap > max(check_tol, 100.0 * tol):
            raise PreconditionError("path independence of W", gap, message=f"W depends on the integration path (gap {gap:.3e}); is the base box simply connected?")
        tables.check["path_discrepancy"] = gap
    logger.debug("W built from base point %s (pseudo-isotropy %.3e)", origin.tolist(), worst)
    return tables


def build_phi(tables: ReconstructionTables) -> ReconstructionTables:
    tables._require("W")
    return replace(tables, stages=tables.stages | {"phi"})


def build_h(tables: ReconstructionTables, *, check_tol: float = 1e-8, samples: Samples | None = None) -> ReconstructionTables:
    """Adds h; checks xi'(H') = 0 and that H' o sigma_lambda is constant on the samples."""
    tables._require("W")
    tables = replace(tables, stages=tables.stages | {"h"}, check=dict(tables.check))
    solution, system = tables.solution, tables.system
    worst_xi, worst_const = 0.0, 0.0
    for p, lam in _default_samples(solution, samples):
        m = solution.point_at(p, lam)
        xi = abs(xi_of_H(system, m))
        if xi > worst_xi:
            worst_xi = xi
            if xi > check_tol:
                raise PreconditionError("xi'(H') = 0", xi, {"p": p.tolist(), "lambda": lam.tolist()})
        gap = abs(primal(system.H_eff(m)) - primal(tables.h(lam)))
        if gap > check_tol:
            raise PreconditionError("constancy of H' on sections", gap, {"p": p.tolist(), "lambda": lam.tolist()})
        worst_const = max(worst_const, gap)
    tables.check.update({"xi_of_H": worst_xi, "h_constancy": worst_const})
    return tables


def build_tables(
    solution: CompleteSolution,
    system: ContactSystem,
    *,
    base_origin: Sequence[float] | None = None,
    tol: float = 1e-10,
    check_tol: float = 1e-8,
    samples: Samples | None = None,
) -> ReconstructionTables:
    tables = build_W(solution, system, base_origin=base_origin, tol=tol, check_tol=check_tol, samples=samples)
    return build_h(build_phi(tables), check_tol=check_tol, samples=samples)


def immersion_rank(tables: ReconstructionTables, lam: Sequence[float], p: Sequence[float]) -> int:
    jphi, grad_w = tables.jacobians(p, lam)
    return matrix_rank(np.vstack([jphi, grad_w.reshape(1, -1)]))


def antimorphism_residual(tables: ReconstructionTables, p: Sequence[float], lam: Sequence[float], v: Sequence[float]) -> float:
    """``|((phi, W)* eta_Lambda + Sigma* eta')(v)|`` with eta_Lambda = phi dlambda - dw.

    ``v`` is a tangent vector of N x Lambda, base components first.
    """
    d = tables.base_dim
    p = [float(x) for x in p]
    lam = [float(x) for x in lam]
    v = np.asarray(v, dtype=float)
    _, dw = jvp(lambda x: tables.W(x[:d], x[d:]), [*p, *lam], list(v))
    _, phi = tables.values(p, lam)
    j = tables.solution.jacobian(p, lam)
    a = tables.system.form_at(tables.solution.point_at(p, lam))
    return abs(float(phi @ v[d:]) - primal(dw) + float(a @ (j @ v)))


def _solve_step(
    tables: ReconstructionTables,
    lam: Sequence[float],
    guess: np.ndarray,
    phi0: np.ndarray,
    w0: float,
    h: float,
    dh: np.ndarray,
    t: float,
    tol: float,
):
    def residual(p: np.ndarray) -> np.ndarray:
        w, phi = tables.values(p, lam)
        return np.concatenate([phi - phi0 - t * dh, [w - w0 - t * h]])

    def jac(p: np.ndarray) -> np.ndarray:
        jphi, grad_w = tables.jacobians(p, lam)
        return np.vstack([jphi, grad_w.reshape(1, -1)])

    return gauss_newton(residual, jac, guess, tol=tol)


def reconstruct_trajectory(
    tables: ReconstructionTables,
    lam: Sequence[float],
    start: Sequence[float],
    times: Sequence[float],
    *,
    tol: float = 1e-9,
) -> Trajectory:
    """Phase-space trajectory Sigma(gamma(t), lambda) through the base point ``start``."""
    tables._require("phi")
    tables._require("h")
    lam = [float(v) for v in lam]
    times = np.asarray(times, dtype=float)
    p = np.asarray(start, dtype=float)

    rank = immersion_rank(tables, lam, p)
    if rank < tables.base_dim:
        raise ImmersionError("immersion of (phi, W)", float(rank), {"p": p.tolist(), "lambda": lam}, f"(phi, W) has rank {rank} < {tables.base_dim} at the start point")

    w0, phi0 = tables.values(p, lam)
    h = primal(tables.h(lam))
    dh = tables.dh(lam)
    t0 = float(times[0])
    base_path = [p.copy()]
    residuals = [0.0]
    for t_prev, t in zip(times[:-1], times[1:]):
        t = float(t)
        try:
            result = _solve_step(tables, lam, p, phi0, w0, h, dh, t - t0, tol)
        except ConvergenceError:
            logger.debug("Gauss-Newton failed at t=%.6g; retrying with %d substeps", t, FALLBACK_SUBSTEPS)
            q = p
            try:
                for sub in np.linspace(float(t_prev), t, FALLBACK_SUBSTEPS + 1)[1:]:
                    result = _solve_step(tables, lam, q, phi0, w0, h, dh, float(sub) - t0, tol)
                    q = result.x
            except ConvergenceError as exc:
                raise ConvergenceError("reconstruction did not converge", residual=exc.residual, iterations=exc.iterations, time=t) from exc
        p = result.x
        base_path.append(p.copy())
        residuals.append(result.residual)

    points = np.array([tables.solution.point_at(b, lam) for b in base_path])
    metadata = {
        "lambda": lam,
        "h": h,
        "dh": dh.tolist(),
        "base": [b.tolist() for b in base_path],
        "residuals": residuals,
        "max_residual": max(residuals),
    }
    return Trajectory(times, points, "quadrature", metadata)


def reconstruct_from_point(tables: ReconstructionTables, point: Sequence[float], times: Sequence[float], *, tol: float = 1e-9) -> Trajectory:
    """Same as reconstruct_trajectory, with lambda and the base point read off a phase point."""
    lam = first_integrals_from_solution(tables.solution, point)
    start = tables.solution.fibration.project([float(v) for v in point])
    return reconstruct_trajectory(tables, lam, start, times, tol=tol)


def trajectory_invariants(tables: ReconstructionTables, trajectory: Trajectory) -> dict[str, float]:
    """Finite-difference rate of W against h, and the drift of phi - t dh."""
    lam = trajectory.metadata["lambda"]
    base = trajectory.metadata["base"]
    h = trajectory.metadata["h"]
    dh = np.asarray(trajectory.metadata["dh"])
    values = [tables.values(b, lam) for b in base]
    w = np.array([v[0] for v in values])
    phi = np.array([v[1] for v in values])
    t = trajectory.times - trajectory.times[0]
    rate = np.gradient(w, trajectory.times) if len(trajectory) > 1 else np.array([h])
    drift = phi - phi[0] - np.outer(t, dh)
    return {"w_rate": float(np.max(np.abs(rate - h))), "phi_drift": float(np.max(np.abs(drift)))}


def effective_system(
    system: ContactSystem,
    mode: GMode,
    *,
    g: ScalarField | None = None,
) -> ContactSystem:
    plain = system.plain
    if mode == "none":
        return plain
    if mode == "explicit":
        if g is None:
            raise ValueError("explicit g mode needs a conformal factor")
        return plain.with_conformal(g)
    if mode == "reciprocal":
        return plain.with_conformal(reciprocal(plain.hamiltonian))
    raise ValueError(f"Unknown g mode: {mode}. Available: {list(G_MODES)}")


def reconstruct_rescaled(
    system: ContactSystem,
    solution: CompleteSolution,
    mode: GMode,
    lam: Sequence[float],
    start: Sequence[float],
    times: Sequence[float],
    *,
    g: ScalarField | None = None,
    tol: float = 1e-10,
    solver_tol: float = 1e-9,
    check_tol: float = 1e-8,
    samples: Samples | None = None,
    base_origin: Sequence[float] | None = None,
) -> Trajectory:
    """Runs the pipeline against (g eta, g H); the output is also a trajectory of X_H."""
    lam = [float(v) for v in lam]
    if samples is None:
        rng = np.random.default_rng(DEFAULT_SEED)
        samples = [(p, lam) for p in solution.base_box.sample(rng, DEFAULT_SAMPLES)]
    samples = [(np.asarray(p, dtype=float), np.asarray(l, dtype=float)) for p, l in samples]

    plain = system.plain
    if mode == "explicit":
        if g is None:
            raise ValueError("explicit g mode needs a conformal factor")
        worst = max(abs(lxhg_residual(plain, g, solution.point_at(p, l))) for p, l in samples)
        if worst > check_tol:
            raise PreconditionError("X_H(g) + g xi(H) = 0", worst)
    elif mode == "reciprocal":
        smallest, where = float("inf"), None
        for p, l in samples:
            value = abs(primal(plain.H(solution.point_at(p, l).tolist())))
            if value < smallest:
                smallest, where = value, {"p": p.tolist(), "lambda": l.tolist()}
        if smallest <= check_tol:
            raise PreconditionError("H non-vanishing", smallest, where, f"H vanishes ({smallest:.3e}) on the sampled region")

    effective = effective_system(system, mode, g=g)
    tables = build_tables(solution, effective, base_origin=base_origin, tol=tol, check_tol=check_tol, samples=samples)
    trajectory = reconstruct_trajectory(tables, lam, start, times, tol=solver_tol)
    trajectory.metadata["g_mode"] = mode
    trajectory.metadata.update(tables.check)
    return trajectory
