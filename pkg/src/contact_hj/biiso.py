"""Bi-isotropic complete solutions: integration on the zero level set of H.

Where xi(H) does not vanish, M0 = H^-1(0) is parametrized by (x, y) through
z = zeta(x, y). A complete solution restricted to M0 over a declared
parameter slice gives phi_hat, whose components evolve proportionally along
the flow; one scalar quadrature then recovers the trajectories. Points off
M0 are handled by the rescaled (reciprocal H) or plain pipelines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Mapping, Sequence

import numpy as np
import scipy.linalg

from contact_hj.errors import (
    ClassificationAmbiguityError,
    ConvergenceError,
    ImmersionError,
    MembershipError,
    PreconditionError,
    QuadratureInversionError,
    RegionError,
)
from contact_hj.expr import Dual, ScalarField, derivative, div, jacobian, jvp, primal
from contact_hj.geometry import ContactSystem, xi_of_H
from contact_hj.hje.duality import first_integrals_from_solution
from contact_hj.hje.fibration import Box
from contact_hj.hje.solution import CompleteSolution
from contact_hj.numerics import integrate, matrix_rank, newton_scalar, newton_system
from contact_hj.reconstruct import reconstruct_rescaled
from contact_hj.refint import Trajectory

logger = logging.getLogger(__name__)

Region = Literal["M0", "M1", "M2"]

ZETA_CORRECTIONS = 2
AMBIGUITY_FACTOR = 1e3
_SEED = 42
_CHECK_POINTS = 16


# --- M0 as a graph over (x, y) ----------------------------------------------


class LevelSetChart:
    """M0 = {H = 0} as the graph z = zeta(x, y) over ``box``."""

    def __init__(self, system: ContactSystem, box: Box, *, z_guess: float = 0.0, tol: float = 1e-13) -> None:
        if box.dim != 2 * system.chart.n:
            raise ValueError(f"level chart box must have dimension {2 * system.chart.n}, got {box.dim}")
        self.system = system.plain
        self.box = box
        self.z_guess = z_guess
        self.tol = tol
        self._cache: dict[tuple[float, ...], float] = {}

    @property
    def dim(self) -> int:
        return self.box.dim

    def _H(self, xy: Sequence[Any], z: Any) -> Any:
        return self.system.H([*xy, z])

    def _dHdz(self, xy: Sequence[Any], z: Any) -> Any:
        return derivative(lambda w: self._H(xy, w), z)

    def _zeta_float(self, xy: tuple[float, ...]) -> float:
        cached = self._cache.get(xy)
        if cached is not None:
            return cached
        z = newton_scalar(
            lambda w: primal(self._H(xy, w)),
            lambda w: primal(self._dHdz(xy, w)),
            self.z_guess,
            tol=self.tol,
        )
        self._cache[xy] = z
        return z

    def zeta(self, xy: Sequence[Any]) -> Any:
        """z with H(x, y, z) = 0; exact derivatives for dual inputs."""
        xy = list(xy)
        z: Any = self._zeta_float(tuple(primal(v) for v in xy))
        if not any(isinstance(v, Dual) for v in xy):
            return z
        for _ in range(ZETA_CORRECTIONS):
            z = z - div(self._H(xy, z), self._dHdz(xy, z))
        return z

    def point(self, xy: Sequence[Any]) -> list[Any]:
        return [*xy, self.zeta(xy)]

    def point_at(self, xy: Sequence[float]) -> np.ndarray:
        return np.array([primal(v) for v in self.point([float(v) for v in xy])], dtype=float)

    def embedding_jacobian(self, xy: Sequence[float]) -> np.ndarray:
        return np.array(jacobian(self.point, [float(v) for v in xy]), dtype=float)

    def symplectic_rank(self, xy: Sequence[float]) -> int:
        """Rank of d eta pulled back to M0; 2n where M0 is symplectic."""
        j = self.embedding_jacobian(xy)
        return matrix_rank(j.T @ self.system.chart.darboux_omega() @ j)


def build_level_chart(system: ContactSystem, box: Box, *, z_guess: float = 0.0, per_axis: int = 4, tol: float = 1e-9) -> LevelSetChart:
    """Checks that dH/dz keeps one sign, bounded away from zero, on a grid of ``box``."""
    chart = LevelSetChart(system, box, z_guess=z_guess)
    slopes = []
    for xy in box.grid(per_axis):
        xy = [float(v) for v in xy]
        slopes.append((primal(chart._dHdz(xy, chart._zeta_float(tuple(xy)))), xy))
    smallest = min(abs(s) for s, _ in slopes)
    if smallest <= tol:
        where = min(slopes, key=lambda item: abs(item[0]))[1]
        raise PreconditionError("xi(H) != 0 on M0", smallest, where, f"dH/dz vanishes ({smallest:.3e}) on the level chart box")
    if len({s > 0 for s, _ in slopes}) > 1:
        raise PreconditionError("xi(H) != 0 on M0", smallest, message="dH/dz changes sign on the level chart box")
    return chart


# --- restrictions --------------------------------------------------------------


@dataclass(frozen=True)
class ParameterRestriction:
    """Lambda-hat: the parameter slice obtained by freezing some axes."""

    param_dim: int
    fixed: tuple[tuple[int, float], ...]
    box: Box

    def __post_init__(self) -> None:
        axes = [i for i, _ in self.fixed]
        if len(set(axes)) != len(axes) or any(not 0 <= i < self.param_dim for i in axes):
            raise ValueError(f"invalid fixed axes {axes} for {self.param_dim} parameters")
        if self.box.dim != self.param_dim - len(axes):
            raise ValueError("restriction box does not match the free axes")

    @classmethod
    def axis_slice(cls, param_box: Box, fixed: Mapping[int, float]) -> ParameterRestriction:
        free = [i for i in range(param_box.dim) if i not in fixed]
        box = Box(tuple(param_box.lows[i] for i in free), tuple(param_box.highs[i] for i in free))
        return cls(param_box.dim, tuple(sorted((int(i), float(v)) for i, v in fixed.items())), box)

    @property
    def free_axes(self) -> tuple[int, ...]:
        frozen = {i for i, _ in self.fixed}
        return tuple(i for i in range(self.param_dim) if i not in frozen)

    @property
    def dim(self) -> int:
        return len(self.free_axes)

    def embed(self, lam_hat: Sequence[Any]) -> list[Any]:
        out: list[Any] = [0.0] * self.param_dim
        for i, v in self.fixed:
            out[i] = v
        for i, v in zip(self.free_axes, lam_hat):
            out[i] = v
        return out

    def contains(self, lam: Sequence[float], tol: float = 1e-9) -> bool:
        return all(abs(float(lam[i]) - v) <= tol for i, v in self.fixed)

    def locate(self, lam: Sequence[float], tol: float = 1e-9) -> np.ndarray:
        if not self.contains(lam, tol):
            worst = max(abs(float(lam[i]) - v) for i, v in self.fixed)
            raise MembershipError("lambda in the restricted slice", worst, list(map(float, lam)))
        return np.array([float(lam[i]) for i in self.free_axes])


@dataclass
class RestrictedSolution:
    parent: CompleteSolution
    chart: LevelSetChart
    restriction: ParameterRestriction
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def system(self) -> ContactSystem:
        return self.chart.system

    @property
    def base_dim(self) -> int:
        return self.parent.base_dim

    def point(self, p: Sequence[Any], lam_hat: Sequence[Any]) -> list[Any]:
        return self.parent.point(list(p), self.restriction.embed(lam_hat))

    def point_at(self, p: Sequence[float], lam_hat: Sequence[float]) -> np.ndarray:
        return np.array([primal(v) for v in self.point(p, lam_hat)], dtype=float)

    def samples(self, rng: np.random.Generator, count: int) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.parent.base_box.sample(rng, count), self.restriction.box.sample(rng, count)))


def restrict_solution(
    solution: CompleteSolution,
    chart: LevelSetChart,
    restriction: ParameterRestriction,
    *,
    membership_tol: float = 1e-10,
    check_tol: float = 1e-8,
    samples: int = _CHECK_POINTS,
) -> RestrictedSolution:
    """Verifies Sigma(N x Lambda-hat) lies in M0 and that its sections are isotropic."""
    restricted = RestrictedSolution(solution, chart, restriction)
    rng = np.random.default_rng(_SEED)
    omega = solution.chart.darboux_omega()
    worst_h, worst_iso, worst_sym, where = 0.0, 0.0, 0.0, None
    for p, lam_hat in restricted.samples(rng, samples):
        m = restricted.point_at(p, lam_hat)
        value = abs(primal(chart.system.H(m.tolist())))
        if value > worst_h:
            worst_h, where = value, {"p": p.tolist(), "lambda_hat": lam_hat.tolist()}
        s = np.array(jacobian(lambda b: restricted.point(b, lam_hat), p.tolist()), dtype=float)
        worst_iso = max(worst_iso, float(np.max(np.abs(s.T @ chart.system.form_at(m)))))
        worst_sym = max(worst_sym, float(np.max(np.abs(s.T @ omega @ s))))
    if worst_h > membership_tol:
        raise MembershipError("H o Sigma = 0 on the restricted slice", worst_h, where)
    if worst_iso > check_tol:
        raise PreconditionError("isotropy of the restricted sections", worst_iso)
    restricted.residuals.update({"membership": worst_h, "isotropy": worst_iso, "symplectic_isotropy": worst_sym})
    return restricted


# --- phi_hat and the reduced equation ------------------------------------------


class PhiHat:
    """phi_hat(p, lambda_hat)_j = -(Sigma0* eta0)(0, e_j)."""

    def __init__(self, restricted: RestrictedSolution) -> None:
        self.restricted = restricted

    def __call__(self, p: Sequence[Any], lam_hat: Sequence[Any]) -> list[Any]:
        lam_hat = list(lam_hat)
        k = len(lam_hat)
        form = self.restricted.system.form
        out: list[Any] = []
        for j in range(k):
            values, tangents = jvp(lambda l: self.restricted.point(list(p), l), lam_hat, [1.0 if i == j else 0.0 for i in range(k)])
            out.append(-sum(c * t for c, t in zip(form(values), tangents)))
        return out

    def at(self, p: Sequence[float], lam_hat: Sequence[float]) -> np.ndarray:
        return np.array([primal(v) for v in self([float(v) for v in p], [float(v) for v in lam_hat])], dtype=float)

    def jacobian(self, p: Sequence[float], lam_hat: Sequence[float]) -> np.ndarray:
        lam_hat = [float(v) for v in lam_hat]
        return np.array(jacobian(lambda b: self(b, lam_hat), [float(v) for v in p]), dtype=float)


def build_phi_hat(restricted: RestrictedSolution, *, samples: int = _CHECK_POINTS) -> PhiHat:
    """phi_hat with its immersion property checked on sampled points."""
    phi_hat = PhiHat(restricted)
    rng = np.random.default_rng(_SEED)
    d = restricted.base_dim
    for p, lam_hat in restricted.samples(rng, samples):
        rank = matrix_rank(phi_hat.jacobian(p, lam_hat))
        if rank < d:
            raise ImmersionError("immersion of phi_hat", float(rank), {"p": p.tolist(), "lambda_hat": lam_hat.tolist()}, f"phi_hat has rank {rank} < {d}")
    return phi_hat


def varsigma(restricted: RestrictedSolution, p: Sequence[float], lam_hat: Sequence[float]) -> float:
    return xi_of_H(restricted.system, restricted.point_at(p, lam_hat))


def _chart_components(jac: np.ndarray, psi0: np.ndarray, d: int) -> list[int]:
    """Components of phi_hat forming a local chart, largest initial value first."""
    _, _, piv = scipy.linalg.qr(jac.T, pivoting=True)
    chosen = [int(i) for i in piv[:d]]
    return sorted(chosen, key=lambda i: -abs(psi0[i]))


def integrate_on_M0(
    restricted: RestrictedSolution,
    phi_hat: PhiHat,
    lam_hat: Sequence[float],
    start: Sequence[float],
    times: Sequence[float],
    *,
    tol: float = 1e-10,
    solver_tol: float = 1e-12,
) -> Trajectory:
    """Trajectory on M0 from the proportional reduction and one quadrature.

    Along the flow the chart components psi of phi_hat satisfy
    psi_i(t) = c_i psi_1(t) and psi_1' = F(psi_1) with
    F(x) = varsigma(psi^-1(x, c_2 x, ...)) x, so t = int dx / F(x).
    """
    lam_hat = [float(v) for v in lam_hat]
    times = np.asarray(times, dtype=float)
    p0 = np.asarray(start, dtype=float)
    d = restricted.base_dim
    full0 = phi_hat.at(p0, lam_hat)
    chosen = _chart_components(phi_hat.jacobian(p0, lam_hat), full0, d)
    psi0 = full0[chosen]
    lead = float(psi0[0])

    if abs(lead) <= solver_tol:
        logger.debug("phi_hat vanishes at the start; returning the stationary solution")
        points = np.tile(restricted.point_at(p0, lam_hat), (times.size, 1))
        return Trajectory(times, points, "m0-quadrature", {"lambda_hat": lam_hat, "stationary": True})

    ratios = psi0 / lead
    warm = {"p": p0.copy()}

    def inverse(x: float) -> np.ndarray:
        target = ratios * x
        p = newton_system(
            lambda b: phi_hat.at(b, lam_hat)[chosen] - target,
            lambda b: phi_hat.jacobian(b, lam_hat)[chosen],
            warm["p"],
            tol=solver_tol,
        )
        warm["p"] = p
        return p

    def F(x: float) -> float:
        return varsigma(restricted, inverse(x), lam_hat) * x

    f0 = F(lead)
    if f0 == 0.0:
        raise QuadratureInversionError("varsigma vanishes at the start point")

    def reciprocal_rate(x: float) -> float:
        fx = F(x)
        if fx == 0.0 or (fx > 0.0) != (f0 > 0.0):
            raise QuadratureInversionError(f"F changes sign at psi_1={x:.6g}; cannot invert t(psi_1)")
        return 1.0 / fx

    x, elapsed = lead, 0.0
    values = [lead]
    base = [p0.copy()]
    for t_prev, t in zip(times[:-1], times[1:]):
        dt = float(t - t_prev)
        anchor_x, anchor_t = x, elapsed

        def clock(y: float) -> float:
            return anchor_t + integrate(reciprocal_rate, anchor_x, y, tol=tol) - (float(t) - float(times[0]))

        guess = anchor_x + F(anchor_x) * dt
        try:
            x = newton_scalar(clock, reciprocal_rate, guess, tol=max(tol, 1e-13))
        except ConvergenceError as exc:
            raise QuadratureInversionError(f"could not invert the quadrature at t={float(t):.6g}: {exc}") from exc
        elapsed = float(t) - float(times[0])
        values.append(x)
        base.append(inverse(x).copy())

    points = np.array([restricted.point_at(b, lam_hat) for b in base])
    full = np.array([phi_hat.at(b, lam_hat) for b in base])
    lead_index = chosen[0]
    proportionality = float(np.max(np.abs(full * full0[lead_index] - np.outer(full[:, lead_index], full0))))
    metadata: dict[str, Any] = {
        "lambda_hat": lam_hat,
        "chart_components": chosen,
        "psi_1": values,
        "base": [b.tolist() for b in base],
        "proportionality": proportionality,
    }
    rates = [varsigma(restricted, b, lam_hat) for b in base]
    if max(rates) - min(rates) <= 1e-12 * max(1.0, abs(rates[0])):
        law = lead * np.exp(rates[0] * (times - times[0]))
        metadata["varsigma"] = rates[0]
        metadata["exponential_law"] = float(np.max(np.abs(np.asarray(values) - law)) / abs(lead))
    return Trajectory(times, points, "m0-quadrature", metadata)


# --- region dispatch -----------------------------------------------------------------


def classify_region(
    system: ContactSystem,
    point: Sequence[float],
    *,
    tol: float = 1e-9,
    neighborhood: float = 1e-3,
    samples: int = _CHECK_POINTS,
) -> Region:
    """M2 on the interior of {xi(H) = 0}, else M0 on H = 0, else M1.

    Values in [tol, 1e3 tol) are ambiguous and raise rather than guess.
    """
    plain = system.plain
    point = [float(v) for v in point]
    band = AMBIGUITY_FACTOR * tol
    slope = abs(xi_of_H(plain, point))
    if tol <= slope < band:
        raise ClassificationAmbiguityError("xi(H) classification", slope, point, f"|xi(H)|={slope:.3e} lies in the ambiguity band [{tol:.1e}, {band:.1e})")
    if slope < tol:
        rng = np.random.default_rng(_SEED)
        offsets = neighborhood * (2.0 * rng.random((samples, len(point))) - 1.0)
        worst = max(abs(xi_of_H(plain, np.asarray(point) + o)) for o in offsets)
        if worst >= tol:
            raise RegionError(
                "interior of {xi(H) = 0}",
                worst,
                point,
                "start lies on the boundary of the region where xi(H) vanishes and must be studied separately",
            )
        return "M2"
    value = abs(primal(plain.H(point)))
    if tol <= value < band:
        raise ClassificationAmbiguityError("H classification", value, point, f"|H|={value:.3e} lies in the ambiguity band [{tol:.1e}, {band:.1e})")
    return "M0" if value < tol else "M1"


def split_and_integrate(
    system: ContactSystem,
    solution: CompleteSolution,
    start: Sequence[float],
    times: Sequence[float],
    *,
    restriction: ParameterRestriction | None = None,
    level_box: Box | None = None,
    z_guess: float = 0.0,
    g: ScalarField | None = None,
    tol: float = 1e-10,
    solver_tol: float = 1e-9,
    check_tol: float = 1e-8,
    classification_tol: float = 1e-9,
    neighborhood: float = 1e-3,
) -> Trajectory:
    start = np.asarray(start, dtype=float)
    region = classify_region(system, start, tol=classification_tol, neighborhood=neighborhood)
    lam = first_integrals_from_solution(solution, start)
    base = solution.fibration.project(start.tolist())
    logger.debug("start %s classified as %s (lambda=%s)", start.tolist(), region, lam.tolist())

    if region == "M0":
        if restriction is None or level_box is None:
            raise PreconditionError("restriction to M0", float("nan"), message="integration on M0 needs a declared parameter restriction and level box")
        chart = build_level_chart(system, level_box, z_guess=z_guess, tol=classification_tol)
        restricted = restrict_solution(solution, chart, restriction, check_tol=check_tol)
        phi_hat = build_phi_hat(restricted)
        trajectory = integrate_on_M0(restricted, phi_hat, restriction.locate(lam), base, times, tol=tol)
        trajectory.metadata.update(restricted.residuals)
    elif region == "M1":
        trajectory = reconstruct_rescaled(system, solution, "reciprocal", lam, base, times, tol=tol, solver_tol=solver_tol, check_tol=check_tol)
    else:
        mode = "explicit" if g is not None else "none"
        trajectory = reconstruct_rescaled(system, solution, mode, lam, base, times, g=g, tol=tol, solver_tol=solver_tol, check_tol=check_tol)
    trajectory.metadata["region"] = region
    return trajectory

