"""Contact structure induced on a hypersurface by a Liouville field.

On (R^{2n+2}, omega = dq^i ^ dp_i) a field Delta with L_Delta omega = omega
makes eta = i_Delta omega a contact form on any hypersurface S = {H = c}
transverse to Delta. With X_H given by i_X omega = dH, the Reeb field of
eta on S is -X_H / Delta(H). On the unit sphere with the radial field this
is the Hopf flow, which equals X_H under the opposite sign convention.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from contact_hj.errors import ConfigError, PreconditionError
from contact_hj.expr import Expr, derivative, jacobian, parse, primal
from contact_hj.geometry import reeb_from_form
from contact_hj.numerics import newton_scalar
from contact_hj.numerics.linalg import curl, null_space, solve_pivoted

from . import FamilyModel, number, register_system, strings

logger = logging.getLogger(__name__)

CHECK_TOL = 1e-9


def phase_names(n: int) -> tuple[str, ...]:
    """q1..q_{n+1}, p1..p_{n+1} for the ambient space of a (2n+1)-dimensional S."""
    m = n + 1
    return (*(f"q{i}" for i in range(1, m + 1)), *(f"p{i}" for i in range(1, m + 1)))


def canonical_symplectic(dim: int) -> np.ndarray:
    """Matrix W with omega(u, v) = u^T W v for omega = dq^i ^ dp_i."""
    half = dim // 2
    w = np.zeros((dim, dim))
    for i in range(half):
        w[i, half + i] = 1.0
        w[half + i, i] = -1.0
    return w


@dataclass(frozen=True)
class LiouvilleCheckSpec:
    n: int
    hamiltonian: str = ""
    delta: tuple[str, ...] = ()
    level: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        names = phase_names(self.n)
        if not self.hamiltonian:
            object.__setattr__(self, "hamiltonian", " + ".join(f"{v}^2" for v in names))
        if not self.delta:
            object.__setattr__(self, "delta", tuple(f"{v}/2" for v in names))
        if len(self.delta) != len(names):
            raise ValueError(f"Delta needs {len(names)} components, got {len(self.delta)}")
        for text in (self.hamiltonian, *self.delta):
            parse(text, names)

    @property
    def names(self) -> tuple[str, ...]:
        return phase_names(self.n)

    @property
    def dim(self) -> int:
        return 2 * self.n + 2

    @cached_property
    def H(self) -> Expr:
        return parse(self.hamiltonian, self.names)

    @cached_property
    def delta_exprs(self) -> list[Expr]:
        return [parse(t, self.names) for t in self.delta]

    @cached_property
    def omega(self) -> np.ndarray:
        return canonical_symplectic(self.dim)

    def binding(self, point: Sequence[Any]) -> dict[str, Any]:
        return dict(zip(self.names, point))

    def grad_H(self, point: Sequence[float]) -> np.ndarray:
        return np.array(jacobian(lambda m: self.H.evaluate(self.binding(m)), [float(v) for v in point])[0], dtype=float)

    def delta_at(self, point: Sequence[float]) -> np.ndarray:
        binding = self.binding([float(v) for v in point])
        return np.array([primal(e.evaluate(binding)) for e in self.delta_exprs])

    def eta(self, point: Sequence[Any]) -> list[Any]:
        """Coefficients of i_Delta omega; generic in the point."""
        binding = self.binding(point)
        delta = [e.evaluate(binding) for e in self.delta_exprs]
        return [sum(float(self.omega[i, j]) * delta[i] for i in range(self.dim)) for j in range(self.dim)]


def hamiltonian_field(spec: LiouvilleCheckSpec, point: Sequence[float]) -> np.ndarray:
    """X with i_X omega = dH."""
    return solve_pivoted(spec.omega.T, spec.grad_H(point))


def liouville_residual(spec: LiouvilleCheckSpec, point: Sequence[float]) -> float:
    """max |d(i_Delta omega) - omega|, i.e. of L_Delta omega - omega."""
    d_eta = curl(np.array(jacobian(spec.eta, [float(v) for v in point]), dtype=float))
    return float(np.max(np.abs(d_eta - spec.omega)))


def sample_level_set(spec: LiouvilleCheckSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Random directions pushed radially onto H = level by scalar Newton."""
    points = []
    for _ in range(count):
        u = rng.normal(size=spec.dim)
        u /= np.linalg.norm(u)

        def f(r: float, u: np.ndarray = u) -> float:
            return primal(spec.H.evaluate(spec.binding((r * u).tolist()))) - spec.level

        def df(r: float, u: np.ndarray = u) -> float:
            return primal(derivative(lambda s: spec.H.evaluate(spec.binding([s * c for c in u.tolist()])), r))

        r = newton_scalar(f, df, 1.0)
        points.append(r * u)
    return np.array(points)


@dataclass
class LiouvilleReport:
    samples: int
    max_rhx: float = 0.0
    max_liouville: float = 0.0
    max_reeb_identity: float = 0.0
    reeb_alignment: float | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def residuals(self) -> dict[str, float]:
        out = {"max_rhx": self.max_rhx, "max_liouville": self.max_liouville, "max_reeb_identity": self.max_reeb_identity}
        if self.reeb_alignment is not None:
            out["reeb_alignment"] = self.reeb_alignment
        return out


def restricted_reeb(spec: LiouvilleCheckSpec, point: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Reeb field of i_Delta omega on S through ``point``, and a basis of T S."""
    point = [float(v) for v in point]
    basis = null_space(spec.grad_H(point).reshape(1, -1))
    a = np.array([primal(c) for c in spec.eta(point)])
    omega = curl(np.array(jacobian(spec.eta, point), dtype=float))
    xi = reeb_from_form(basis.T @ omega @ basis, basis.T @ a)
    return basis @ xi, basis


def liouville_restriction_check(spec: LiouvilleCheckSpec, points: Sequence[Sequence[float]], *, tol: float = CHECK_TOL) -> LiouvilleReport:
    """Checks xi = -X_H / Delta(H) on S at each point.

    On the unit level of H = |m|^2 with the radial Delta, Delta(H) = 1 and the
    Reeb field is additionally compared with the opposite-convention X_H.
    """
    report = LiouvilleReport(samples=len(points))
    unit = True
    alignment = 0.0
    for point in points:
        point = [float(v) for v in point]
        grad = spec.grad_H(point)
        delta_h = float(grad @ spec.delta_at(point))
        if abs(delta_h) <= tol:
            raise PreconditionError("Delta(H) != 0 on S", abs(delta_h), point)
        x_h = hamiltonian_field(spec, point)
        xi, basis = restricted_reeb(spec, point)
        a = np.array([primal(c) for c in spec.eta(point)])
        omega = curl(np.array(jacobian(spec.eta, point), dtype=float))
        report.max_rhx = max(report.max_rhx, float(np.max(np.abs(xi + x_h / delta_h))))
        report.max_liouville = max(report.max_liouville, liouville_residual(spec, point))
        identity = max(float(np.max(np.abs(basis.T @ omega.T @ xi))), abs(float(a @ xi) - 1.0))
        report.max_reeb_identity = max(report.max_reeb_identity, identity)
        if abs(delta_h - 1.0) <= tol:
            alignment = max(alignment, float(np.max(np.abs(xi - (-x_h)))))
        else:
            unit = False
    if unit and len(points) > 0:
        report.reeb_alignment = alignment
    for name, value in report.residuals().items():
        if value > tol:
            report.failures.append(f"{name}={value:.3e} exceeds {tol:.1e}")
    logger.debug("Liouville check on %d points: %s", len(points), report.residuals())
    return report


@register_system
class LiouvilleSphereFamily:
    @property
    def name(self) -> str:
        return "liouville_sphere"

    def build(self, system: Mapping[str, Any], solution: Mapping[str, Any]) -> FamilyModel:
        n = int(number(system, "n", "system", 1))
        delta = strings(system, "delta", "system", 2 * n + 2) if "delta" in system else []
        try:
            spec = LiouvilleCheckSpec(n, str(system.get("H", "")), tuple(delta), number(system, "level", "system", 1.0))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("system", str(exc)) from exc
        if spec.level <= 0.0:
            raise ConfigError("system.level", "must be positive")
        return FamilyModel(name=self.name, system=None, liouville=spec)

    def demo(self) -> dict[str, Any]:
        return {
            "system": {"family": "liouville_sphere", "n": 1, "level": 1.0},
            "grid": {"samples": 100},
            "tasks": {"run": ["verify"]},
        }
