"""Contact geometry in one Darboux chart.

Coordinates are ordered ``(x1..xn, y1..yn, z)`` and the Darboux form is
``eta = y_i dx^i + dz``. A 1-form ``A_a dm^a`` has exterior derivative
matrix ``Omega[i, j] = d_i A_j - d_j A_i``, so ``d alpha(u, v) = u^T Omega v``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Sequence

import numpy as np

from contact_hj.errors import DomainError
from contact_hj.expr import ScalarField, jacobian, parse, primal, product
from contact_hj.numerics.linalg import bordered, curl, pfaffian, solve_pivoted

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DarbouxChart:
    n: int
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Darboux chart needs n >= 1, got {self.n}")
        if not self.names:
            default = (
                *(f"x{i}" for i in range(1, self.n + 1)),
                *(f"y{i}" for i in range(1, self.n + 1)),
                "z",
            )
            object.__setattr__(self, "names", default)
        if len(self.names) != self.dim:
            raise ValueError(f"expected {self.dim} coordinate names, got {len(self.names)}")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def x_indices(self) -> tuple[int, ...]:
        return tuple(range(self.n))

    @property
    def y_indices(self) -> tuple[int, ...]:
        return tuple(range(self.n, 2 * self.n))

    @property
    def z_index(self) -> int:
        return 2 * self.n

    @property
    def canonical_names(self) -> tuple[str, ...]:
        return DarbouxChart(self.n).names

    def binding(self, point: Sequence[Any]) -> dict[str, Any]:
        return dict(zip(self.names, point))

    def darboux_coefficients(self, point: Sequence[Any]) -> list[Any]:
        return [*point[self.n : 2 * self.n], *([0.0] * self.n), 1.0]

    def darboux_omega(self) -> np.ndarray:
        omega = np.zeros((self.dim, self.dim))
        for i in range(self.n):
            omega[self.n + i, i] = 1.0
            omega[i, self.n + i] = -1.0
        return omega


class OneForm:
    """A 1-form on the chart given by a coefficient callable."""

    def __init__(self, chart: DarbouxChart, coefficients: Callable[[Sequence[Any]], list[Any]], label: str = "") -> None:
        self.chart = chart
        self._coefficients = coefficients
        self.label = label

    @classmethod
    def darboux(cls, chart: DarbouxChart) -> OneForm:
        return cls(chart, chart.darboux_coefficients, "eta")

    @classmethod
    def conformal(cls, chart: DarbouxChart, g: ScalarField) -> OneForm:
        def coefficients(point: Sequence[Any]) -> list[Any]:
            factor = g.evaluate(chart.binding(point))
            return [factor * c for c in chart.darboux_coefficients(point)]

        return cls(chart, coefficients, f"({g})*eta")

    @classmethod
    def from_expressions(cls, chart: DarbouxChart, texts: Sequence[str]) -> OneForm:
        if len(texts) != chart.dim:
            raise ValueError(f"need {chart.dim} coefficients, got {len(texts)}")
        exprs = [parse(t, chart.names) for t in texts]

        def coefficients(point: Sequence[Any]) -> list[Any]:
            binding = chart.binding(point)
            return [e.evaluate(binding) for e in exprs]

        return cls(chart, coefficients, " + ".join(f"({t})d{n}" for t, n in zip(texts, chart.names)))

    @classmethod
    def zero(cls, chart: DarbouxChart) -> OneForm:
        return cls(chart, lambda point: [0.0] * chart.dim, "0")

    def __call__(self, point: Sequence[Any]) -> list[Any]:
        return self._coefficients(list(point))

    def at(self, point: Sequence[float]) -> np.ndarray:
        return np.array([primal(c) for c in self(point)], dtype=float)

    def d(self, point: Sequence[float]) -> np.ndarray:
        return curl(np.array(jacobian(self._coefficients, list(point)), dtype=float))


@dataclass(frozen=True)
class ContactSystem:
    """Darboux chart, Hamiltonian and optional conformal factor g (eta' = g eta)."""

    chart: DarbouxChart
    hamiltonian: ScalarField
    conformal: ScalarField | None = None
    label: str = ""

    @classmethod
    def from_strings(cls, n: int, hamiltonian: str, conformal: str | None = None, names: Sequence[str] = ()) -> ContactSystem:
        chart = DarbouxChart(n, tuple(names))
        g = parse(conformal, chart.names) if conformal else None
        return cls(chart, parse(hamiltonian, chart.names), g, label=hamiltonian)

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def plain(self) -> ContactSystem:
        return self if self.conformal is None else replace(self, conformal=None)

    def with_conformal(self, g: ScalarField | None) -> ContactSystem:
        return replace(self, conformal=g)

    def H(self, point: Sequence[Any]) -> Any:
        return self.hamiltonian.evaluate(self.chart.binding(point))

    def g(self, point: Sequence[Any]) -> Any:
        if self.conformal is None:
            return 1.0
        return self.conformal.evaluate(self.chart.binding(point))

    def effective_hamiltonian(self) -> ScalarField:
        if self.conformal is None:
            return self.hamiltonian
        return product(self.conformal, self.hamiltonian)

    def H_eff(self, point: Sequence[Any]) -> Any:
        return self.g(point) * self.H(point) if self.conformal is not None else self.H(point)

    def form(self, point: Sequence[Any]) -> list[Any]:
        base = self.chart.darboux_coefficients(point)
        if self.conformal is None:
            return base
        factor = self.g(point)
        return [factor * c for c in base]

    def form_at(self, point: Sequence[float]) -> np.ndarray:
        return np.array([primal(c) for c in self.form(point)], dtype=float)

    def d_form(self, point: Sequence[float]) -> np.ndarray:
        if self.conformal is None:
            return self.chart.darboux_omega()
        return curl(np.array(jacobian(self.form, list(point)), dtype=float))

    def grad_H_eff(self, point: Sequence[float]) -> np.ndarray:
        return np.array(jacobian(lambda m: self.H_eff(m), list(point))[0], dtype=float)

    def grad_H(self, point: Sequence[float]) -> np.ndarray:
        return np.array(jacobian(lambda m: self.H(m), list(point))[0], dtype=float)

    def grad_g(self, point: Sequence[float]) -> np.ndarray:
        if self.conformal is None:
            return np.zeros(self.dim)
        return np.array(jacobian(lambda m: self.g(m), list(point))[0], dtype=float)


# --- kernels -----------------------------------------------------------------


def contact_condition_residual(form: OneForm, point: Sequence[float]) -> float:
    """Coefficient of ``(d alpha)^n ^ alpha`` relative to the Darboux form.

    Computed as the Pfaffian of ``[[Omega, A], [-A^T, 0]]``; the Darboux form
    gives 1 at every point and ``c * eta`` gives ``c^(n+1)``.
    """
    chart = form.chart
    value = _bordered_pfaffian(form.d(point), form.at(point))
    reference = _bordered_pfaffian(chart.darboux_omega(), np.array(chart.darboux_coefficients([0.0] * chart.dim), dtype=float))
    return value / reference


def _bordered_pfaffian(omega: np.ndarray, a: np.ndarray) -> float:
    size = omega.shape[0]
    m = np.zeros((size + 1, size + 1))
    m[:size, :size] = omega
    m[:size, size] = a
    m[size, :size] = -a
    return pfaffian(m)


def reeb_from_form(omega: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Solve ``i_xi dalpha = 0, i_xi alpha = 1`` for data given in some basis."""
    size = omega.shape[0]
    rhs = np.zeros(size + 1)
    rhs[size] = 1.0
    return solve_pivoted(bordered(omega, a), rhs)[:size]


def reeb_field(system: ContactSystem, point: Sequence[float]) -> np.ndarray:
    if system.conformal is None:
        xi = np.zeros(system.dim)
        xi[system.chart.z_index] = 1.0
        return xi
    return reeb_from_form(system.d_form(point), system.form_at(point))


def _field_and_xi(system: ContactSystem, point: Sequence[float]) -> tuple[np.ndarray, float]:
    omega = system.d_form(point)
    a = system.form_at(point)
    grad = system.grad_H_eff(point)
    rhs = np.concatenate([-grad, [primal(system.H_eff(point))]])
    sol = solve_pivoted(bordered(omega, a), rhs)
    return sol[:-1], -float(sol[-1])


def contact_field(system: ContactSystem, point: Sequence[float]) -> np.ndarray:
    """X_H of the effective pair (g eta, g H)."""
    point = [float(v) for v in point]
    if system.conformal is not None:
        return _field_and_xi(system, point)[0]
    n = system.chart.n
    grad = system.grad_H(point)
    hx, hy, hz = grad[:n], grad[n : 2 * n], grad[2 * n]
    y = np.asarray(point[n : 2 * n], dtype=float)
    h = primal(system.H(point))
    return np.concatenate([hy, y * hz - hx, [h - float(y @ hy)]])


def xi_of_H(system: ContactSystem, point: Sequence[float]) -> float:
    """xi'(H') for the effective pair; dH/dz when g is absent."""
    point = [float(v) for v in point]
    plain = system.plain
    xi_h = float(plain.grad_H(point)[system.chart.z_index])
    if system.conformal is None:
        return xi_h
    g = primal(system.g(point))
    if g == 0.0:
        raise DomainError(f"conformal factor vanishes at {point}")
    x_h = contact_field(plain, point)
    return (float(system.grad_g(point) @ x_h) + g * xi_h) / g


def conformal_covariance_residual(system: ContactSystem, g: ScalarField, point: Sequence[float]) -> float:
    plain = system.plain
    if primal(g.evaluate(plain.chart.binding(point))) == 0.0:
        raise DomainError(f"conformal factor vanishes at {list(point)}")
    rescaled = plain.with_conformal(g)
    return float(np.linalg.norm(contact_field(rescaled, point) - contact_field(plain, point)))


def contact_identity_residuals(system: ContactSystem, point: Sequence[float]) -> tuple[float, float]:
    """``|i_X eta' - H'|`` and ``|i_X d eta' + dH' - xi'(H') eta'|``."""
    point = [float(v) for v in point]
    x = contact_field(system, point)
    a = system.form_at(point)
    omega = system.d_form(point)
    h = primal(system.H_eff(point))
    xi = reeb_field(system, point)
    grad = system.grad_H_eff(point)
    xi_h = float(grad @ xi)
    first = abs(float(a @ x) - h)
    second = float(np.max(np.abs(omega.T @ x + grad - xi_h * a)))
    return first, second


def reeb_identity_residuals(system: ContactSystem, point: Sequence[float]) -> tuple[float, float]:
    """``|i_xi d eta'|`` and ``|i_xi eta' - 1|``."""
    xi = reeb_field(system, point)
    omega = system.d_form(point)
    a = system.form_at(point)
    return float(np.max(np.abs(omega.T @ xi))), abs(float(a @ xi) - 1.0)


def energy_identity_residual(system: ContactSystem, point: Sequence[float]) -> float:
    """``|X_H(H) - H xi(H)|`` for the plain pair."""
    plain = system.plain
    point = [float(v) for v in point]
    x = contact_field(plain, point)
    return abs(float(plain.grad_H(point) @ x) - primal(plain.H(point)) * xi_of_H(plain, point))


def lxhg_residual(system: ContactSystem, g: ScalarField, point: Sequence[float]) -> float:
    """``X_H(g) + g xi(H)`` for the plain pair, zero when g rescales xi'(H') away."""
    plain = system.plain
    point = [float(v) for v in point]
    grad_g = np.array(jacobian(lambda m: g.evaluate(plain.chart.binding(m)), point)[0], dtype=float)
    value = float(grad_g @ contact_field(plain, point)) + primal(g.evaluate(plain.chart.binding(point))) * xi_of_H(plain, point)
    return value

