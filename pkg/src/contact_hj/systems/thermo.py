"""Thermodynamic family: H = a0 (z - Phi) + a^j (y_j + dPhi/dx^j).

The complete solution is

  Sigma(x, lambda) = (x, e^-f lambda^k grad g_k - grad Phi, Phi + lambda^0 e^-f)

with X_hat = a^j d/dx^j, X_hat(f) = -a0 and X_hat(g_k) = c_k. Its sections
satisfy sigma_lambda* eta = e^-f d(-lambda^0 f + lambda^k g_k), so g = e^f
is a certified conformal factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from contact_hj.errors import ConfigError, PreconditionError
from contact_hj.expr import Expr, FunctionField, Unary, exp, grad, jacobian, parse, primal
from contact_hj.geometry import ContactSystem, DarbouxChart
from contact_hj.hje.fibration import Box, Fibration
from contact_hj.hje.solution import CompleteSolution
from contact_hj.numerics.linalg import solve_pivoted

from . import FamilyModel, box, number, register_system, require, strings

logger = logging.getLogger(__name__)

SPEC_TOL = 1e-9
_SPEC_SAMPLES = 32


@dataclass(frozen=True)
class ThermoSpec:
    n: int
    a0: float
    a: tuple[str, ...]
    g: tuple[str, ...]
    c: tuple[float, ...]
    base_box: Box
    param_box: Box
    phi: str = "0"
    f: str = "0"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        for name, values in (("a", self.a), ("g", self.g), ("c", self.c)):
            if len(values) != self.n:
                raise ValueError(f"{name} needs {self.n} entries, got {len(values)}")
        if self.base_box.dim != self.n or self.param_box.dim != self.n + 1:
            raise ValueError(f"boxes must have dimensions {self.n} (base) and {self.n + 1} (parameters)")

    @property
    def chart(self) -> DarbouxChart:
        return DarbouxChart(self.n)

    @property
    def x_names(self) -> tuple[str, ...]:
        return self.chart.names[: self.n]

    @cached_property
    def a_exprs(self) -> list[Expr]:
        return [parse(t, self.x_names) for t in self.a]

    @cached_property
    def g_exprs(self) -> list[Expr]:
        return [parse(t, self.x_names) for t in self.g]

    @cached_property
    def phi_expr(self) -> Expr:
        return parse(self.phi, self.x_names)

    @cached_property
    def f_expr(self) -> Expr:
        return parse(self.f, self.x_names)

    @property
    def conformal(self) -> Expr:
        return Unary("exp", self.f_expr)


def thermo_hamiltonian(spec: ThermoSpec) -> FunctionField:
    chart = spec.chart
    n = spec.n
    xs, ys, z = spec.x_names, chart.names[n : 2 * n], chart.names[2 * n]

    def H(binding: Mapping[str, Any]) -> Any:
        dphi = grad(spec.phi_expr, xs, binding)
        out = spec.a0 * (binding[z] - spec.phi_expr.evaluate(binding))
        for a_j, y_j, d_j in zip(spec.a_exprs, ys, dphi):
            out = out + a_j.evaluate(binding) * (binding[y_j] + d_j)
        return out

    label = f"{spec.a0!r}*(z - ({spec.phi})) + " + " + ".join(f"({a})*({y} + d({spec.phi})/d{x})" for a, x, y in zip(spec.a, xs, ys))
    return FunctionField(H, label, frozenset(chart.names))


def thermo_system(spec: ThermoSpec) -> tuple[ContactSystem, CompleteSolution]:
    chart = spec.chart
    xs = spec.x_names

    def fiber(p: Sequence[Any], lam: Sequence[Any]) -> list[Any]:
        binding = dict(zip(xs, p))
        scale = exp(-spec.f_expr.evaluate(binding))
        dg = [grad(g_k, xs, binding) for g_k in spec.g_exprs]
        dphi = grad(spec.phi_expr, xs, binding)
        ys = []
        for i in range(spec.n):
            combo = sum(lam[k + 1] * dg[k][i] for k in range(spec.n))
            ys.append(scale * combo - dphi[i])
        return [*ys, spec.phi_expr.evaluate(binding) + lam[0] * scale]

    system = ContactSystem(chart, thermo_hamiltonian(spec), label="thermo")
    names = tuple(f"l{k}" for k in range(spec.n + 1))
    solution = CompleteSolution(Fibration.x_projection(chart), fiber, spec.base_box, spec.param_box, names, "thermo")
    return system, solution


def verify_thermo_spec(spec: ThermoSpec, *, samples: int = _SPEC_SAMPLES, tol: float = SPEC_TOL, seed: int = 42) -> dict[str, float]:
    """Checks X_hat(f) = -a0, X_hat(g_k) = c_k and independence of the g_k."""
    xs = spec.x_names
    rng = np.random.default_rng(seed)
    worst = {"lxf": 0.0, "ck": 0.0, "min_abs_det_dg": float("inf"), "max_abs_a": 0.0}
    for x in spec.base_box.sample(rng, samples):
        binding = dict(zip(xs, x.tolist()))
        a = np.array([primal(e.evaluate(binding)) for e in spec.a_exprs])
        df = np.array([primal(v) for v in grad(spec.f_expr, xs, binding)])
        dg = np.array(jacobian(lambda v: [g.evaluate(dict(zip(xs, v))) for g in spec.g_exprs], x.tolist()), dtype=float)
        worst["lxf"] = max(worst["lxf"], abs(float(a @ df) + spec.a0))
        worst["ck"] = max(worst["ck"], float(np.max(np.abs(dg @ a - np.asarray(spec.c)))))
        worst["min_abs_det_dg"] = min(worst["min_abs_det_dg"], abs(float(np.linalg.det(dg))))
        worst["max_abs_a"] = max(worst["max_abs_a"], float(np.max(np.abs(a))))
    if worst["max_abs_a"] == 0.0:
        raise PreconditionError("a not identically zero", 0.0, message="the coefficients a^j vanish on the base box")
    if worst["lxf"] > tol:
        raise PreconditionError("X_hat(f) = -a0", worst["lxf"])
    if worst["ck"] > tol:
        raise PreconditionError("X_hat(g_k) = c_k", worst["ck"])
    if worst["min_abs_det_dg"] <= tol:
        raise PreconditionError("independence of g_k", worst["min_abs_det_dg"])
    return worst


class ThermoOracle:
    """Closed forms the pipelines are checked against."""

    def __init__(self, spec: ThermoSpec) -> None:
        self.spec = spec

    def _binding(self, x: Sequence[float]) -> dict[str, Any]:
        return dict(zip(self.spec.x_names, [float(v) for v in x]))

    def f(self, x: Sequence[float]) -> float:
        return primal(self.spec.f_expr.evaluate(self._binding(x)))

    def g(self, x: Sequence[float]) -> np.ndarray:
        binding = self._binding(x)
        return np.array([primal(e.evaluate(binding)) for e in self.spec.g_exprs])

    def h(self, lam: Sequence[float]) -> float:
        return self.spec.a0 * float(lam[0]) + float(np.dot(self.spec.c, np.asarray(lam[1:], dtype=float)))

    def W(self, x: Sequence[float], lam: Sequence[float], x0: Sequence[float]) -> float:
        lam = np.asarray(lam, dtype=float)
        return -lam[0] * (self.f(x) - self.f(x0)) + float(lam[1:] @ (self.g(x) - self.g(x0)))

    def phi(self, x: Sequence[float], x0: Sequence[float]) -> np.ndarray:
        return np.array([-1.0 - (self.f(x) - self.f(x0)), *(self.g(x) - self.g(x0))])

    def first_integrals(self, point: Sequence[float]) -> np.ndarray:
        """Sigma^-1 read off the point: lambda^0 from z, the rest from y."""
        spec, n = self.spec, self.spec.n
        x, y, z = point[:n], np.asarray(point[n : 2 * n], dtype=float), float(point[2 * n])
        binding = self._binding(x)
        ef = np.exp(self.f(x))
        dphi = np.array([primal(v) for v in grad(spec.phi_expr, spec.x_names, binding)])
        phi = primal(spec.phi_expr.evaluate(binding))
        dg = np.array(jacobian(lambda v: [e.evaluate(dict(zip(spec.x_names, v))) for e in spec.g_exprs], list(binding.values())), dtype=float)
        rest = solve_pivoted(dg.T, ef * (y + dphi))
        return np.array([ef * (z - phi), *rest])

    def legendrian_residual(self, point: Sequence[float]) -> float:
        """Distance of ``point`` from y = -grad Phi, z = Phi."""
        spec, n = self.spec, self.spec.n
        binding = self._binding(point[:n])
        dphi = np.array([primal(v) for v in grad(spec.phi_expr, spec.x_names, binding)])
        y = np.asarray(point[n : 2 * n], dtype=float)
        return max(float(np.max(np.abs(y + dphi))), abs(float(point[2 * n]) - primal(spec.phi_expr.evaluate(binding))))


def spec_from_config(system: Mapping[str, Any], solution: Mapping[str, Any]) -> ThermoSpec:
    n = int(number(system, "n", "system"))
    if n < 1:
        raise ConfigError("system.n", "must be at least 1")
    c = require(system, "c", "system")
    if not isinstance(c, list) or len(c) != n:
        raise ConfigError("system.c", f"must be a list of {n} numbers")
    try:
        return ThermoSpec(
            n=n,
            a0=number(system, "a0", "system", 0.0),
            a=tuple(strings(system, "a", "system", n)),
            g=tuple(strings(system, "g", "system", n)),
            c=tuple(float(v) for v in c),
            base_box=box(solution, "base_box", "solution", dim=n),
            param_box=box(solution, "param_box", "solution", dim=n + 1),
            phi=str(system.get("phi", "0")),
            f=str(system.get("f", "0")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("system", str(exc)) from exc


@register_system
class ThermoFamily:
    @property
    def name(self) -> str:
        return "thermo"

    def build(self, system: Mapping[str, Any], solution: Mapping[str, Any]) -> FamilyModel:
        spec = spec_from_config(system, solution)
        residuals = verify_thermo_spec(spec)
        logger.debug("thermo spec verified: %s", residuals)
        contact, complete = thermo_system(spec)
        return FamilyModel(
            name=self.name,
            system=contact,
            solution=complete,
            conformal=spec.conformal,
            oracle=ThermoOracle(spec),
            details={"spec": residuals},
        )

    def demo(self) -> dict[str, Any]:
        return {
            "system": {
                "family": "thermo",
                "n": 2,
                "a0": 0.3,
                "a": ["1", "0.5"],
                "phi": "0.5*x1*x2",
                "f": "-0.3*x1",
                "g": ["x1 + 0.3*sin(x2 - 0.5*x1)", "x2 + 0.1*(x2 - 0.5*x1)^2"],
                "c": [1.0, 0.5],
            },
            "solution": {
                "base_box": [[-0.5, 1.5], [-0.5, 1.5]],
                "param_box": [[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]],
            },
            "integration": {
                "base": [0.1, 0.2],
                "lambda": [1.0, 0.8, 1.2],
                "t_end": 1.0,
                "step": 1e-3,
                "output_every": 100,
                "g_mode": "explicit",
            },
            "tasks": {"run": ["verify", "reconstruct", "integrate", "compare", "first-integrals"]},
        }
