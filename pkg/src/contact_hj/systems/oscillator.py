"""Damped oscillator: H = (p^2 + q^2)/2 - alpha s with eta = p dq + ds.

Sections sigma(q) = (q, phi(q), chi(q)) solve the Hamilton-Jacobi equation
iff phi' phi = -q - alpha phi and chi' phi = (q^2 - phi^2)/2 - alpha chi.
The first equation integrates to an implicit relation R(phi, q) = ln l1
whose form depends on the regime of alpha; the second to

  chi = (q^2 + phi^2)/(2 alpha) + l2 exp(alpha int_{q_a}^{q} -dr/phi(r)).

On the relation's domain dR/dphi = phi / (phi^2 + alpha phi q + q^2), so
each q > 0 carries an upper (phi > 0) and a lower (phi < 0) branch where
they exist. Along the flow H o Sigma = -alpha l2 exp(...), so l2 = 0 is
the slice inside H = 0.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from contact_hj.biiso import ParameterRestriction
from contact_hj.errors import BranchLossError, ConfigError
from contact_hj.expr import Dual, atan, div, exp, log, parse, primal
from contact_hj.geometry import ContactSystem, DarbouxChart
from contact_hj.hje.fibration import Box, Fibration
from contact_hj.hje.solution import CompleteSolution
from contact_hj.numerics import bracketed_root, integrate

from . import FamilyModel, box, number, register_system

logger = logging.getLogger(__name__)

REGIMES = ("real", "complex", "critical")
BRANCHES = ("upper", "lower")
NEWTON_CORRECTIONS = 2
_MAX_EXPANSIONS = 200
NAMES = ("q", "p", "s")


@dataclass(frozen=True)
class OscillatorSpec:
    alpha: float
    base_box: Box
    param_box: Box
    level_box: Box
    branch: str = "lower"
    anchor: float = 1.0
    tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.alpha == 0.0:
            raise ValueError("alpha must be non-zero")
        if self.branch not in BRANCHES:
            raise ValueError(f"Unknown branch: {self.branch}. Available: {list(BRANCHES)}")
        if self.anchor <= 0.0:
            raise ValueError("anchor must be positive")
        if self.base_box.dim != 1 or self.base_box.lows[0] <= 0.0:
            raise ValueError("base box must be an interval of positive q")
        if self.param_box.dim != 2 or self.level_box.dim != 2:
            raise ValueError("parameter and level boxes must be two-dimensional")
        if self.branch == "lower" and not self.has_lower_branch:
            raise ValueError(f"alpha={self.alpha} has no lower (phi < 0) branch")

    @property
    def regime(self) -> str:
        if abs(self.alpha) > 2.0:
            return "real"
        if abs(self.alpha) < 2.0:
            return "complex"
        return "critical"

    @property
    def roots(self) -> tuple[float, float]:
        """a+ and a-, the slopes of the invariant lines phi = a q (real regime)."""
        root = math.sqrt(self.alpha**2 / 4.0 - 1.0)
        return -self.alpha / 2.0 + root, -self.alpha / 2.0 - root

    @property
    def exponents(self) -> tuple[float, float]:
        """b+ and b-, with b+ - b- = 1."""
        a_plus, a_minus = self.roots
        s = math.sqrt(self.alpha**2 - 4.0)
        return a_plus / s, a_minus / s

    @property
    def omega(self) -> float:
        return math.sqrt(1.0 - self.alpha**2 / 4.0)

    @property
    def floor_slope(self) -> float:
        """Lower bound of phi/q on the relation's domain (-inf when unbounded)."""
        if self.regime == "real":
            return self.roots[0]
        if self.regime == "critical":
            return -self.alpha / 2.0
        return -math.inf

    @property
    def has_lower_branch(self) -> bool:
        return self.floor_slope < 0.0

    # --- implicit relation -------------------------------------------------

    def relation(self, phi: Any, q: Any) -> Any:
        alpha = self.alpha
        if self.regime == "real":
            a_plus, a_minus = self.roots
            b_plus, b_minus = self.exponents
            return b_plus * log(phi - a_plus * q) - b_minus * log(phi - a_minus * q)
        if self.regime == "complex":
            w = self.omega
            return 0.5 * log(phi * phi + alpha * phi * q + q * q) - (alpha / (2.0 * w)) * atan((div(phi, q) + alpha / 2.0) / w)
        r = -alpha / 2.0
        shifted = phi - r * q
        return log(shifted) - div(r * q, shifted)

    def relation_dphi(self, phi: Any, q: Any) -> Any:
        return div(phi, phi * phi + self.alpha * phi * q + q * q)

    @functools.lru_cache(maxsize=1 << 16)
    def _solve(self, q: float, log_l1: float) -> float:
        if q <= 0.0:
            raise BranchLossError(q, "q must be positive")

        def f(u: float) -> float:
            return self.relation(u, q) - log_l1

        def df(u: float) -> float:
            return self.relation_dphi(u, q)

        floor = self.floor_slope * q
        if floor < 0.0:
            if f(0.0) >= 0.0:
                raise BranchLossError(q, f"no {self.branch} branch for ln l1={log_l1:.6g}")
            if self.branch == "upper":
                lo, hi = 0.0, max(q, 1.0)
                hi = self._expand(f, hi, 2.0, q)
            else:
                hi = 0.0
                lo = self._approach(f, floor, q) if math.isfinite(floor) else self._expand(f, -max(q, 1.0), 2.0, q)
        else:
            lo = self._approach(f, floor, q, sign=-1.0)
            hi = self._expand(f, max(2.0 * floor, floor + q), 2.0, q)
        return bracketed_root(f, df, lo, hi)

    @staticmethod
    def _expand(f, x: float, factor: float, q: float) -> float:
        for _ in range(_MAX_EXPANSIONS):
            if f(x) > 0.0:
                return x
            x *= factor
        raise BranchLossError(q, "could not bracket the branch")

    @staticmethod
    def _approach(f, floor: float, q: float, sign: float = 1.0) -> float:
        """Point just above ``floor`` where sign * f > 0."""
        gap = max(abs(floor), q)
        for _ in range(_MAX_EXPANSIONS):
            gap *= 0.5
            x = floor + gap
            try:
                if sign * f(x) > 0.0:
                    return x
            except ArithmeticError:
                continue
        raise BranchLossError(q, "lost the branch near the invariant line")

    def phi(self, q: Any, l1: Any) -> Any:
        """phi^{l1}(q) on the configured branch; exact derivatives for dual inputs."""
        log_l1 = log(l1)
        value: Any = self._solve(primal(q), primal(log_l1))
        if not isinstance(q, Dual) and not isinstance(l1, Dual):
            return value
        for _ in range(NEWTON_CORRECTIONS):
            value = value - div(self.relation(value, q) - log_l1, self.relation_dphi(value, q))
        return value

    def flow_integral(self, q: Any, l1: Any) -> Any:
        """int_{anchor}^{q} -dr / phi(r)."""
        return integrate(lambda r: -div(1.0, self.phi(r, l1)), self.anchor, q, tol=self.tol)

    def chi(self, q: Any, l1: Any, l2: Any) -> Any:
        phi = self.phi(q, l1)
        particular = div(q * q + phi * phi, 2.0 * self.alpha)
        if not isinstance(l2, Dual) and l2 == 0.0:
            return particular
        return particular + l2 * exp(self.alpha * self.flow_integral(q, l1))

    def hamiltonian_text(self) -> str:
        return f"(p^2 + q^2)/2 - ({self.alpha!r})*s"


class OscillatorOracle:
    """Closed forms used to check quadratures and the M0 reduction."""

    def __init__(self, spec: OscillatorSpec) -> None:
        self.spec = spec

    def antiderivative(self, u: float) -> float:
        """J(u) with d/dq J(phi/q) = -1/phi along a branch."""
        spec = self.spec
        if spec.regime == "real":
            a_plus, a_minus = spec.roots
            return math.log(abs((u - a_plus) / (u - a_minus))) / (a_plus - a_minus)
        if spec.regime == "complex":
            w = spec.omega
            return math.atan((u + spec.alpha / 2.0) / w) / w
        return -1.0 / (u + spec.alpha / 2.0)

    def flow_integral(self, q: float, l1: float) -> float:
        spec = self.spec
        u = spec.phi(q, l1) / q
        ua = spec.phi(spec.anchor, l1) / spec.anchor
        return self.antiderivative(u) - self.antiderivative(ua)

    def zeta(self, q: float, p: float) -> float:
        return (p * p + q * q) / (2.0 * self.spec.alpha)

    def phi_hat(self, q: float, l1: float) -> float:
        """-(1/(2 alpha)) d/dl1 phi^2 = -(phi^2 + alpha phi q + q^2)/(alpha l1)."""
        alpha = self.spec.alpha
        phi = self.spec.phi(q, l1)
        return -(phi * phi + alpha * phi * q + q * q) / (alpha * l1)

    def energy(self, q: float, l1: float, l2: float) -> float:
        return -self.spec.alpha * l2 * math.exp(self.spec.alpha * self.flow_integral(q, l1))


def oscillator_system(spec: OscillatorSpec) -> tuple[ContactSystem, CompleteSolution]:
    chart = DarbouxChart(1, NAMES)

    def fiber(p: Sequence[Any], lam: Sequence[Any]) -> list[Any]:
        q = p[0]
        return [spec.phi(q, lam[0]), spec.chi(q, lam[0], lam[1])]

    system = ContactSystem(chart, parse(spec.hamiltonian_text(), chart.names), label=spec.hamiltonian_text())
    solution = CompleteSolution(Fibration.x_projection(chart), fiber, spec.base_box, spec.param_box, ("l1", "l2"), "damped oscillator")
    return system, solution


def spec_from_config(system: Mapping[str, Any], solution: Mapping[str, Any]) -> OscillatorSpec:
    try:
        return OscillatorSpec(
            alpha=number(system, "alpha", "system"),
            base_box=box(solution, "base_box", "solution", dim=1),
            param_box=box(solution, "param_box", "solution", dim=2),
            level_box=box(solution, "level_box", "solution", [[0.2, 1.5], [-1.5, 1.5]], dim=2),
            branch=str(system.get("branch", "lower")),
            anchor=number(system, "anchor", "system", 1.0),
            tol=number(system, "quadrature_tol", "system", 1e-10),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("system", str(exc)) from exc


@register_system
class DampedOscillatorFamily:
    @property
    def name(self) -> str:
        return "damped_oscillator"

    def build(self, system: Mapping[str, Any], solution: Mapping[str, Any]) -> FamilyModel:
        spec = spec_from_config(system, solution)
        contact, complete = oscillator_system(spec)
        logger.debug("damped oscillator alpha=%s (%s regime, %s branch)", spec.alpha, spec.regime, spec.branch)
        return FamilyModel(
            name=self.name,
            system=contact,
            solution=complete,
            restriction=ParameterRestriction.axis_slice(spec.param_box, {1: 0.0}),
            level_box=spec.level_box,
            oracle=OscillatorOracle(spec),
            details={"regime": spec.regime, "branch": spec.branch},
        )

    def demo(self) -> dict[str, Any]:
        return {
            "system": {"family": "damped_oscillator", "alpha": 0.5, "branch": "lower", "anchor": 1.0},
            "solution": {
                "base_box": [[0.3, 1.0]],
                "param_box": [[0.95, 1.2], [-0.5, 0.5]],
                "level_box": [[0.2, 1.5], [-1.5, 1.5]],
            },
            "integration": {"start": [1.0, -0.3, 1.09], "t_end": 1.0, "step": 1e-3, "output_every": 50},
            "tasks": {"run": ["verify", "integrate", "compare"]},
        }
