"""Sections and complete solutions of the Pi-HJE."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from contact_hj.expr import jacobian, parse, primal
from contact_hj.hje.fibration import Box, Fibration

FiberMap = Callable[[Sequence[Any], Sequence[Any]], Sequence[Any]]


@dataclass(frozen=True)
class Section:
    """sigma(p) = (p, fiber(p)) assembled in chart order."""

    fibration: Fibration
    fiber: Callable[[Sequence[Any]], Sequence[Any]]

    def point(self, p: Sequence[Any]) -> list[Any]:
        return self.fibration.assemble(p, self.fiber(list(p)))

    def point_at(self, p: Sequence[float]) -> np.ndarray:
        return np.array([primal(v) for v in self.point(p)], dtype=float)

    def jacobian(self, p: Sequence[float]) -> np.ndarray:
        """sigma_*: rows are chart coordinates, columns base directions."""
        return np.array(jacobian(self.point, [float(v) for v in p]), dtype=float)


@dataclass(frozen=True)
class CompleteSolution:
    """Sigma: N x Lambda -> M given by its fiber components."""

    fibration: Fibration
    fiber: FiberMap
    base_box: Box
    param_box: Box
    param_names: tuple[str, ...] = ()
    label: str = ""

    def __post_init__(self) -> None:
        k = self.fibration.chart.dim - self.fibration.base_dim
        if self.param_box.dim != k:
            raise ValueError(f"parameter box has dimension {self.param_box.dim}, expected {k}")
        if self.base_box.dim != self.fibration.base_dim:
            raise ValueError(f"base box has dimension {self.base_box.dim}, expected {self.fibration.base_dim}")
        if not self.param_names:
            object.__setattr__(self, "param_names", tuple(f"l{i}" for i in range(1, k + 1)))

    @classmethod
    def from_expressions(
        cls,
        fibration: Fibration,
        components: Sequence[str],
        param_names: Sequence[str],
        base_box: Box,
        param_box: Box,
        label: str = "",
    ) -> CompleteSolution:
        """Fiber components as expressions over base names then parameter names."""
        if len(components) != len(fibration.fiber_indices):
            raise ValueError(f"need {len(fibration.fiber_indices)} fiber components, got {len(components)}")
        base_names = fibration.base_names
        variables = (*base_names, *param_names)
        exprs = [parse(text, variables) for text in components]

        def fiber(p: Sequence[Any], lam: Sequence[Any]) -> list[Any]:
            binding = dict(zip(base_names, p))
            binding.update(zip(param_names, lam))
            return [e.evaluate(binding) for e in exprs]

        return cls(fibration, fiber, base_box, param_box, tuple(param_names), label or "; ".join(components))

    @property
    def chart(self):
        return self.fibration.chart

    @property
    def base_dim(self) -> int:
        return self.fibration.base_dim

    @property
    def param_dim(self) -> int:
        return self.param_box.dim

    def point(self, p: Sequence[Any], lam: Sequence[Any]) -> list[Any]:
        return self.fibration.assemble(p, self.fiber(list(p), list(lam)))

    def point_at(self, p: Sequence[float], lam: Sequence[float]) -> np.ndarray:
        return np.array([primal(v) for v in self.point(p, lam)], dtype=float)

    def section(self, lam: Sequence[Any]) -> Section:
        lam = list(lam)
        return Section(self.fibration, lambda p: self.fiber(p, lam))

    def jacobian(self, p: Sequence[float], lam: Sequence[float]) -> np.ndarray:
        """Full Jacobian with base columns first, then parameter columns."""
        d = self.base_dim
        x = [float(v) for v in (*p, *lam)]
        return np.array(jacobian(lambda v: self.point(v[:d], v[d:]), x), dtype=float)

    def fiber_jacobian_lambda(self, p: Sequence[float], lam: Sequence[float]) -> np.ndarray:
        p = [float(v) for v in p]
        return np.array(jacobian(lambda v: list(self.fiber(p, v)), [float(v) for v in lam]), dtype=float)

    def samples(self, rng: np.random.Generator, count: int) -> list[tuple[np.ndarray, np.ndarray]]:
        base = self.base_box.sample(rng, count)
        params = self.param_box.sample(rng, count)
        return list(zip(base, params))
