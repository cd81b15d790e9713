"""Coordinate fibrations and sampling boxes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from contact_hj.geometry import DarbouxChart

FIBRATION_KINDS = ("x", "xz", "yz")


@dataclass(frozen=True)
class Fibration:
    """Projection of the chart onto a subset of its coordinates."""

    chart: DarbouxChart
    base_indices: tuple[int, ...]
    kind: str = "coordinate"

    def __post_init__(self) -> None:
        idx = self.base_indices
        if len(set(idx)) != len(idx) or any(i < 0 or i >= self.chart.dim for i in idx):
            raise ValueError(f"invalid base indices {idx} for a chart of dimension {self.chart.dim}")
        if not idx or len(idx) >= self.chart.dim:
            raise ValueError("base must be a proper, non-empty set of coordinates")

    @classmethod
    def x_projection(cls, chart: DarbouxChart) -> Fibration:
        return cls(chart, chart.x_indices, "x")

    @classmethod
    def xz_projection(cls, chart: DarbouxChart) -> Fibration:
        return cls(chart, (*chart.x_indices, chart.z_index), "xz")

    @classmethod
    def yz_projection(cls, chart: DarbouxChart) -> Fibration:
        return cls(chart, (*chart.y_indices, chart.z_index), "yz")

    @classmethod
    def of_kind(cls, chart: DarbouxChart, kind: str) -> Fibration:
        builders = {"x": cls.x_projection, "xz": cls.xz_projection, "yz": cls.yz_projection}
        if kind not in builders:
            raise ValueError(f"Unknown fibration: {kind}. Available: {list(builders)}")
        return builders[kind](chart)

    @property
    def base_dim(self) -> int:
        return len(self.base_indices)

    @property
    def fiber_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.chart.dim) if i not in self.base_indices)

    @property
    def base_names(self) -> tuple[str, ...]:
        return tuple(self.chart.names[i] for i in self.base_indices)

    def project(self, point: Sequence[Any]) -> list[Any]:
        return [point[i] for i in self.base_indices]

    def assemble(self, base: Sequence[Any], fiber: Sequence[Any]) -> list[Any]:
        out: list[Any] = [0.0] * self.chart.dim
        for i, v in zip(self.base_indices, base):
            out[i] = v
        for i, v in zip(self.fiber_indices, fiber):
            out[i] = v
        return out

    def kernel_basis(self) -> np.ndarray:
        """Columns span Ker(Pi_*)."""
        basis = np.zeros((self.chart.dim, len(self.fiber_indices)))
        for col, i in enumerate(self.fiber_indices):
            basis[i, col] = 1.0
        return basis


@dataclass(frozen=True)
class Box:
    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lows) != len(self.highs):
            raise ValueError("box bounds have different lengths")
        for lo, hi in zip(self.lows, self.highs):
            if not lo <= hi:
                raise ValueError(f"empty box interval [{lo}, {hi}]")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> Box:
        return cls(tuple(float(p[0]) for p in pairs), tuple(float(p[1]) for p in pairs))

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lows) + np.asarray(self.highs))

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        return all(lo - tol <= v <= hi + tol for v, lo, hi in zip(p, self.lows, self.highs))

    def origin_or_center(self) -> np.ndarray:
        zero = np.zeros(self.dim)
        return zero if self.contains(zero) else self.center

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lows, highs = np.asarray(self.lows), np.asarray(self.highs)
        return lows + (highs - lows) * rng.random((count, self.dim))

    def grid(self, per_axis: int) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((1, 0))
        axes = [np.linspace(lo, hi, per_axis) if hi > lo else np.array([lo]) for lo, hi in zip(self.lows, self.highs)]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def to_pairs(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in zip(self.lows, self.highs)]
