"""Fixed-step RK4 oracle and trajectory comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from contact_hj.errors import ContactError, IntegrationError, TrajectoryMismatchError
from contact_hj.geometry import ContactSystem, contact_field

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
DEFAULT_T_END = 1.0


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    method: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if times.ndim != 1 or points.shape[0] != times.shape[0]:
            raise ValueError(f"{times.shape[0]} times for {points.shape[0]} points")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time grid must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise ValueError("trajectory has non-finite entries")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def subsample(self, every: int) -> Trajectory:
        if every <= 1:
            return self
        idx = subsample_indices(len(self), every)
        return Trajectory(self.times[idx], self.points[idx], self.method, dict(self.metadata))


def time_grid(t_end: float, step: float, t0: float = 0.0) -> np.ndarray:
    if step <= 0.0:
        raise ValueError("step must be positive")
    count = int(round((t_end - t0) / step))
    return t0 + step * np.arange(count + 1)


def subsample_indices(count: int, every: int) -> np.ndarray:
    """Every ``every``-th index of ``count``; the last index is always kept."""
    idx = np.arange(0, count, max(every, 1))
    if idx.size and idx[-1] != count - 1:
        idx = np.append(idx, count - 1)
    return idx


def rk4_field(
    field_fn: Callable[[np.ndarray], np.ndarray],
    start: Sequence[float],
    t_end: float,
    step: float = DEFAULT_STEP,
    *,
    t0: float = 0.0,
    method: str = "rk4",
) -> Trajectory:
    """Classical RK4 for an autonomous field on any vector space."""
    times = time_grid(t_end, step, t0)
    points = np.empty((times.size, len(start)))
    y = np.asarray(start, dtype=float)
    points[0] = y
    for i in range(1, times.size):
        t = times[i - 1]
        try:
            k1 = field_fn(y)
            k2 = field_fn(y + 0.5 * step * k1)
            k3 = field_fn(y + 0.5 * step * k2)
            k4 = field_fn(y + step * k3)
        except (ContactError, ArithmeticError) as exc:
            raise IntegrationError(float(t), exc) from exc
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        points[i] = y
    return Trajectory(times, points, method, {"step": step})


def rk4(system: ContactSystem, start: Sequence[float], t_end: float = DEFAULT_T_END, step: float = DEFAULT_STEP, *, t0: float = 0.0) -> Trajectory:
    return rk4_field(lambda y: contact_field(system, y), start, t_end, step, t0=t0)


@dataclass(frozen=True)
class Comparison:
    max_abs: float
    at_time: float
    interpolated: bool


def compare(a: Trajectory, b: Trajectory) -> Comparison:
    """Pointwise max-norm gap; ``b`` is resampled onto ``a``'s grid when they differ."""
    if a.dim != b.dim:
        raise TrajectoryMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.times.shape == b.times.shape and np.allclose(a.times, b.times, rtol=0.0, atol=1e-12):
        gaps = np.max(np.abs(a.points - b.points), axis=1)
        i = int(np.argmax(gaps))
        return Comparison(float(gaps[i]), float(a.times[i]), False)

    lo, hi = max(a.times[0], b.times[0]), min(a.times[-1], b.times[-1])
    if lo > hi:
        raise TrajectoryMismatchError(f"disjoint time ranges [{a.times[0]}, {a.times[-1]}] and [{b.times[0]}, {b.times[-1]}]")
    mask = (a.times >= lo - 1e-12) & (a.times <= hi + 1e-12)
    if not mask.any():
        raise TrajectoryMismatchError(f"no grid point of the first trajectory lies in the shared range [{lo}, {hi}]")
    if len(b) < 2:
        raise TrajectoryMismatchError("cannot resample a single-point trajectory")
    spline = CubicSpline(b.times, b.points, axis=0)
    gaps = np.max(np.abs(a.points[mask] - spline(a.times[mask])), axis=1)
    i = int(np.argmax(gaps))
    logger.debug("compare resampled %d points onto a shared grid", int(mask.sum()))
    return Comparison(float(gaps[i]), float(a.times[mask][i]), True)
