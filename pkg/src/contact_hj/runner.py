"""Task orchestration for a configured run.

Tasks run in the configured order. A task whose prerequisite failed or was
skipped is itself skipped; independent tasks still run. Every artifact is
written before report.json.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np

from contact_hj.biiso import split_and_integrate
from contact_hj.config import RunConfig, save_resolved
from contact_hj.errors import ConfigError, ContactError, PreconditionError
from contact_hj.export import export_trajectory, to_jsonable
from contact_hj.file_io import atomic_write
from contact_hj.geometry import contact_identity_residuals, energy_identity_residual, reeb_identity_residuals
from contact_hj.hje import complete_solution_check, first_integrals_from_solution, pseudo_isotropy_residual
from contact_hj.reconstruct import effective_system, reconstruct_rescaled
from contact_hj.refint import Trajectory, compare, rk4, subsample_indices, time_grid
from contact_hj.systems import FamilyModel
from contact_hj.systems.liouville import liouville_restriction_check, sample_level_set
from contact_hj.tracing import Telemetry, finish_task_span

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
# config errors outrank numerical failures, which outrank failed checks
_EXIT_RANK = {EXIT_OK: 0, EXIT_VERIFY: 1, EXIT_NUMERICAL: 2, EXIT_CONFIG: 3}

PASSED = "passed"
FAILED = "failed"
ERROR = "error"
SKIPPED = "skipped"

DEPENDENCIES: Dict[str, tuple[str, ...]] = {
    "reconstruct": ("verify",),
    "integrate": ("verify",),
    "compare": ("reconstruct", "integrate"),
}
PRODUCERS = ("reconstruct", "integrate")


@dataclass
class TaskResult:
    name: str
    status: str = PASSED
    elapsed: float = 0.0
    residuals: dict[str, Any] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    message: str = ""
    exit_code: int = EXIT_OK

    @property
    def worst_residual(self) -> float | None:
        values = [float(v) for k, v in self.residuals.items() if isinstance(v, (int, float)) and not k.startswith("min_") and not k.endswith("_at")]
        return max(values) if values else None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"status": self.status, "elapsed_s": round(self.elapsed, 6), "residuals": self.residuals}
        if self.files:
            out["files"] = self.files
        if self.failures:
            out["failures"] = self.failures
        if self.message:
            out["message"] = self.message
        return out


@dataclass
class RunReport:
    family: str
    config: str | None
    tasks: list[TaskResult] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return max((t.exit_code for t in self.tasks), key=_EXIT_RANK.__getitem__, default=EXIT_OK)

    def task(self, name: str) -> TaskResult:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable(
            {
                "family": self.family,
                "config": self.config,
                "exit_code": self.exit_code,
                "tasks": {t.name: t.to_dict() for t in self.tasks},
            }
        )


class _TaskFailure(Exception):
    """A check ran to completion and found violations."""

    def __init__(self, failures: list[str], exit_code: int = EXIT_VERIFY) -> None:
        super().__init__("; ".join(failures))
        self.failures = failures
        self.exit_code = exit_code


@dataclass
class RunContext:
    config: RunConfig
    telemetry: Telemetry
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    _start: tuple[np.ndarray, np.ndarray | None, np.ndarray | None] | None = None
    _reference: Trajectory | None = None

    @property
    def family(self) -> FamilyModel:
        return self.config.family

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.config.seed)

    def start(self) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
        """(phase point, base point, lambda) of the configured start."""
        if self._start is None:
            integration, solution = self.config.integration, self.family.solution
            if integration.start is not None:
                point = np.asarray(integration.start, dtype=float)
                if solution is None:
                    self._start = (point, None, None)
                else:
                    lam = first_integrals_from_solution(solution, point, tol=self.config.tolerances.newton_step)
                    base = np.asarray(solution.fibration.project(point.tolist()), dtype=float)
                    self._start = (point, base, lam)
            else:
                base = np.asarray(integration.base, dtype=float)
                lam = np.asarray(integration.lam, dtype=float)
                self._start = (solution.point_at(base, lam), base, lam)
        return self._start

    def output_times(self) -> np.ndarray:
        integration = self.config.integration
        full = time_grid(integration.t_end, integration.step)
        return full[subsample_indices(full.size, integration.output_every)]

    def reference(self) -> Trajectory:
        """RK4 at the configured step, subsampled onto the output grid."""
        if self._reference is None:
            integration = self.config.integration
            point, _, _ = self.start()
            with self.telemetry.stage("rk4", step=integration.step, t_end=integration.t_end):
                full = rk4(self.family.system.plain, point, integration.t_end, integration.step)
            self._reference = full.subsample(integration.output_every)
        return self._reference

    def export(self, name: str, trajectory: Trajectory) -> str:
        config = self.config
        path = config.out_dir / f"{name}.{config.fmt}"
        names = self.family.system.chart.names if self.family.system is not None else ()
        export_trajectory(trajectory, path, config.fmt, names)
        return str(path)


# --- tasks ---------------------------------------------------------------------------


def _verify_liouville(ctx: RunContext, result: TaskResult) -> None:
    spec = ctx.family.liouville
    points = sample_level_set(spec, ctx.rng(), ctx.config.samples)
    report = liouville_restriction_check(spec, points, tol=ctx.config.tolerances.check)
    result.residuals.update(report.residuals())
    if not report.passed:
        raise _TaskFailure(report.failures)


def _verify_solution(ctx: RunContext, result: TaskResult) -> None:
    config, family = ctx.config, ctx.family
    solution, system = family.solution, family.system.plain
    tol = config.tolerances.check
    samples = solution.samples(ctx.rng(), config.samples)

    with ctx.telemetry.stage("complete_solution_check", samples=len(samples)):
        report = complete_solution_check(solution, system, samples, tol=tol, workers=config.workers)
    result.residuals.update(report.residuals())
    failures = list(report.failures)

    integration = config.integration
    effective = effective_system(system, integration.g_mode, g=integration.g)

    def isotropy(item: tuple[np.ndarray, np.ndarray]) -> float:
        p, lam = item
        return pseudo_isotropy_residual(solution, lam, p, effective)

    with ctx.telemetry.stage("pseudo_isotropy", g_mode=integration.g_mode):
        values = _fan_out(isotropy, samples, config.workers)
    worst = int(np.argmax(values))
    result.residuals["max_pseudo_isotropy"] = values[worst]
    if values[worst] > tol:
        p, lam = samples[worst]
        failures.append(f"pseudo-isotropy residual {values[worst]:.3e} exceeds {tol:.1e} at p={p.tolist()}, lambda={lam.tolist()}")

    identities = _identity_residuals(system, [solution.point_at(p, lam) for p, lam in samples], config.workers)
    result.residuals.update(identities)
    failures.extend(f"{k}={v:.3e} exceeds {tol:.1e}" for k, v in identities.items() if v > tol)
    if failures:
        raise _TaskFailure(failures)


def _identity_residuals(system, points: list[np.ndarray], workers: int) -> dict[str, float]:
    def one(m: np.ndarray) -> tuple[float, ...]:
        return (*contact_identity_residuals(system, m), *reeb_identity_residuals(system, m), energy_identity_residual(system, m))

    rows = np.array(_fan_out(one, points, workers))
    names = ("max_contact_eta", "max_contact_deta", "max_reeb_deta", "max_reeb_eta", "max_energy")
    return {name: float(np.max(rows[:, i])) for i, name in enumerate(names)}


def task_verify(ctx: RunContext, result: TaskResult) -> None:
    family = ctx.family
    if family.liouville is not None:
        _verify_liouville(ctx, result)
    elif family.solution is not None:
        _verify_solution(ctx, result)
    else:
        point, _, _ = ctx.start()
        identities = _identity_residuals(family.system, [point], 1)
        result.residuals.update(identities)
        tol = ctx.config.tolerances.check
        failures = [f"{k}={v:.3e} exceeds {tol:.1e}" for k, v in identities.items() if v > tol]
        if failures:
            raise _TaskFailure(failures)


def task_reconstruct(ctx: RunContext, result: TaskResult) -> None:
    config, family = ctx.config, ctx.family
    tolerances, integration = config.tolerances, config.integration
    _, base, lam = ctx.start()
    rng = ctx.rng()
    samples = [(p, lam) for p in family.solution.base_box.sample(rng, config.samples)]
    with ctx.telemetry.stage("reconstruct", g_mode=integration.g_mode):
        trajectory = reconstruct_rescaled(
            family.system,
            family.solution,
            integration.g_mode,
            lam,
            base,
            ctx.output_times(),
            g=integration.g,
            tol=tolerances.quadrature,
            solver_tol=tolerances.solver,
            check_tol=tolerances.check,
            samples=samples,
            base_origin=config.base_origin,
        )
    ctx.trajectories["reconstruct"] = trajectory
    result.residuals["max_residual"] = trajectory.metadata["max_residual"]
    for key in ("pseudo_isotropy", "path_discrepancy", "xi_of_H", "h_constancy"):
        if key in trajectory.metadata:
            result.residuals[key] = trajectory.metadata[key]
    result.files.append(ctx.export("reconstruct", trajectory))


def task_integrate(ctx: RunContext, result: TaskResult) -> None:
    config, family = ctx.config, ctx.family
    tolerances, integration = config.tolerances, config.integration
    point, _, _ = ctx.start()
    g = integration.g if integration.g_mode == "explicit" else None
    with ctx.telemetry.stage("split_and_integrate"):
        trajectory = split_and_integrate(
            family.system,
            family.solution,
            point,
            ctx.output_times(),
            restriction=family.restriction,
            level_box=family.level_box,
            z_guess=config.z_guess,
            g=g,
            tol=tolerances.quadrature,
            solver_tol=tolerances.solver,
            check_tol=tolerances.check,
            classification_tol=tolerances.classification,
            neighborhood=tolerances.neighborhood,
        )
    ctx.trajectories["integrate"] = trajectory
    result.residuals["region"] = trajectory.metadata["region"]
    for key in ("max_residual", "proportionality", "exponential_law", "varsigma", "membership", "isotropy", "symplectic_isotropy"):
        if key in trajectory.metadata:
            result.residuals[key] = trajectory.metadata[key]
    result.files.append(ctx.export("integrate", trajectory))
    law = trajectory.metadata.get("exponential_law")
    if law is not None and law > tolerances.check:
        raise _TaskFailure([f"exponential law residual {law:.3e} exceeds {tolerances.check:.1e}"])


def task_compare(ctx: RunContext, result: TaskResult) -> None:
    reference = ctx.reference()
    tol = ctx.config.tolerances.compare
    result.files.append(ctx.export("rk4", reference))
    failures = []
    for name in PRODUCERS:
        trajectory = ctx.trajectories.get(name)
        if trajectory is None:
            continue
        gap = compare(trajectory, reference)
        result.residuals[f"{name}_vs_rk4"] = gap.max_abs
        result.residuals[f"{name}_vs_rk4_at"] = gap.at_time
        if gap.max_abs > tol:
            failures.append(f"{name} differs from RK4 by {gap.max_abs:.3e} at t={gap.at_time:.6g} (tolerance {tol:.1e})")
    if failures:
        raise _TaskFailure(failures, EXIT_NUMERICAL)


def task_first_integrals(ctx: RunContext, result: TaskResult) -> None:
    config, family = ctx.config, ctx.family
    reference = ctx.reference()
    _, _, lam0 = ctx.start()
    tol = config.tolerances.newton_step
    drift_tol = config.tolerances.drift

    def invert(point: np.ndarray) -> np.ndarray:
        return first_integrals_from_solution(family.solution, point, initial=lam0, tol=tol)

    with ctx.telemetry.stage("first_integrals", points=len(reference)):
        values = np.array(_fan_out(invert, list(reference.points), config.workers))
    failures = []
    drift = float(np.max(np.abs(values - values[0])))
    result.residuals["max_drift"] = drift
    if drift > drift_tol:
        failures.append(f"first integrals drift by {drift:.3e} along RK4 (tolerance {drift_tol:.1e})")
    oracle = family.oracle
    if oracle is not None and hasattr(oracle, "first_integrals"):
        closed = np.array([oracle.first_integrals(m) for m in reference.points])
        gap = float(np.max(np.abs(closed - values)))
        result.residuals["max_oracle_gap"] = gap
        if gap > drift_tol:
            failures.append(f"first integrals differ from the closed form by {gap:.3e} (tolerance {drift_tol:.1e})")
    if failures:
        raise _TaskFailure(failures, EXIT_NUMERICAL)


TASK_FUNCTIONS: Dict[str, Callable[[RunContext, TaskResult], None]] = {
    "verify": task_verify,
    "reconstruct": task_reconstruct,
    "integrate": task_integrate,
    "compare": task_compare,
    "first-integrals": task_first_integrals,
}


def _fan_out(fn: Callable[[Any], Any], items: list[Any], workers: int) -> list[Any]:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
            return list(ex.map(fn, items))
    return [fn(item) for item in items]


# --- orchestration -------------------------------------------------------------------


def _blocked(name: str, config: RunConfig, done: dict[str, TaskResult]) -> str | None:
    needed = [d for d in DEPENDENCIES.get(name, ()) if d in config.tasks]
    if not needed:
        return None
    ok = [d for d in needed if d in done and done[d].status == PASSED]
    if name == "compare":
        return None if ok else f"no trajectory to compare: {', '.join(needed)} did not pass"
    missing = [d for d in needed if d not in ok]
    return f"prerequisite {', '.join(missing)} did not pass" if missing else None


def _run_task(ctx: RunContext, name: str, done: dict[str, TaskResult]) -> TaskResult:
    result = TaskResult(name)
    reason = _blocked(name, ctx.config, done)
    if reason:
        result.status, result.message = SKIPPED, reason
        logger.info("Task %s finished: %s in %.2fs (%s)", name, SKIPPED, 0.0, reason)
        return result

    started = time.perf_counter()
    with ctx.telemetry.task(name) as span:
        try:
            TASK_FUNCTIONS[name](ctx, result)
        except _TaskFailure as exc:
            result.status, result.failures, result.exit_code = FAILED, exc.failures, exc.exit_code
        except ConfigError as exc:
            result.status, result.message, result.exit_code = ERROR, str(exc), EXIT_CONFIG
        except PreconditionError as exc:
            result.message = str(exc)
            if name == "verify":
                result.status, result.exit_code = FAILED, EXIT_VERIFY
            else:
                result.status, result.exit_code = ERROR, EXIT_NUMERICAL
            result.residuals.setdefault(exc.check, exc.residual)
        except (ContactError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            result.status, result.message, result.exit_code = ERROR, f"{type(exc).__name__}: {exc}", EXIT_NUMERICAL
        result.elapsed = time.perf_counter() - started
        finish_task_span(span, result.status, result.elapsed, result.worst_residual)

    if result.status == ERROR:
        logger.warning("Task %s failed: %s", name, result.message)
    logger.info("Task %s finished: %s in %.2fs", name, result.status, result.elapsed)
    return result


def run(config: RunConfig, *, telemetry: Telemetry | None = None) -> RunReport:
    """Execute the configured tasks; writes artifacts, the resolved config and report.json."""
    owned = telemetry is None
    telemetry = telemetry or Telemetry(config.otlp_endpoint)
    ctx = RunContext(config, telemetry)
    report = RunReport(config.family.name, str(config.source) if config.source else None)
    done: dict[str, TaskResult] = {}
    try:
        config.out_dir.mkdir(parents=True, exist_ok=True)
        save_resolved(config, config.out_dir / "config.resolved.toml")
        for name in config.tasks:
            done[name] = _run_task(ctx, name, done)
            report.tasks.append(done[name])
        write_report(report, config.out_dir / "report.json")
    finally:
        telemetry.flush()
        if owned:
            telemetry.shutdown()
    return report


def write_report(report: RunReport, path: Path) -> None:
    atomic_write(path, json.dumps(report.to_dict(), indent=2) + "\n")
