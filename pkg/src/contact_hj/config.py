"""contact-hj run configuration.

A run is described by one TOML file. Merge order:
built-in defaults → config file → environment variables → command-line flags.
"""

from __future__ import annotations

import copy
import logging
import os
import tomllib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Mapping

import numpy as np
import tomli_w

from contact_hj.biiso import ParameterRestriction
from contact_hj.errors import ConfigError, ContactError
from contact_hj.expr import parse
from contact_hj.file_io import atomic_write
from contact_hj.reconstruct import G_MODES
from contact_hj.systems import FamilyModel, box, get_system

logger = logging.getLogger(__name__)

TASKS = ("verify", "reconstruct", "integrate", "compare", "first-integrals")
TOLERANCE_KEYS = ("quadrature", "solver", "check", "classification", "neighborhood", "newton_step", "compare", "drift")
FORMATS = ("csv", "json")

DEFAULTS: Dict[str, Any] = {
    "seed": 42,
    "workers": 1,
    "debug": False,
    "system": {},
    "solution": {},
    "grid": {"samples": 12},
    "tolerances": {
        "quadrature": 1e-10,
        "solver": 1e-9,
        "check": 1e-8,
        "classification": 1e-9,
        "neighborhood": 1e-3,
        "newton_step": 1e-12,
        "compare": 1e-6,
        "drift": 1e-6,
    },
    "integration": {"step": 1e-3, "t_end": 1.0, "output_every": 1, "g_mode": "none"},
    "restriction": {},
    "tasks": {"run": ["verify"]},
    "output": {"dir": "out", "format": "csv"},
    "telemetry": {"otlp_endpoint": ""},
}

# config key (dotted) → env var name
_ENV_OVERRIDES: list[tuple[str, str]] = [
    ("seed", "CONTACT_HJ_SEED"),
    ("debug", "CONTACT_HJ_DEBUG"),
    ("output.dir", "CONTACT_HJ_OUT"),
    ("workers", "CONTACT_HJ_WORKERS"),
    ("telemetry.otlp_endpoint", "OTEL_EXPORTER_OTLP_ENDPOINT"),
]
_INT_KEYS = {"seed", "workers"}


@dataclass(frozen=True)
class Tolerances:
    quadrature: float
    solver: float
    check: float
    classification: float
    neighborhood: float
    newton_step: float
    compare: float
    drift: float


@dataclass(frozen=True)
class Integration:
    step: float
    t_end: float
    output_every: int
    g_mode: str
    g: Any = None
    start: tuple[float, ...] | None = None
    base: tuple[float, ...] | None = None
    lam: tuple[float, ...] | None = None

    @property
    def output_step(self) -> float:
        return self.step * self.output_every


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; ``resolved`` is the merged mapping it came from."""

    resolved: Dict[str, Any]
    family: FamilyModel
    seed: int
    workers: int
    debug: bool
    samples: int
    tolerances: Tolerances
    integration: Integration
    tasks: tuple[str, ...]
    out_dir: Path
    fmt: str
    otlp_endpoint: str | None = None
    base_origin: np.ndarray | None = None
    z_guess: float = 0.0
    source: Path | None = None


def merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive merge; tables merge key by key, everything else is replaced."""
    merged: Dict[str, Any] = copy.deepcopy(dict(base))
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(merged.get(k), Mapping):
            merged[k] = merge(merged[k], v)
        else:
            merged[k] = copy.deepcopy(v)
    return merged


def _set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = data
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def _apply_env_overrides(merged: Dict[str, Any]) -> None:
    """Environment variables override the config file."""
    for config_key, env_var in _ENV_OVERRIDES:
        val = os.environ.get(env_var)
        if not val:
            continue
        if config_key in _INT_KEYS:
            try:
                _set_dotted(merged, config_key, int(val))
            except ValueError:
                logger.warning("Invalid %s value %r; ignoring", env_var, val)
        elif config_key == "debug":
            merged[config_key] = val.lower() == "true"
        else:
            _set_dotted(merged, config_key, val)


def read_toml(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError("", f"config file {path} does not exist")
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"{path}: {exc}") from exc


def merged_config(data: Mapping[str, Any], overrides: Mapping[str, Any] | None = None) -> Dict[str, Any]:
    merged = merge(DEFAULTS, data)
    _apply_env_overrides(merged)
    if overrides:
        merged = merge(merged, overrides)
    return merged


def load_config(path: Path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read, merge and validate a run configuration."""
    return resolve(merged_config(read_toml(path), overrides), source=path)


# --- validation ----------------------------------------------------------------


def _section(data: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(key, "must be a table")
    return value


def _positive(section: Mapping[str, Any], key: str, where: str) -> float:
    value = section.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}", f"must be a number, got {value!r}")
    if not value > 0:
        raise ConfigError(f"{where}.{key}", "must be positive")
    return float(value)


def _integer(data: Mapping[str, Any], key: str, where: str, minimum: int) -> int:
    value = data.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}{key}", f"must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{where}{key}", f"must be at least {minimum}")
    return value


def _vector(section: Mapping[str, Any], key: str, where: str, dim: int | None) -> tuple[float, ...] | None:
    if key not in section:
        return None
    values = section[key]
    if not isinstance(values, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
        raise ConfigError(f"{where}.{key}", "must be a list of numbers")
    if dim is not None and len(values) != dim:
        raise ConfigError(f"{where}.{key}", f"must have {dim} entries, got {len(values)}")
    return tuple(float(v) for v in values)


def _tolerances(data: Mapping[str, Any]) -> Tolerances:
    section = _section(data, "tolerances")
    unknown = set(section) - set(TOLERANCE_KEYS)
    if unknown:
        raise ConfigError(f"tolerances.{sorted(unknown)[0]}", f"is not a tolerance. Available: {list(TOLERANCE_KEYS)}")
    return Tolerances(**{key: _positive(section, key, "tolerances") for key in TOLERANCE_KEYS})


def _tasks(data: Mapping[str, Any]) -> tuple[str, ...]:
    run = _section(data, "tasks").get("run", [])
    if isinstance(run, str) or not isinstance(run, list) or not run:
        raise ConfigError("tasks.run", "must be a non-empty list")
    for task in run:
        if task not in TASKS:
            raise ConfigError("tasks.run", f"Unknown task: {task}. Available: {list(TASKS)}")
    if len(set(run)) != len(run):
        raise ConfigError("tasks.run", "lists a task twice")
    return tuple(run)


def _family(data: Mapping[str, Any]) -> FamilyModel:
    system = _section(data, "system")
    solution = _section(data, "solution")
    name = system.get("family")
    if not name:
        raise ConfigError("system.family", "required")
    try:
        builder = get_system(str(name))
    except ValueError as exc:
        raise ConfigError("system.family", str(exc)) from exc
    try:
        model = builder.build(system, solution)
    except ConfigError:
        raise
    except ContactError as exc:
        raise ConfigError("system", str(exc)) from exc
    return _with_restriction(model, _section(data, "restriction"))


def _with_restriction(model: FamilyModel, section: Mapping[str, Any]) -> FamilyModel:
    """[restriction] overrides the family's own Lambda-hat and level box."""
    if not section:
        return model
    changes: Dict[str, Any] = {}
    if "fixed" in section:
        if model.solution is None:
            raise ConfigError("restriction.fixed", "needs a complete solution")
        fixed = section["fixed"]
        if not isinstance(fixed, Mapping) or not fixed:
            raise ConfigError("restriction.fixed", "must be a table of parameter name = value")
        names = list(model.solution.param_names)
        axes: Dict[int, float] = {}
        for key, value in fixed.items():
            if key not in names:
                raise ConfigError(f"restriction.fixed.{key}", f"is not a parameter. Available: {names}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"restriction.fixed.{key}", "must be a number")
            axes[names.index(key)] = float(value)
        changes["restriction"] = ParameterRestriction.axis_slice(model.solution.param_box, axes)
    if "level_box" in section:
        if model.system is None:
            raise ConfigError("restriction.level_box", "needs a contact system")
        changes["level_box"] = box(section, "level_box", "restriction", dim=model.system.dim - 1)
    return replace(model, **changes)


def _integration(data: Mapping[str, Any], family: FamilyModel) -> Integration:
    section = _section(data, "integration")
    step = _positive(section, "step", "integration")
    t_end = _positive(section, "t_end", "integration")
    if step > t_end:
        raise ConfigError("integration.step", "exceeds integration.t_end")
    output_every = _integer(section, "output_every", "integration.", 1)
    g_mode = str(section.get("g_mode", "none"))
    if g_mode not in G_MODES:
        raise ConfigError("integration.g_mode", f"Unknown g mode: {g_mode}. Available: {list(G_MODES)}")

    system, solution = family.system, family.solution
    g = family.conformal
    if section.get("g"):
        if system is None:
            raise ConfigError("integration.g", "needs a contact system")
        try:
            g = parse(str(section["g"]), system.chart.names)
        except ContactError as exc:
            raise ConfigError("integration.g", str(exc)) from exc
    if g_mode == "explicit" and g is None:
        raise ConfigError("integration.g", "required for g_mode = 'explicit'")

    dim = system.dim if system is not None else None
    start = _vector(section, "start", "integration", dim)
    base = _vector(section, "base", "integration", solution.base_dim if solution else None)
    lam = _vector(section, "lambda", "integration", solution.param_dim if solution else None)
    if start is not None and (base is not None or lam is not None):
        raise ConfigError("integration.start", "conflicts with integration.base / integration.lambda")
    if (base is None) != (lam is None):
        raise ConfigError("integration.lambda" if lam is None else "integration.base", "required together with its pair")
    if lam is not None and solution is not None and not solution.param_box.contains(lam):
        raise ConfigError("integration.lambda", f"lies outside solution.param_box {solution.param_box.to_pairs()}")
    return Integration(step, t_end, output_every, g_mode, g, start, base, lam)


def _needs(tasks: tuple[str, ...], family: FamilyModel, integration: Integration) -> None:
    trajectory_tasks = {"reconstruct", "integrate", "compare", "first-integrals"} & set(tasks)
    if family.system is None and trajectory_tasks:
        raise ConfigError("tasks.run", f"{sorted(trajectory_tasks)} need a contact system; family {family.name} provides none")
    if family.solution is None and {"reconstruct", "integrate", "first-integrals"} & set(tasks):
        raise ConfigError("solution.components", "required")
    if trajectory_tasks and integration.start is None and integration.base is None:
        raise ConfigError("integration.start", "required (or integration.base with integration.lambda)")
    if "compare" in tasks and not {"reconstruct", "integrate"} & set(tasks):
        raise ConfigError("tasks.run", "compare needs reconstruct or integrate")


def resolve(data: Mapping[str, Any], *, source: Path | None = None) -> RunConfig:
    """Validate a merged mapping; errors name the offending dotted key."""
    seed = _integer(data, "seed", "", 0)
    workers = _integer(data, "workers", "", 1)
    debug = data.get("debug", False)
    if not isinstance(debug, bool):
        raise ConfigError("debug", "must be true or false")
    samples = _integer(_section(data, "grid"), "samples", "grid.", 1)
    tolerances = _tolerances(data)
    tasks = _tasks(data)
    family = _family(data)
    integration = _integration(data, family)
    _needs(tasks, family, integration)

    output = _section(data, "output")
    fmt = str(output.get("format", "csv"))
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"Unknown format: {fmt}. Available: {list(FORMATS)}")
    out_dir = Path(str(output.get("dir", "out"))).expanduser()

    solution_section = _section(data, "solution")
    base_origin = None
    if "base_origin" in solution_section and family.solution is not None:
        base_origin = np.asarray(_vector(solution_section, "base_origin", "solution", family.solution.base_dim))
        if not family.solution.base_box.contains(base_origin):
            raise ConfigError("solution.base_origin", "lies outside solution.base_box")

    restriction = _section(data, "restriction")
    z_guess = restriction.get("z_guess", 0.0)
    if isinstance(z_guess, bool) or not isinstance(z_guess, (int, float)):
        raise ConfigError("restriction.z_guess", "must be a number")

    endpoint = str(_section(data, "telemetry").get("otlp_endpoint", "") or "") or None
    logger.debug("resolved config for family %s with tasks %s", family.name, tasks)
    return RunConfig(
        resolved=dict(data),
        family=family,
        seed=seed,
        workers=workers,
        debug=debug,
        samples=samples,
        tolerances=tolerances,
        integration=integration,
        tasks=tasks,
        out_dir=out_dir,
        fmt=fmt,
        otlp_endpoint=endpoint,
        base_origin=base_origin,
        z_guess=float(z_guess),
        source=source,
    )


def dump_toml(data: Mapping[str, Any]) -> str:
    return tomli_w.dumps(_toml_safe(data))


def _toml_safe(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _toml_safe(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_toml_safe(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def save_resolved(config: RunConfig, path: Path) -> None:
    atomic_write(path, dump_toml(config.resolved))


def demo_config(family: str) -> Dict[str, Any]:
    """Demo configuration of a built-in family, ready for ``tomli_w``."""
    try:
        builder = get_system(family)
    except ValueError as exc:
        raise ConfigError("family", str(exc)) from exc
    return merge({"seed": DEFAULTS["seed"]}, builder.demo())
