"""Registry of built-in system families."""

from __future__ import annotations

import importlib
import pkgutil
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Protocol, Sequence, runtime_checkable

from contact_hj.biiso import ParameterRestriction
from contact_hj.errors import ConfigError
from contact_hj.expr import ScalarField
from contact_hj.geometry import ContactSystem
from contact_hj.hje.fibration import Box
from contact_hj.hje.solution import CompleteSolution


@dataclass(frozen=True)
class FamilyModel:
    """Everything a run needs from a family: system, solution and certified extras."""

    name: str
    system: ContactSystem | None
    solution: CompleteSolution | None = None
    conformal: ScalarField | None = None
    restriction: ParameterRestriction | None = None
    level_box: Box | None = None
    liouville: Any = None
    oracle: Any = None
    details: dict[str, Any] = field(default_factory=dict)


@runtime_checkable
class SystemFamily(Protocol):
    """Protocol for family builders."""

    @property
    def name(self) -> str: ...

    def build(self, system: Mapping[str, Any], solution: Mapping[str, Any]) -> FamilyModel: ...
    def demo(self) -> dict[str, Any]: ...


SYSTEM_REGISTRY: Dict[str, type[SystemFamily]] = {}


def register_system(cls: type[SystemFamily]) -> type[SystemFamily]:
    """Class decorator to register a family."""
    instance = cls()
    SYSTEM_REGISTRY[instance.name] = cls
    return cls


def get_system(name: str) -> SystemFamily:
    """Get a family builder by name."""
    _ensure_registered()
    if name not in SYSTEM_REGISTRY:
        raise ValueError(f"Unknown system: {name}. Available: {list(SYSTEM_REGISTRY.keys())}")
    return SYSTEM_REGISTRY[name]()


def available_systems() -> list[str]:
    """Return names of all registered families."""
    _ensure_registered()
    return sorted(SYSTEM_REGISTRY.keys())


def _ensure_registered() -> None:
    """Import all family modules to trigger @register_system decorators."""
    if SYSTEM_REGISTRY:
        return
    package_name = __name__
    for module in pkgutil.iter_modules(__path__):
        if module.name.startswith("_"):
            continue
        importlib.import_module(f"{package_name}.{module.name}")


# --- config helpers shared by the families -----------------------------------


def require(section: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in section:
        raise ConfigError(f"{where}.{key}", "required")
    return section[key]


def number(section: Mapping[str, Any], key: str, where: str, default: float | None = None) -> float:
    value = section.get(key, default) if default is not None else require(section, key, where)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}", f"must be a number, got {value!r}")
    return float(value)


def box(section: Mapping[str, Any], key: str, where: str, default: Sequence[Sequence[float]] | None = None, dim: int | None = None) -> Box:
    pairs = section.get(key, default) if default is not None else require(section, key, where)
    if not pairs:
        raise ConfigError(f"{where}.{key}", "is empty")
    try:
        result = Box.from_pairs(pairs)
    except ValueError as exc:
        if "empty" in str(exc):
            raise ConfigError(f"{where}.{key}", "is empty") from exc
        raise ConfigError(f"{where}.{key}", f"is not a list of [low, high] pairs: {exc}") from exc
    except (TypeError, IndexError) as exc:
        raise ConfigError(f"{where}.{key}", f"is not a list of [low, high] pairs: {exc}") from exc
    if dim is not None and result.dim != dim:
        raise ConfigError(f"{where}.{key}", f"must have {dim} intervals, got {result.dim}")
    return result


def strings(section: Mapping[str, Any], key: str, where: str, count: int | None = None, default: Sequence[str] | None = None) -> list[str]:
    values = section.get(key, default) if default is not None else require(section, key, where)
    if isinstance(values, str) or not isinstance(values, (list, tuple)):
        raise ConfigError(f"{where}.{key}", "must be a list")
    out = [str(v) for v in values]
    if count is not None and len(out) != count:
        raise ConfigError(f"{where}.{key}", f"must have {count} entries, got {len(out)}")
    return out


__all__ = [
    "FamilyModel",
    "SYSTEM_REGISTRY",
    "SystemFamily",
    "available_systems",
    "box",
    "get_system",
    "number",
    "register_system",
    "require",
    "strings",
]
