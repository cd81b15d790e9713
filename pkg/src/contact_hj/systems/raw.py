"""Systems given directly as expressions in the config.

[system] carries n, the Hamiltonian H, optional chart names and an optional
conformal factor g; [solution] carries the fibration kind, the fiber
components of Sigma as expressions over base names then parameter names,
and the boxes. Without components the family is a bare system.
"""

from __future__ import annotations

import logging
from typing import Any, Mapping

from contact_hj.errors import ConfigError, ContactError
from contact_hj.expr import parse
from contact_hj.geometry import ContactSystem, DarbouxChart
from contact_hj.hje.fibration import FIBRATION_KINDS, Fibration
from contact_hj.hje.solution import CompleteSolution

from . import FamilyModel, box, number, register_system, require, strings

logger = logging.getLogger(__name__)


def raw_system(system: Mapping[str, Any]) -> tuple[ContactSystem, Any]:
    """ContactSystem for H plus the parsed conformal factor, if any."""
    if "form" in system:
        raise ConfigError("system.form", "raw contact forms are not supported; give g for a conformal rescale g eta")
    n = int(number(system, "n", "system"))
    if n < 1:
        raise ConfigError("system.n", "must be at least 1")
    names = tuple(strings(system, "names", "system", 2 * n + 1)) if "names" in system else ()
    text = require(system, "H", "system")
    if not isinstance(text, str) or not text.strip():
        raise ConfigError("system.H", "must be a non-empty expression")
    try:
        chart = DarbouxChart(n, names)
    except ValueError as exc:
        raise ConfigError("system.names", str(exc)) from exc
    try:
        hamiltonian = parse(text, chart.names)
    except ContactError as exc:
        raise ConfigError("system.H", str(exc)) from exc
    conformal = None
    if system.get("g"):
        try:
            conformal = parse(str(system["g"]), chart.names)
        except ContactError as exc:
            raise ConfigError("system.g", str(exc)) from exc
    return ContactSystem(chart, hamiltonian, label=text), conformal


def raw_solution(chart: DarbouxChart, solution: Mapping[str, Any]) -> CompleteSolution | None:
    if "components" not in solution:
        return None
    kind = str(solution.get("fibration", "x"))
    if kind not in FIBRATION_KINDS:
        raise ConfigError("solution.fibration", f"Unknown fibration: {kind}. Available: {list(FIBRATION_KINDS)}")
    fibration = Fibration.of_kind(chart, kind)
    k = len(fibration.fiber_indices)
    components = strings(solution, "components", "solution", k)
    params = strings(solution, "params", "solution", k, default=[f"l{i}" for i in range(1, k + 1)])
    clash = set(params) & set(chart.names)
    if clash:
        raise ConfigError("solution.params", f"clash with chart names: {sorted(clash)}")
    base_box = box(solution, "base_box", "solution", dim=fibration.base_dim)
    param_box = box(solution, "param_box", "solution", dim=k)
    try:
        return CompleteSolution.from_expressions(fibration, components, params, base_box, param_box)
    except ContactError as exc:
        raise ConfigError("solution.components", str(exc)) from exc


@register_system
class RawFamily:
    @property
    def name(self) -> str:
        return "raw"

    def build(self, system: Mapping[str, Any], solution: Mapping[str, Any]) -> FamilyModel:
        contact, conformal = raw_system(system)
        complete = raw_solution(contact.chart, solution)
        logger.debug("raw system H=%s with %s", contact.label, "a solution" if complete else "no solution")
        return FamilyModel(name=self.name, system=contact, solution=complete, conformal=conformal)

    def demo(self) -> dict[str, Any]:
        return {
            "system": {"family": "raw", "n": 1, "H": "1"},
            "solution": {
                "fibration": "yz",
                "components": ["l1"],
                "params": ["l1"],
                "base_box": [[-1.0, 1.0], [-1.0, 1.0]],
                "param_box": [[-1.0, 1.0]],
                "base_origin": [0.0, 0.0],
            },
            "integration": {"start": [0.2, 0.5, 0.1], "t_end": 0.003, "step": 1e-3},
            "tasks": {"run": ["verify", "reconstruct", "integrate", "compare"]},
        }
