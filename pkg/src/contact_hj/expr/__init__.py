"""Expression language: parsing, evaluation and exact first derivatives."""

from __future__ import annotations

from typing import Any, Mapping, Sequence

from contact_hj.errors import UnboundVariableError
from contact_hj.expr.dual import (
    Dual,
    atan,
    cos,
    derivative,
    div,
    exp,
    jacobian,
    jvp,
    log,
    new_tag,
    power,
    primal,
    real_part,
    sin,
    sqrt,
    tangent,
)
from contact_hj.expr.nodes import (
    Binary,
    Const,
    Expr,
    FunctionField,
    ScalarField,
    Unary,
    Var,
    product,
    reciprocal,
)
from contact_hj.expr.parser import parse


def evaluate(e: ScalarField, binding: Mapping[str, Any]) -> Any:
    return e.evaluate(binding)


def grad(e: ScalarField, variables: Sequence[str], binding: Mapping[str, Any]) -> list[Any]:
    """Partial derivatives of ``e`` along ``variables`` at ``binding``."""
    out: list[Any] = []
    for name in variables:
        if name not in binding:
            raise UnboundVariableError(name)
        tag = new_tag()
        seeded = dict(binding)
        seeded[name] = Dual(binding[name], 1.0, tag)
        out.append(tangent(e.evaluate(seeded), tag))
    return out


__all__ = [
    "Binary",
    "Const",
    "Dual",
    "Expr",
    "FunctionField",
    "ScalarField",
    "Unary",
    "Var",
    "atan",
    "cos",
    "derivative",
    "div",
    "evaluate",
    "exp",
    "grad",
    "jacobian",
    "jvp",
    "log",
    "new_tag",
    "parse",
    "power",
    "primal",
    "product",
    "real_part",
    "reciprocal",
    "sin",
    "sqrt",
    "tangent",
]
