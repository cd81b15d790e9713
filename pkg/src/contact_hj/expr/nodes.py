"""Expression trees over named real variables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Protocol, runtime_checkable

from contact_hj.errors import UnboundVariableError
from contact_hj.expr import dual

FUNCTIONS: dict[str, Callable[[Any], Any]] = {
    "exp": dual.exp,
    "log": dual.log,
    "sin": dual.sin,
    "cos": dual.cos,
    "sqrt": dual.sqrt,
}

_BINARY: dict[str, Callable[[Any, Any], Any]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": dual.div,
    "^": dual.power,
}


@runtime_checkable
class ScalarField(Protocol):
    """Anything evaluable on a binding of variable names to numbers or duals."""

    def evaluate(self, binding: Mapping[str, Any]) -> Any: ...


def _lift(value: Any) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    return NotImplemented


class Expr:
    """Base node. Concrete nodes are frozen dataclasses."""

    def evaluate(self, binding: Mapping[str, Any]) -> Any:
        raise NotImplementedError

    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError

    def __add__(self, other: Any) -> Expr:
        return Binary("+", self, _lift(other))

    def __radd__(self, other: Any) -> Expr:
        return Binary("+", _lift(other), self)

    def __sub__(self, other: Any) -> Expr:
        return Binary("-", self, _lift(other))

    def __rsub__(self, other: Any) -> Expr:
        return Binary("-", _lift(other), self)

    def __mul__(self, other: Any) -> Expr:
        return Binary("*", self, _lift(other))

    def __rmul__(self, other: Any) -> Expr:
        return Binary("*", _lift(other), self)

    def __truediv__(self, other: Any) -> Expr:
        return Binary("/", self, _lift(other))

    def __rtruediv__(self, other: Any) -> Expr:
        return Binary("/", _lift(other), self)

    def __pow__(self, other: Any) -> Expr:
        return Binary("^", self, _lift(other))

    def __neg__(self) -> Expr:
        return Unary("neg", self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def evaluate(self, binding: Mapping[str, Any]) -> Any:
        return self.value

    def free_vars(self) -> frozenset[str]:
        return frozenset()

    def __str__(self) -> str:
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def evaluate(self, binding: Mapping[str, Any]) -> Any:
        try:
            return binding[self.name]
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def free_vars(self) -> frozenset[str]:
        return frozenset({self.name})

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str
    operand: Expr

    def evaluate(self, binding: Mapping[str, Any]) -> Any:
        value = self.operand.evaluate(binding)
        if self.op == "neg":
            return -value
        return FUNCTIONS[self.op](value)

    def free_vars(self) -> frozenset[str]:
        return self.operand.free_vars()

    def __str__(self) -> str:
        if self.op == "neg":
            return f"(-{self.operand})"
        return f"{self.op}({self.operand})"


@dataclass(frozen=True, eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def evaluate(self, binding: Mapping[str, Any]) -> Any:
        return _BINARY[self.op](self.left.evaluate(binding), self.right.evaluate(binding))

    def free_vars(self) -> frozenset[str]:
        return self.left.free_vars() | self.right.free_vars()

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


class FunctionField:
    """A ScalarField backed by a Python callable.

    Used where a field is built from derivatives of user expressions (the
    thermodynamic Hamiltonian needs dPhi/dx) or by composing other fields.
    """

    def __init__(self, fn: Callable[[Mapping[str, Any]], Any], label: str, variables: frozenset[str] = frozenset()) -> None:
        self._fn = fn
        self.label = label
        self.variables = variables

    def evaluate(self, binding: Mapping[str, Any]) -> Any:
        return self._fn(binding)

    def free_vars(self) -> frozenset[str]:
        return self.variables

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"FunctionField({self.label!r})"


def product(a: ScalarField, b: ScalarField) -> ScalarField:
    if isinstance(a, Expr) and isinstance(b, Expr):
        return a * b
    return FunctionField(lambda binding: a.evaluate(binding) * b.evaluate(binding), f"({a})*({b})")


def reciprocal(a: ScalarField) -> ScalarField:
    if isinstance(a, Expr):
        return Const(1.0) / a
    return FunctionField(lambda binding: dual.div(1.0, a.evaluate(binding)), f"1/({a})")
