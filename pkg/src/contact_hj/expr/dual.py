"""Tagged dual numbers for forward-mode differentiation.

A Dual carries ``real + eps * e_tag``. Tags are drawn from a global counter
so every differentiation gets its own infinitesimal; when two duals meet the
higher tag wins and the other operand is treated as a constant for it. The
real and eps parts may themselves be duals with lower tags, which is what
makes nested derivatives (Hessians, derivatives of quadratures of
derivatives) come out right.
"""

from __future__ import annotations

import itertools
import math
from typing import Any, Callable, Sequence

from contact_hj.errors import DomainError

_TAGS = itertools.count(1)


def new_tag() -> int:
    return next(_TAGS)


class Dual:
    __slots__ = ("real", "eps", "tag")
    # numpy must defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, real: Any, eps: Any, tag: int) -> None:
        self.real = real
        self.eps = eps
        self.tag = tag

    def __repr__(self) -> str:
        return f"Dual({self.real!r}, {self.eps!r}, tag={self.tag})"

    def __add__(self, other: Any) -> Any:
        tag = _top(self, other)
        a, da = _split(self, tag)
        b, db = _split(other, tag)
        return Dual(a + b, da + db, tag)

    __radd__ = __add__

    def __sub__(self, other: Any) -> Any:
        tag = _top(self, other)
        a, da = _split(self, tag)
        b, db = _split(other, tag)
        return Dual(a - b, da - db, tag)

    def __rsub__(self, other: Any) -> Any:
        tag = _top(self, other)
        a, da = _split(self, tag)
        b, db = _split(other, tag)
        return Dual(b - a, db - da, tag)

    def __mul__(self, other: Any) -> Any:
        tag = _top(self, other)
        a, da = _split(self, tag)
        b, db = _split(other, tag)
        return Dual(a * b, a * db + da * b, tag)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Any:
        return div(self, other)

    def __rtruediv__(self, other: Any) -> Any:
        return div(other, self)

    def __neg__(self) -> Dual:
        return Dual(-self.real, -self.eps, self.tag)

    def __pos__(self) -> Dual:
        return self

    def __abs__(self) -> Any:
        return -self if primal(self) < 0 else self

    def __pow__(self, exponent: Any) -> Any:
        return power(self, exponent)

    def __rpow__(self, base: Any) -> Any:
        return power(base, self)

    # comparisons look at the innermost real value only
    def __lt__(self, other: Any) -> bool:
        return primal(self) < primal(other)

    def __le__(self, other: Any) -> bool:
        return primal(self) <= primal(other)

    def __gt__(self, other: Any) -> bool:
        return primal(self) > primal(other)

    def __ge__(self, other: Any) -> bool:
        return primal(self) >= primal(other)


def _top(a: Any, b: Any) -> int:
    ta = a.tag if isinstance(a, Dual) else 0
    tb = b.tag if isinstance(b, Dual) else 0
    return ta if ta >= tb else tb


def _split(x: Any, tag: int) -> tuple[Any, Any]:
    if isinstance(x, Dual) and x.tag == tag:
        return x.real, x.eps
    return x, 0.0


def primal(x: Any) -> float:
    """Innermost real value of a (possibly nested) dual."""
    while isinstance(x, Dual):
        x = x.real
    return float(x)


def tangent(y: Any, tag: int) -> Any:
    """Coefficient of the infinitesimal ``tag`` in ``y``."""
    if not isinstance(y, Dual):
        return 0.0
    if y.tag == tag:
        return y.eps
    if y.tag < tag:
        return 0.0
    return _lift(tangent(y.real, tag), tangent(y.eps, tag), y.tag)


def real_part(y: Any, tag: int) -> Any:
    """``y`` with the infinitesimal ``tag`` set to zero."""
    if not isinstance(y, Dual):
        return y
    if y.tag == tag:
        return y.real
    if y.tag < tag:
        return y
    return _lift(real_part(y.real, tag), real_part(y.eps, tag), y.tag)


def _lift(real: Any, eps: Any, tag: int) -> Any:
    if not isinstance(eps, Dual) and eps == 0.0:
        return real
    return Dual(real, eps, tag)


# --- elementary functions, generic over floats and duals --------------------


def div(a: Any, b: Any) -> Any:
    if primal(b) == 0.0:
        raise DomainError("division by zero")
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return a / b
    tag = _top(a, b)
    x, dx = _split(a, tag)
    y, dy = _split(b, tag)
    q = div(x, y)
    return Dual(q, div(dx - q * dy, y), tag)


def power(base: Any, exponent: Any) -> Any:
    if isinstance(exponent, Dual):
        if primal(base) <= 0.0:
            raise DomainError("variable exponent needs a positive base")
        return exp(exponent * log(base))
    k = float(exponent)
    b = primal(base)
    if b < 0.0 and not k.is_integer():
        raise DomainError(f"fractional power {k} of negative base {b}")
    if b == 0.0 and k < 0.0:
        raise DomainError("negative power of zero")
    if not isinstance(base, Dual):
        try:
            return base ** k
        except OverflowError as exc:
            raise DomainError(str(exc)) from exc
    if k == 0.0:
        return 1.0
    if k == 1.0:
        return base
    if b == 0.0 and k < 1.0:
        raise DomainError(f"power {k} is not differentiable at zero")
    x, dx = base.real, base.eps
    return Dual(power(x, k), k * power(x, k - 1.0) * dx, base.tag)


def exp(x: Any) -> Any:
    if isinstance(x, Dual):
        e = exp(x.real)
        return Dual(e, x.eps * e, x.tag)
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise DomainError(f"exp overflow at {x!r}") from exc


def log(x: Any) -> Any:
    if primal(x) <= 0.0:
        raise DomainError(f"log of non-positive value {primal(x)!r}")
    if isinstance(x, Dual):
        return Dual(log(x.real), div(x.eps, x.real), x.tag)
    return math.log(x)


def sqrt(x: Any) -> Any:
    v = primal(x)
    if v < 0.0:
        raise DomainError(f"sqrt of negative value {v!r}")
    if isinstance(x, Dual):
        if v == 0.0:
            raise DomainError("sqrt is not differentiable at zero")
        r = sqrt(x.real)
        return Dual(r, div(x.eps, 2.0 * r), x.tag)
    return math.sqrt(x)


def sin(x: Any) -> Any:
    if isinstance(x, Dual):
        return Dual(sin(x.real), x.eps * cos(x.real), x.tag)
    return math.sin(x)


def cos(x: Any) -> Any:
    if isinstance(x, Dual):
        return Dual(cos(x.real), -(x.eps * sin(x.real)), x.tag)
    return math.cos(x)


def atan(x: Any) -> Any:
    if isinstance(x, Dual):
        return Dual(atan(x.real), div(x.eps, 1.0 + x.real * x.real), x.tag)
    return math.atan(x)


# --- derivative helpers ----------------------------------------------------


def derivative(fn: Callable[[Any], Any], x: Any) -> Any:
    """d fn / dx at x for a scalar function."""
    tag = new_tag()
    return tangent(fn(Dual(x, 1.0, tag)), tag)


def jvp(fn: Callable[[list[Any]], Any], x: Sequence[Any], v: Sequence[Any]) -> tuple[Any, Any]:
    """Value and directional derivative of ``fn`` at ``x`` along ``v``.

    ``fn`` takes a list and returns a scalar or a sequence of scalars.
    """
    tag = new_tag()
    seeded = [Dual(xi, vi, tag) for xi, vi in zip(x, v)]
    out = fn(seeded)
    if isinstance(out, (list, tuple)):
        return [real_part(o, tag) for o in out], [tangent(o, tag) for o in out]
    return real_part(out, tag), tangent(out, tag)


def jacobian(fn: Callable[[list[Any]], Any], x: Sequence[Any]) -> list[list[Any]]:
    """Rows are outputs, columns are inputs; a scalar output gives one row."""
    dim = len(x)
    columns: list[list[Any]] = []
    for j in range(dim):
        _, d = jvp(fn, x, [1.0 if i == j else 0.0 for i in range(dim)])
        columns.append(list(d) if isinstance(d, list) else [d])
    rows = len(columns[0]) if columns else 0
    return [[columns[j][i] for j in range(dim)] for i in range(rows)]
