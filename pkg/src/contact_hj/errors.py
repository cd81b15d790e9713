"""Exception hierarchy for contact-hj.

Every error raised on purpose by the package derives from ContactError so
the runner can map it onto an exit code:

  - ConfigError        -> 2 (bad configuration)
  - NumericalError     -> 3 (solver, quadrature, integration failures)
  - PreconditionError  -> 1 when raised by a verification, 3 otherwise
"""

from __future__ import annotations

from typing import Any


class ContactError(Exception):
    """Base class for all contact-hj errors."""


# --- expressions -----------------------------------------------------------


class ExprError(ContactError):
    """Base class for expression language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int) -> None:
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class UnboundVariableError(ExprError, KeyError):
    def __init__(self, name: str) -> None:
        super().__init__(f"variable {name!r} is not bound")
        self.name = name

    def __str__(self) -> str:
        return self.args[0]


class DomainError(ContactError, ArithmeticError):
    """Evaluation left the real domain of an operation (log of x <= 0, 1/0, ...)."""


# --- numerics --------------------------------------------------------------


class NumericalError(ContactError):
    """Base class for numerical failures."""


class SingularSystemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str, *, residual: float = float("nan"), iterations: int = 0, time: float | None = None) -> None:
        detail = f"{message} (residual={residual:.3e}, iterations={iterations}"
        if time is not None:
            detail += f", t={time:.6g}"
        super().__init__(detail + ")")
        self.residual = residual
        self.iterations = iterations
        self.time = time


class QuadratureError(NumericalError):
    pass


class QuadratureInversionError(NumericalError):
    pass


class BranchLossError(NumericalError):
    def __init__(self, q: Any, message: str = "lost the solution branch") -> None:
        super().__init__(f"{message} at q={q!r}")
        self.q = q


class IntegrationError(NumericalError):
    def __init__(self, time: float, cause: BaseException) -> None:
        super().__init__(f"vector field evaluation failed at t={time:.6g}: {cause}")
        self.time = time


class TrajectoryMismatchError(ContactError, ValueError):
    pass


# --- preconditions ---------------------------------------------------------


class PreconditionError(ContactError):
    """A geometric hypothesis failed on the sampled points."""

    def __init__(self, check: str, residual: float, location: Any = None, message: str = "") -> None:
        text = message or f"{check} violated: residual {residual:.3e}"
        if location is not None:
            text += f" at {location}"
        super().__init__(text)
        self.check = check
        self.residual = residual
        self.location = location


class ImmersionError(PreconditionError):
    pass


class MembershipError(PreconditionError):
    pass


class RegionError(PreconditionError):
    """Start point on the boundary of the region where xi(H) vanishes."""


class ClassificationAmbiguityError(PreconditionError):
    pass


# --- configuration ---------------------------------------------------------


class ConfigError(ContactError, ValueError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key} {message}" if key else message)
        self.key = key
