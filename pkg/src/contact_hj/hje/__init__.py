"""Fibrations, complete solutions and the Hamilton-Jacobi condition checks."""

from contact_hj.hje.conditions import (
    FibrationReport,
    SolutionReport,
    complete_solution_check,
    fibration_condition,
    g_pseudo_isotropy_residual,
    hje_residual,
    projected_field,
    pseudo_isotropy_residual,
    pullback_dform,
    pullback_form,
    weak_hje_residual,
)
from contact_hj.hje.duality import (
    first_integral_jacobian,
    first_integrals_from_solution,
    first_integrals_generic,
    kernel_image_residual,
    leaf_isotropy_residual,
)
from contact_hj.hje.fibration import FIBRATION_KINDS, Box, Fibration
from contact_hj.hje.solution import CompleteSolution, Section

__all__ = [
    "FIBRATION_KINDS",
    "Box",
    "CompleteSolution",
    "Fibration",
    "FibrationReport",
    "Section",
    "SolutionReport",
    "complete_solution_check",
    "fibration_condition",
    "first_integral_jacobian",
    "first_integrals_from_solution",
    "first_integrals_generic",
    "g_pseudo_isotropy_residual",
    "hje_residual",
    "kernel_image_residual",
    "leaf_isotropy_residual",
    "projected_field",
    "pseudo_isotropy_residual",
    "pullback_dform",
    "pullback_form",
    "weak_hje_residual",
]
