from __future__ import annotations

import tests._path_setup  # noqa: F401

import unittest

import numpy as np
import pytest

from contact_hj.geometry import ContactSystem, DarbouxChart
from contact_hj.hje.conditions import (
    complete_solution_check,
    fibration_condition,
    hje_residual,
    pseudo_isotropy_residual,
    weak_hje_residual,
)
from contact_hj.hje.duality import first_integrals_from_solution, kernel_image_residual, leaf_isotropy_residual
from contact_hj.hje.fibration import Box, Fibration
from contact_hj.hje.solution import CompleteSolution


def _translation(components: list[str]) -> tuple[ContactSystem, CompleteSolution]:
    """H = y1 on n = 1, fibred over x1."""
    system = ContactSystem.from_strings(1, "y1")
    solution = CompleteSolution.from_expressions(
        Fibration.x_projection(system.chart),
        components,
        ("l0", "l1"),
        Box.from_pairs([[-1.0, 1.0]]),
        Box.from_pairs([[-1.0, 1.0], [-1.0, 1.0]]),
    )
    return system, solution


def _twisted() -> CompleteSolution:
    chart = DarbouxChart(2)
    return CompleteSolution.from_expressions(
        Fibration.x_projection(chart),
        ["l1 + x2", "l2", "l0"],
        ("l0", "l1", "l2"),
        Box.from_pairs([[-1.0, 1.0], [-1.0, 1.0]]),
        Box.from_pairs([[-1.0, 1.0]] * 3),
    )


class FibrationTest(unittest.TestCase):
    def test_kinds(self) -> None:
        chart = DarbouxChart(2)
        self.assertEqual(Fibration.of_kind(chart, "x").base_indices, (0, 1))
        self.assertEqual(Fibration.of_kind(chart, "xz").base_indices, (0, 1, 4))
        self.assertEqual(Fibration.of_kind(chart, "yz").fiber_indices, (0, 1))
        with self.assertRaises(ValueError):
            Fibration.of_kind(chart, "y")

    def test_assemble_inverts_project(self) -> None:
        fib = Fibration.yz_projection(DarbouxChart(1))
        point = fib.assemble([2.0, 3.0], [1.0])
        self.assertEqual(point, [1.0, 2.0, 3.0])
        self.assertEqual(fib.project(point), [2.0, 3.0])

    def test_box(self) -> None:
        box = Box.from_pairs([[0.5, 1.0], [-1.0, 1.0]])
        self.assertEqual(box.dim, 2)
        np.testing.assert_allclose(box.origin_or_center(), [0.75, 0.0])
        self.assertTrue(box.contains([1.0, -1.0]))
        self.assertEqual(box.grid(3).shape, (9, 2))
        with self.assertRaises(ValueError):
            Box.from_pairs([[1.0, 0.0]])

    def test_solution_box_dimensions_are_checked(self) -> None:
        chart = DarbouxChart(1)
        with self.assertRaises(ValueError):
            CompleteSolution(Fibration.x_projection(chart), lambda p, lam: [0, 0], Box.from_pairs([[0, 1]]), Box.from_pairs([[0, 1]]))


class TestConditions:
    def test_translation_solves_the_hje(self) -> None:
        system, solution = _translation(["l1", "l0"])
        section = solution.section([0.4, -0.3])
        assert np.max(np.abs(hje_residual(section, system, [0.2]))) < 1e-14
        vector, scalar = weak_hje_residual(section, system, [0.2])
        assert np.max(np.abs(vector)) < 1e-14
        assert abs(scalar) < 1e-14

    def test_sheared_solution_violates_the_hje(self) -> None:
        system, solution = _translation(["l1 + x1", "l0"])
        residual = hje_residual(solution.section([0.4, -0.3]), system, [0.2])
        assert np.max(np.abs(residual)) == pytest.approx(1.0)

    @pytest.mark.parametrize("workers", [1, 3])
    def test_complete_solution_check(self, workers: int) -> None:
        system, solution = _translation(["l1", "l0"])
        samples = solution.samples(np.random.default_rng(42), 8)
        report = complete_solution_check(solution, system, samples, workers=workers)
        assert report.passed, report.failures
        assert report.samples == 8
        assert report.min_abs_det == pytest.approx(1.0)
        assert set(report.residuals()) == {"min_abs_det", "max_hje", "max_t2_vector", "max_t2_scalar"}

    def test_complete_solution_check_reports_failures(self) -> None:
        system, solution = _translation(["l1 + x1", "l0"])
        samples = solution.samples(np.random.default_rng(0), 4)
        report = complete_solution_check(solution, system, samples)
        assert not report.passed
        assert any(f.startswith("max_hje") for f in report.failures)
        assert "max_hje" in report.worst

    def test_pseudo_isotropy(self) -> None:
        _, good = _translation(["l1", "l0"])
        assert pseudo_isotropy_residual(good, [0.1, 0.2], [0.3]) == 0.0
        assert pseudo_isotropy_residual(_twisted(), [0.1, 0.2, 0.3], [0.3, -0.2]) == pytest.approx(1.0)

    def test_vertical_fibration_is_preisotropic(self) -> None:
        system = ContactSystem.from_strings(2, "y1*y2 + z")
        report = fibration_condition(Fibration.x_projection(system.chart), system, [0.1, 0.2, 0.3, 0.4, 0.5])
        assert report.preisotropy
        assert report.coisotropy_of_section is None
        assert report.details["kernel_dim"] == 3
        assert report.details["kernel_cap_ker_eta_dim"] == 2


class TestDuality:
    def test_first_integrals_invert_the_solution(self) -> None:
        _, solution = _translation(["l1", "l0"])
        lam = first_integrals_from_solution(solution, [0.3, -0.25, 0.6])
        np.testing.assert_allclose(lam, [0.6, -0.25], atol=1e-12)

    def test_sections_lie_in_leaves(self) -> None:
        _, solution = _translation(["l1", "l0"])
        assert kernel_image_residual(solution, [0.3], [0.6, -0.25]) < 1e-12
        assert leaf_isotropy_residual(solution, [0.3], [0.6, -0.25]) < 1e-12

    def test_twisted_leaves_are_not_isotropic(self) -> None:
        # the leaf is spanned by d/dx1 and (d/dx2 + d/dy1)/sqrt(2)
        assert leaf_isotropy_residual(_twisted(), [0.3, -0.2], [0.1, 0.2, 0.3]) == pytest.approx(2**-0.5)
