from __future__ import annotations

import tests._path_setup  # noqa: F401

import math
import unittest

import numpy as np
import pytest

from contact_hj.biiso import (
    ParameterRestriction,
    build_level_chart,
    build_phi_hat,
    classify_region,
    restrict_solution,
    split_and_integrate,
)
from contact_hj.errors import ClassificationAmbiguityError, MembershipError, PreconditionError, RegionError
from contact_hj.geometry import ContactSystem
from contact_hj.hje.fibration import Box
from contact_hj.refint import compare, rk4
from contact_hj.systems import FamilyModel, get_system

REAL_START = [1.0, -0.25, 0.2125]


def _oscillator(alpha: float, param_box: list[list[float]], base_box: list[list[float]]) -> FamilyModel:
    return get_system("damped_oscillator").build(
        {"alpha": alpha, "branch": "lower", "anchor": 1.0},
        {"base_box": base_box, "param_box": param_box, "level_box": [[0.2, 1.5], [-1.5, 1.5]]},
    )


def _real() -> FamilyModel:
    return _oscillator(2.5, [[3.25, 4.0], [-0.5, 0.5]], [[0.5, 1.0]])


def _q_exact(t: np.ndarray) -> np.ndarray:
    return 7.0 / 6.0 * np.exp(-t / 2.0) - 1.0 / 6.0 * np.exp(-2.0 * t)


class RestrictionTest(unittest.TestCase):
    def test_axis_slice(self) -> None:
        r = ParameterRestriction.axis_slice(Box.from_pairs([[0.0, 1.0], [-1.0, 1.0], [2.0, 3.0]]), {1: 0.0})
        self.assertEqual(r.free_axes, (0, 2))
        self.assertEqual(r.embed([0.5, 2.5]), [0.5, 0.0, 2.5])
        np.testing.assert_allclose(r.locate([0.5, 0.0, 2.5]), [0.5, 2.5])
        with self.assertRaises(MembershipError):
            r.locate([0.5, 0.1, 2.5])

    def test_invalid_axes(self) -> None:
        with self.assertRaises(ValueError):
            ParameterRestriction.axis_slice(Box.from_pairs([[0.0, 1.0]]), {3: 0.0})


class TestClassification:
    def test_regions(self) -> None:
        model = _real()
        assert classify_region(model.system, REAL_START) == "M0"
        assert classify_region(model.system, [1.0, -0.25, 0.0]) == "M1"
        thermo = get_system("thermo")
        demo = thermo.demo()
        flat = thermo.build(dict(demo["system"], a0=0.0, f="0"), demo["solution"])
        assert classify_region(flat.system, [0.1, 0.2, 0.3, 0.4, 0.5]) == "M2"

    def test_ambiguity_band(self) -> None:
        system = ContactSystem.from_strings(1, "z - 1e-7")
        with pytest.raises(ClassificationAmbiguityError):
            classify_region(system, [0.0, 0.0, 0.0])
        assert classify_region(system, [0.0, 0.0, 0.0], tol=1e-12) == "M1"

    def test_boundary_of_the_flat_region(self) -> None:
        with pytest.raises(RegionError):
            classify_region(ContactSystem.from_strings(1, "z^2"), [0.0, 0.0, 0.0])


class TestLevelSet:
    def test_zeta_is_the_energy_graph(self) -> None:
        model = _real()
        chart = build_level_chart(model.system, model.level_box)
        assert chart.zeta([1.0, -0.25]) == pytest.approx(0.2125, abs=1e-12)
        assert chart.symplectic_rank([1.0, -0.25]) == 2

    def test_sign_change_of_the_slope_is_rejected(self) -> None:
        with pytest.raises(PreconditionError):
            # dH/dz = x1 changes sign across the box
            build_level_chart(ContactSystem.from_strings(1, "x1*z - y1"), Box.from_pairs([[-1.0, 1.0], [-1.0, 1.0]]))

    def test_restricted_slice_lies_in_M0(self) -> None:
        model = _real()
        chart = build_level_chart(model.system, model.level_box)
        restricted = restrict_solution(model.solution, chart, model.restriction)
        assert restricted.residuals["membership"] < 1e-10
        phi_hat = build_phi_hat(restricted)
        lam = [3.5]
        q = 0.8
        assert phi_hat.at([q], lam)[0] == pytest.approx(model.oracle.phi_hat(q, lam[0]), rel=1e-8)

    def test_off_slice_is_not_in_M0(self) -> None:
        model = _real()
        chart = build_level_chart(model.system, model.level_box)
        shifted = ParameterRestriction.axis_slice(model.solution.param_box, {1: 0.3})
        with pytest.raises(MembershipError):
            restrict_solution(model.solution, chart, shifted)


class TestIntegrate:
    def test_real_regime_on_M0(self) -> None:
        model = _real()
        times = np.linspace(0.0, 0.5, 6)
        traj = split_and_integrate(model.system, model.solution, REAL_START, times, restriction=model.restriction, level_box=model.level_box)
        assert traj.metadata["region"] == "M0"
        assert traj.method == "m0-quadrature"
        np.testing.assert_allclose(traj.points[:, 0], _q_exact(times), atol=1e-7)
        # H stays zero along the flow
        energies = [(p * p + q * q) / 2 - 2.5 * s for q, p, s in traj.points]
        assert max(abs(e) for e in energies) < 1e-9

    def test_complex_regime_follows_an_exponential_law(self) -> None:
        model = _oscillator(0.5, [[0.95, 1.2], [-0.5, 0.5]], [[0.3, 1.0]])
        times = np.linspace(0.0, 0.2, 3)
        traj = split_and_integrate(model.system, model.solution, [1.0, -0.3, 1.09], times, restriction=model.restriction, level_box=model.level_box)
        assert traj.metadata["varsigma"] == pytest.approx(-0.5)
        assert traj.metadata["exponential_law"] < 1e-8
        assert math.isclose(traj.points[0, 0], 1.0)

    def test_real_regime_on_M0_matches_rk4_over_unit_time(self) -> None:
        model = _real()
        times = np.linspace(0.0, 1.0, 21)
        traj = split_and_integrate(model.system, model.solution, REAL_START, times, restriction=model.restriction, level_box=model.level_box)
        reference = rk4(model.system.plain, REAL_START, 1.0, 1e-3).subsample(50)
        assert compare(traj, reference).max_abs < 1e-5

    def test_M1_start_uses_the_reciprocal_factor_and_matches_rk4(self) -> None:
        model = _real()
        # H o Sigma = -alpha l2 at the anchor q = 1, so this start has H = 1
        start = model.solution.point_at([1.0], [3.5, -0.4])
        q, p, s = start
        assert (p * p + q * q) / 2 - 2.5 * s == pytest.approx(1.0, abs=1e-9)
        times = np.linspace(0.0, 0.5, 11)
        traj = split_and_integrate(model.system, model.solution, start, times)
        assert traj.metadata["region"] == "M1"
        assert traj.metadata["g_mode"] == "reciprocal"
        reference = rk4(model.system.plain, start, 0.5, 1e-3).subsample(50)
        assert compare(traj, reference).max_abs < 1e-6

    def test_M0_needs_a_restriction(self) -> None:
        model = _real()
        with pytest.raises(PreconditionError):
            split_and_integrate(model.system, model.solution, REAL_START, [0.0, 0.1])
