from __future__ import annotations

import tests._path_setup  # noqa: F401

import math
import unittest

import numpy as np
import pytest

from contact_hj.errors import ConfigError, PreconditionError
from contact_hj.hje.duality import first_integrals_from_solution
from contact_hj.hje.fibration import Box
from contact_hj.systems import SystemFamily, available_systems, get_system
from contact_hj.systems.liouville import LiouvilleCheckSpec, liouville_restriction_check, sample_level_set
from contact_hj.systems.oscillator import OscillatorOracle, OscillatorSpec
from contact_hj.systems.thermo import ThermoSpec, verify_thermo_spec


class RegistryTest(unittest.TestCase):
    def test_builtin_families(self) -> None:
        self.assertEqual(available_systems(), ["damped_oscillator", "liouville_sphere", "raw", "thermo"])
        for name in available_systems():
            family = get_system(name)
            self.assertIsInstance(family, SystemFamily)
            self.assertEqual(family.name, name)
            self.assertEqual(family.demo()["system"]["family"], name)

    def test_unknown_family(self) -> None:
        with self.assertRaises(ValueError) as ctx:
            get_system("pendulum")
        self.assertIn("Available", str(ctx.exception))

    def test_demos_build(self) -> None:
        for name in available_systems():
            demo = get_system(name).demo()
            model = get_system(name).build(demo["system"], demo.get("solution", {}))
            self.assertEqual(model.name, name)


class TestThermo:
    def _model(self):
        demo = get_system("thermo").demo()
        return get_system("thermo").build(demo["system"], demo["solution"])

    def test_oracle_inverts_the_solution(self) -> None:
        model = self._model()
        lam = [1.0, 0.8, 1.2]
        point = model.solution.point_at([0.4, 0.9], lam)
        np.testing.assert_allclose(model.oracle.first_integrals(point), lam, atol=1e-12)
        np.testing.assert_allclose(first_integrals_from_solution(model.solution, point), lam, atol=1e-10)

    def test_hamiltonian_on_sections(self) -> None:
        model = self._model()
        lam = [1.0, 0.8, 1.2]
        x = [0.4, 0.9]
        # H o sigma_lambda = exp(-f) h
        expected = math.exp(-model.oracle.f(x)) * model.oracle.h(lam)
        assert float(model.system.H(model.solution.point_at(x, lam).tolist())) == pytest.approx(expected, rel=1e-12)

    def test_spec_checks(self) -> None:
        base = dict(n=1, a0=0.0, a=("1",), g=("x1",), c=(1.0,), base_box=Box.from_pairs([[0.0, 1.0]]), param_box=Box.from_pairs([[0.0, 1.0]] * 2))
        assert verify_thermo_spec(ThermoSpec(**base))["ck"] < 1e-12
        with pytest.raises(PreconditionError, match="c_k"):
            verify_thermo_spec(ThermoSpec(**dict(base, c=(2.0,))))
        with pytest.raises(PreconditionError, match="-a0"):
            verify_thermo_spec(ThermoSpec(**dict(base, a0=0.5)))
        with pytest.raises(PreconditionError):
            verify_thermo_spec(ThermoSpec(**dict(base, a=("0",), c=(0.0,))))

    def test_config_errors(self) -> None:
        demo = get_system("thermo").demo()
        with pytest.raises(ConfigError, match="system.c"):
            get_system("thermo").build(dict(demo["system"], c=[1.0]), demo["solution"])
        with pytest.raises(ConfigError, match="solution.param_box"):
            get_system("thermo").build(demo["system"], dict(demo["solution"], param_box=[[0.0, 1.0]]))


class TestOscillator:
    def _spec(self, alpha: float, params: list[list[float]]) -> OscillatorSpec:
        return OscillatorSpec(alpha, Box.from_pairs([[0.5, 1.0]]), Box.from_pairs(params), Box.from_pairs([[0.2, 1.5], [-1.5, 1.5]]))

    @pytest.mark.parametrize("alpha,params,l1", [(2.5, [[3.25, 4.0], [-0.5, 0.5]], 3.5), (0.5, [[0.95, 1.2], [-0.5, 0.5]], 1.0)])
    def test_branch_solves_the_relation(self, alpha: float, params: list[list[float]], l1: float) -> None:
        spec = self._spec(alpha, params)
        for q in (0.5, 0.75, 1.0):
            phi = spec.phi(q, l1)
            assert phi < 0.0
            assert spec.relation(phi, q) == pytest.approx(math.log(l1), abs=1e-10)

    @pytest.mark.parametrize("alpha,params,l1", [(2.5, [[3.25, 4.0], [-0.5, 0.5]], 3.5), (0.5, [[0.95, 1.2], [-0.5, 0.5]], 1.0)])
    def test_flow_integral_matches_antiderivative(self, alpha: float, params: list[list[float]], l1: float) -> None:
        spec = self._spec(alpha, params)
        oracle = OscillatorOracle(spec)
        assert float(spec.flow_integral(0.6, l1)) == pytest.approx(oracle.flow_integral(0.6, l1), abs=1e-9)

    def test_energy_on_the_solution(self) -> None:
        demo = get_system("damped_oscillator").demo()
        model = get_system("damped_oscillator").build(demo["system"], demo["solution"])
        point = model.solution.point_at([0.7], [1.0, 0.2])
        assert float(model.system.H(point.tolist())) == pytest.approx(model.oracle.energy(0.7, 1.0, 0.2), abs=1e-9)
        assert model.details["regime"] == "complex"

    def test_regimes_and_validation(self) -> None:
        assert self._spec(2.5, [[3.25, 4.0], [-0.5, 0.5]]).regime == "real"
        assert self._spec(2.5, [[3.25, 4.0], [-0.5, 0.5]]).roots == pytest.approx((-0.5, -2.0))
        with pytest.raises(ValueError):
            self._spec(0.0, [[1.0, 2.0], [-0.5, 0.5]])
        with pytest.raises(ConfigError, match="system"):
            get_system("damped_oscillator").build({"alpha": 1.0, "branch": "middle"}, {"base_box": [[0.5, 1.0]], "param_box": [[1.0, 2.0], [0.0, 1.0]]})


class TestLiouville:
    def test_unit_sphere_gives_the_hopf_flow(self) -> None:
        spec = LiouvilleCheckSpec(1)
        points = sample_level_set(spec, np.random.default_rng(42), 20)
        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0, atol=1e-10)
        report = liouville_restriction_check(spec, points)
        assert report.passed, report.failures
        assert report.reeb_alignment is not None
        assert report.reeb_alignment < 1e-9

    def test_non_liouville_field_is_reported(self) -> None:
        spec = LiouvilleCheckSpec(1, delta=("q1", "q2", "p1", "p2"))
        points = sample_level_set(spec, np.random.default_rng(0), 5)
        report = liouville_restriction_check(spec, points)
        assert not report.passed
        assert any(f.startswith("max_liouville") for f in report.failures)
        assert report.max_rhx < 1e-9
        assert report.reeb_alignment is None


class TestRaw:
    def test_missing_hamiltonian(self) -> None:
        with pytest.raises(ConfigError, match="system.H required"):
            get_system("raw").build({"n": 1}, {})

    def test_bad_expressions(self) -> None:
        with pytest.raises(ConfigError, match="system.H"):
            get_system("raw").build({"n": 1, "H": "y1 + w"}, {})
        with pytest.raises(ConfigError, match="system.g"):
            get_system("raw").build({"n": 1, "H": "y1", "g": "exp("}, {})

    def test_raw_one_form_is_rejected(self) -> None:
        with pytest.raises(ConfigError, match="system.form"):
            get_system("raw").build({"n": 1, "H": "y1", "form": ["y1", "0", "1"]}, {})

    def test_parameter_names_must_not_clash(self) -> None:
        solution = {"fibration": "x", "components": ["z", "y1"], "params": ["z", "l1"], "base_box": [[0, 1]], "param_box": [[0, 1], [0, 1]]}
        with pytest.raises(ConfigError, match="solution.params"):
            get_system("raw").build({"n": 1, "H": "y1"}, solution)

    def test_bare_system_and_custom_names(self) -> None:
        model = get_system("raw").build({"n": 1, "H": "p^2/2 - s", "names": ["q", "p", "s"], "g": "exp(q)"}, {})
        assert model.solution is None
        assert model.system.chart.names == ("q", "p", "s")
        assert model.conformal is not None
        assert float(model.system.H([0.0, 2.0, 1.0])) == pytest.approx(1.0)
