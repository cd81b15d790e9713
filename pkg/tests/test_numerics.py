from __future__ import annotations

import tests._path_setup  # noqa: F401

import math
import unittest

import numpy as np
import pytest
from numpy.testing import assert_allclose

from contact_hj.errors import ConvergenceError, QuadratureError, SingularSystemError
from contact_hj.expr import Dual, derivative, exp, new_tag, tangent
from contact_hj.numerics import (
    bordered,
    bracketed_root,
    curl,
    gauss_newton,
    integrate,
    matrix_rank,
    newton_scalar,
    newton_system,
    null_space,
    pfaffian,
    solve_pivoted,
)


class LinalgTest(unittest.TestCase):
    def test_solve_pivoted_matches_numpy(self) -> None:
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 5)) + 5 * np.eye(5)
        b = rng.normal(size=5)
        assert_allclose(solve_pivoted(a, b), np.linalg.solve(a, b), rtol=1e-12)

    def test_solve_pivoted_needs_pivoting(self) -> None:
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(solve_pivoted(a, np.array([2.0, 3.0])), [3.0, 2.0])

    def test_singular_system_raises(self) -> None:
        with self.assertRaises(SingularSystemError):
            solve_pivoted(np.array([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0]))

    def test_rank_and_null_space(self) -> None:
        a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0]])
        self.assertEqual(matrix_rank(a), 2)
        kernel = null_space(a)
        self.assertEqual(kernel.shape, (3, 1))
        assert_allclose(a @ kernel, 0.0, atol=1e-12)
        self.assertEqual(null_space(np.zeros((1, 3))).shape, (3, 3))

    def test_pfaffian_squares_to_determinant(self) -> None:
        rng = np.random.default_rng(3)
        m = rng.normal(size=(6, 6))
        a = m - m.T
        det = float(np.linalg.det(a))
        self.assertLess(abs(pfaffian(a) ** 2 - det), 1e-10 * max(1.0, abs(det)))
        self.assertEqual(pfaffian(np.zeros((3, 3))), 0.0)
        self.assertEqual(pfaffian(np.array([[0.0, 2.5], [-2.5, 0.0]])), 2.5)

    def test_curl_and_bordered(self) -> None:
        jac = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert_allclose(curl(jac), [[0.0, -1.0], [1.0, 0.0]])
        m = bordered(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([2.0, 3.0]))
        assert_allclose(m, [[0.0, -1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])


class TestQuadrature:
    def test_polynomial_is_exact(self) -> None:
        assert integrate(lambda x: x**3 - 2 * x, 0.0, 2.0) == pytest.approx(0.0, abs=1e-13)

    def test_smooth_integrand(self) -> None:
        assert integrate(math.exp, 0.0, 1.0, tol=1e-12) == pytest.approx(math.e - 1.0, abs=1e-11)

    def test_reversed_and_empty_intervals(self) -> None:
        assert integrate(math.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), abs=1e-10)
        assert integrate(math.cos, 0.5, 0.5) == 0.0

    def test_vector_integrand(self) -> None:
        value = integrate(lambda x: np.array([1.0, x, x * x]), 0.0, 3.0)
        assert_allclose(value, [3.0, 4.5, 9.0], rtol=1e-12)

    def test_dual_parameter_differentiates_under_the_integral(self) -> None:
        # d/dc int_0^1 exp(c x) dx at c = 1 is int_0^1 x e^x dx = 1
        d = derivative(lambda c: integrate(lambda x: exp(c * x), 0.0, 1.0, tol=1e-12), 1.0)
        assert d == pytest.approx(1.0, abs=1e-10)

    def test_dual_endpoint(self) -> None:
        tag = new_tag()
        value = integrate(lambda x: x * x, 0.0, Dual(2.0, 1.0, tag))
        assert tangent(value, tag) == pytest.approx(4.0, abs=1e-12)

    def test_interval_budget(self) -> None:
        with pytest.raises(QuadratureError):
            integrate(lambda x: math.sin(1.0 / x), 1e-6, 1.0, tol=1e-14, max_intervals=64)

    def test_interior_singularity_is_not_accepted(self) -> None:
        # 1/sqrt|x - c| stays unresolved down to the width floor
        with pytest.raises(QuadratureError, match="not resolved|no convergence"):
            integrate(lambda x: 1.0 / math.sqrt(abs(x - 1.0 / 3.0)), 0.0, 1.0)


class TestSolvers:
    def test_newton_scalar(self) -> None:
        root = newton_scalar(lambda x: x * x - 2.0, lambda x: 2.0 * x, 1.0)
        assert root == pytest.approx(math.sqrt(2.0), rel=1e-13)

    def test_newton_scalar_zero_slope(self) -> None:
        with pytest.raises(ConvergenceError):
            newton_scalar(lambda x: x * x + 1.0, lambda x: 2.0 * x, 0.0)

    def test_newton_system(self) -> None:
        def fn(v: np.ndarray) -> np.ndarray:
            return np.array([v[0] ** 2 + v[1] ** 2 - 1.0, v[0] - v[1]])

        def jac(v: np.ndarray) -> np.ndarray:
            return np.array([[2 * v[0], 2 * v[1]], [1.0, -1.0]])

        root = newton_system(fn, jac, np.array([1.0, 0.5]))
        assert_allclose(root, [math.sqrt(0.5)] * 2, rtol=1e-12)

    def test_bracketed_root(self) -> None:
        root = bracketed_root(math.cos, lambda x: -math.sin(x), 0.0, 3.0)
        assert root == pytest.approx(math.pi / 2, abs=1e-12)
        with pytest.raises(ConvergenceError):
            bracketed_root(math.cos, lambda x: -math.sin(x), 0.0, 1.0)

    def test_gauss_newton_consistent_overdetermined(self) -> None:
        def fn(v: np.ndarray) -> np.ndarray:
            return np.array([v[0] - 1.0, v[1] + 2.0, v[0] + v[1] + 1.0])

        result = gauss_newton(fn, lambda v: np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), np.zeros(2))
        assert_allclose(result.x, [1.0, -2.0], atol=1e-12)
        assert result.residual < 1e-9

    def test_gauss_newton_inconsistent_raises(self) -> None:
        def fn(v: np.ndarray) -> np.ndarray:
            return np.array([v[0] - 1.0, v[0] + 1.0])

        with pytest.raises(ConvergenceError):
            gauss_newton(fn, lambda v: np.array([[1.0], [1.0]]), np.zeros(1))
