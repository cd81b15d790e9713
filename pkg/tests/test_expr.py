from __future__ import annotations

import tests._path_setup  # noqa: F401

import math
import unittest

import pytest

from contact_hj.errors import DomainError, ExprSyntaxError, UnboundVariableError, UnknownIdentifierError
from contact_hj.expr import (
    Dual,
    FunctionField,
    Var,
    derivative,
    exp,
    grad,
    jacobian,
    jvp,
    log,
    new_tag,
    parse,
    primal,
    product,
    real_part,
    reciprocal,
    tangent,
)


class ParserTest(unittest.TestCase):
    def test_precedence_and_right_associative_power(self) -> None:
        e = parse("1 + 2*x^2^1 - -x", ["x"])
        self.assertAlmostEqual(e.evaluate({"x": 3.0}), 1 + 2 * 9 + 3)
        self.assertEqual(parse("2^3^2", []).evaluate({}), 2.0**9)

    def test_unary_minus_binds_looser_than_power(self) -> None:
        self.assertEqual(parse("-x^2", ["x"]).evaluate({"x": 2.0}), -4.0)

    def test_functions_and_scientific_numbers(self) -> None:
        e = parse("exp(log(x)) + sin(0)*cos(0) + sqrt(4) + 1.5e-1", ["x"])
        self.assertAlmostEqual(e.evaluate({"x": 2.0}), 2.0 + 2.0 + 0.15)

    def test_unknown_identifier_reports_offset(self) -> None:
        with self.assertRaises(UnknownIdentifierError) as ctx:
            parse("x + w", ["x"])
        self.assertEqual(ctx.exception.name, "w")
        self.assertEqual(ctx.exception.offset, 4)

    def test_syntax_errors(self) -> None:
        for text in ("x +", "(x", "x )", "x $ 1", ""):
            with self.subTest(text=text), self.assertRaises(ExprSyntaxError):
                parse(text, ["x"])

    def test_function_name_without_call_is_unknown(self) -> None:
        with self.assertRaises(UnknownIdentifierError):
            parse("exp + 1", ["x"])

    def test_unbound_variable(self) -> None:
        with self.assertRaises(UnboundVariableError):
            parse("x*y", ["x", "y"]).evaluate({"x": 1.0})

    def test_free_vars(self) -> None:
        self.assertEqual(parse("x*exp(y) + 2", ["x", "y", "z"]).free_vars(), frozenset({"x", "y"}))


class DomainTest(unittest.TestCase):
    def test_log_of_non_positive(self) -> None:
        with self.assertRaises(DomainError):
            parse("log(x)", ["x"]).evaluate({"x": 0.0})

    def test_division_by_zero(self) -> None:
        with self.assertRaises(DomainError):
            parse("1/x", ["x"]).evaluate({"x": 0.0})

    def test_fractional_power_of_negative_base(self) -> None:
        with self.assertRaises(DomainError):
            parse("x^0.5", ["x"]).evaluate({"x": -1.0})
        self.assertEqual(parse("x^3", ["x"]).evaluate({"x": -2.0}), -8.0)

    def test_domain_error_is_arithmetic(self) -> None:
        self.assertTrue(issubclass(DomainError, ArithmeticError))


class TestDual:
    def test_derivative_of_composite(self) -> None:
        f = parse("exp(x)*sin(x) + x^3", ["x"])
        x = 0.7
        d = derivative(lambda v: f.evaluate({"x": v}), x)
        expected = math.exp(x) * (math.sin(x) + math.cos(x)) + 3 * x * x
        assert d == pytest.approx(expected, rel=1e-14)

    def test_nested_tags_give_second_derivative(self) -> None:
        def f(v):
            return v * v * v

        second = derivative(lambda x: derivative(f, x), 2.0)
        assert second == pytest.approx(12.0)

    def test_perturbation_confusion_is_avoided(self) -> None:
        # d/dx [x * d/dy (x + y)] = 1
        outer = derivative(lambda x: x * derivative(lambda y: x + y, 1.0), 1.0)
        assert outer == pytest.approx(1.0)

    def test_tangent_and_real_part(self) -> None:
        tag = new_tag()
        y = Dual(2.0, 3.0, tag)
        assert tangent(y, tag) == 3.0
        assert real_part(y, tag) == 2.0
        assert tangent(5.0, tag) == 0.0
        assert primal(Dual(Dual(1.5, 1.0, tag), 0.0, tag + 1)) == 1.5

    def test_jvp_and_jacobian(self) -> None:
        def fn(v):
            return [v[0] * v[1], exp(v[0])]

        value, direction = jvp(fn, [1.0, 2.0], [1.0, 0.0])
        assert value == [2.0, pytest.approx(math.e)]
        assert direction == [2.0, pytest.approx(math.e)]
        jac = jacobian(fn, [1.0, 2.0])
        assert jac[0] == [2.0, 1.0]
        assert jac[1][1] == 0.0

    def test_log_derivative(self) -> None:
        assert derivative(log, 4.0) == pytest.approx(0.25)

    def test_comparisons_use_primal(self) -> None:
        tag = new_tag()
        assert Dual(1.0, 5.0, tag) < 2.0
        assert abs(Dual(-1.0, 2.0, tag)).eps == -2.0


class TestFields:
    def test_grad_over_binding(self) -> None:
        e = parse("x^2*y + z", ["x", "y", "z"])
        g = grad(e, ["x", "y", "z"], {"x": 2.0, "y": 3.0, "z": 1.0})
        assert g == [12.0, 4.0, 1.0]

    def test_grad_rejects_unbound_variables(self) -> None:
        e = parse("x*y", ["x", "y"])
        with pytest.raises(UnboundVariableError, match="y"):
            grad(e, ["x", "y"], {"x": 2.0})

    def test_operator_overloading_builds_trees(self) -> None:
        h = parse("x + 1", ["x"])
        g = 1 / h
        assert g.evaluate({"x": 1.0}) == 0.5
        assert (2 * Var("x") - 1).evaluate({"x": 3.0}) == 5.0
        assert (-Var("x")).evaluate({"x": 3.0}) == -3.0

    def test_product_and_reciprocal_on_function_fields(self) -> None:
        field = FunctionField(lambda b: b["x"] * 2.0, "2x", frozenset({"x"}))
        h = parse("x + 1", ["x"])
        assert product(field, h).evaluate({"x": 2.0}) == 12.0
        assert reciprocal(field).evaluate({"x": 2.0}) == 0.25
        assert str(reciprocal(field)) == "1/(2x)"
        assert reciprocal(h).evaluate({"x": 3.0}) == 0.25
