from fractions import Fraction

import numpy as np
import pytest

from src.orbibundle.core.expr import (
    ONE,
    ZERO,
    Const,
    add,
    as_expr,
    call,
    compose,
    cos,
    differentiate,
    div,
    evaluate,
    exp,
    mul,
    neg,
    parse,
    parse_number,
    power,
    sin,
    sub,
    substitute,
    to_text,
    var,
    variables,
)
from src.orbibundle.errors import (
    EvaluationDomainError,
    ExprSyntaxError,
    NonIntegerExponentError,
    UnknownIdentifierError,
)


def _random_expression(rng, depth: int):
    """Expresión aleatoria acotada en [-1, 1]^3: sin divisiones por valores pequeños"""
    if depth == 0:
        if rng.random() < 0.6:
            return var(int(rng.integers(1, 4)))
        return Const(Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 4))))
    choice = rng.integers(7)
    a = _random_expression(rng, depth - 1)
    if choice == 0:
        return add(a, _random_expression(rng, depth - 1))
    if choice == 1:
        return mul(a, _random_expression(rng, depth - 1))
    if choice == 2:
        return div(a, add(Const(Fraction(2)), power(_random_expression(rng, depth - 1), 2)))
    if choice == 3:
        return sin(a)
    if choice == 4:
        return cos(a)
    if choice == 5:
        return exp(sin(a))
    return power(a, int(rng.integers(2, 4)))


def _random_tree(rng, depth: int):
    """Árbol aleatorio de profundidad <= depth con todos los operadores de la gramática"""
    if depth == 0 or rng.random() < 0.15:
        if rng.random() < 0.6:
            return var(int(rng.integers(1, 5)))
        return Const(Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 5))))
    choice = rng.integers(9)
    a = _random_tree(rng, depth - 1)
    if choice < 4:
        b = _random_tree(rng, depth - 1)
        return (add, sub, mul, div)[choice](a, b)
    if choice == 4:
        return neg(a)
    if choice == 5:
        # una base constante plegaría a racionales enormes
        base = a if not isinstance(a, Const) else var(1)
        return power(base, int(rng.integers(2, 4)))
    return call(("sin", "cos", "exp")[choice - 6], a)


class TestParse:
    """Tests para el analizador de expresiones"""

    def test_parse_and_evaluate(self):
        """Analiza una expresión con funciones, potencias y racionales"""
        e = parse("sin(x1)^2 + 1/2*x2 - exp(x1*x2)")
        point = np.array([0.3, -0.7])
        expected = np.sin(0.3) ** 2 + 0.5 * (-0.7) - np.exp(0.3 * -0.7)
        assert evaluate(e, point) == pytest.approx(expected, abs=1e-15)

    def test_rational_literals_are_exact(self):
        assert parse("3/4") == Const(Fraction(3, 4))
        assert parse_number("3/4") == Fraction(3, 4)
        assert parse_number(2) == Fraction(2)

    def test_printer_reparses_to_the_same_value(self, rng):
        """parse(to_text(e)) evalúa igual que e"""
        for _ in range(30):
            e = _random_expression(rng, 3)
            again = parse(to_text(e))
            points = rng.uniform(-1, 1, (3, 5))
            assert np.allclose(evaluate(again, points), evaluate(e, points), rtol=0, atol=1e-12)

    def test_printer_is_a_fixed_point_of_parse(self):
        """to_text(parse(to_text(e))) == to_text(e) en 1000 árboles de profundidad <= 8"""
        rng = np.random.default_rng(20240611)
        for _ in range(1000):
            text = to_text(_random_tree(rng, int(rng.integers(0, 9))))
            assert to_text(parse(text)) == text

    def test_syntax_error_carries_byte_offset(self):
        with pytest.raises(ExprSyntaxError) as info:
            parse("x1 +* 2")
        assert info.value.offset == 4

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as info:
            parse("sin(x1) + foo")
        assert info.value.offset == 10

    def test_unknown_function(self):
        with pytest.raises(UnknownIdentifierError):
            parse("tan(x1)")

    def test_non_integer_exponent(self):
        with pytest.raises(NonIntegerExponentError) as info:
            parse("x1^2.5")
        assert info.value.offset == 3

    def test_unexpected_character(self):
        with pytest.raises(ExprSyntaxError) as info:
            parse("x1 + ñ")
        assert info.value.offset == 5

    def test_variables(self):
        assert variables(parse("x1*x3 + sin(x3)")) == frozenset({1, 3})


class TestSimplification:
    """Tests para el plegado de constantes en los constructores"""

    def test_constant_folding(self):
        assert add(Const(Fraction(1)), Const(Fraction(2))) == Const(Fraction(3))
        assert mul(ZERO, var(1)) == ZERO
        assert mul(ONE, var(2)) == var(2)

    def test_opposites_cancel(self):
        assert add(var(1), neg(var(1))) == ZERO
        assert add(neg(var(2)), var(2)) == ZERO

    def test_substitute_and_compose(self):
        e = parse("x1*x2 + x2")
        assert evaluate(substitute(e, {1: 2}), np.array([0.0, 3.0])) == pytest.approx(9.0)
        composed = compose(e, [var(2), var(1)])
        assert evaluate(composed, np.array([3.0, 2.0])) == pytest.approx(9.0)

    def test_as_expr_rejects_booleans(self):
        with pytest.raises(TypeError):
            as_expr(True)


class TestDifferentiate:
    """Tests para la derivada simbólica"""

    def test_known_derivatives(self):
        e = parse("x1^3 + sin(x1*x2)")
        d1 = differentiate(e, 1)
        point = np.array([0.4, 1.3])
        assert evaluate(d1, point) == pytest.approx(3 * 0.4**2 + 1.3 * np.cos(0.4 * 1.3))
        assert differentiate(parse("x2^2"), 1) == ZERO

    def test_against_central_differences(self, rng):
        """Derivadas simbólicas frente a diferencias centrales en 100 expresiones aleatorias"""
        h = 1e-5
        for _ in range(100):
            e = _random_expression(rng, 3)
            point = rng.uniform(-1, 1, 3)
            for j in range(1, 4):
                step = np.zeros(3)
                step[j - 1] = h
                numeric = (evaluate(e, point + step) - evaluate(e, point - step)) / (2 * h)
                symbolic = evaluate(differentiate(e, j), point)
                assert abs(symbolic - numeric) <= 1e-5 * max(1.0, abs(symbolic))


class TestEvaluate:
    """Tests para la evaluación numérica"""

    def test_vectorized_evaluation(self):
        points = np.array([[1.0, 2.0, 3.0], [0.0, 1.0, 2.0]])
        values = evaluate(parse("x1 + x2"), points)
        assert values.shape == (3,)
        assert np.allclose(values, [1.0, 3.0, 5.0])

    def test_constant_broadcasts(self):
        assert np.allclose(evaluate(ONE, np.zeros((2, 4))), np.ones(4))

    def test_division_by_zero(self):
        with pytest.raises(EvaluationDomainError):
            evaluate(parse("1/x1"), np.array([0.0]))

    def test_square_root_of_negative(self):
        with pytest.raises(EvaluationDomainError):
            evaluate(parse("sqrt(x1)"), np.array([-1.0]))

    def test_variable_beyond_dimension(self):
        with pytest.raises(EvaluationDomainError):
            evaluate(parse("x3"), np.array([1.0, 2.0]))
