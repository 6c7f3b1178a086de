import numpy as np
import pytest

from src.orbibundle.core.expr import parse, var
from src.orbibundle.core.forms import (
    FormExpr,
    MatrixForm,
    differential,
    evaluate_matrix_form,
    exterior_derivative,
    form_residual,
    form_to_text,
    is_symbolically_skew,
    matrix_wedge,
    parse_form,
    pullback,
    scale,
    scalar_form,
    skew_residual,
    sub_forms,
    trace,
    wedge,
)
from src.orbibundle.errors import ExprSyntaxError


FORMS_3D = [
    "x1*x2*dx1 + sin(x3)*dx2",
    "exp(x1)*dx3 - x2^2*dx1",
    "x1*dx1*dx2 + cos(x2*x3)*dx2*dx3",
    "x3^3 + x1",
]


class TestFormAlgebra:
    """Tests para cuña y derivada exterior"""

    def test_d_squared_vanishes(self, rng):
        points = rng.uniform(-1, 1, (3, 20))
        for text in FORMS_3D:
            form = parse_form(text, 3)
            assert form_residual(exterior_derivative(exterior_derivative(form)), points) <= 1e-12

    def test_graded_commutativity(self, rng):
        """a ^ b = (-1)^(pq) b ^ a"""
        points = rng.uniform(-1, 1, (3, 20))
        forms = [parse_form(text, 3) for text in FORMS_3D]
        for a in forms:
            for b in forms:
                sign = (-1) ** (a.degree * b.degree)
                difference = sub_forms(wedge(a, b), scale(wedge(b, a), sign))
                assert form_residual(difference, points) <= 1e-12

    def test_leibniz_rule(self, rng):
        """d(a ^ b) = da ^ b + (-1)^p a ^ db"""
        points = rng.uniform(-1, 1, (3, 20))
        a = parse_form("x1*x2*dx1 + sin(x3)*dx2", 3)
        b = parse_form("exp(x1)*dx3", 3)
        left = exterior_derivative(wedge(a, b))
        right = sub_forms(wedge(exterior_derivative(a), b), wedge(a, exterior_derivative(b)))
        assert form_residual(sub_forms(left, right), points) <= 1e-12

    def test_wedge_of_one_forms_is_antisymmetric(self):
        dx1, dx2 = differential(2, 1), differential(2, 2)
        assert wedge(dx1, dx2).coefficient((1, 2)) == parse("1")
        assert wedge(dx1, dx1).is_empty

    def test_degree_above_dimension_is_empty(self):
        assert exterior_derivative(parse_form("x1*dx1*dx2", 2)).is_empty


class TestPullback:
    """Tests para el pullback por mapas de coordenadas"""

    def test_polar_area_form(self, rng):
        """(r cos t, r sin t)* dx1 ^ dx2 = r dr ^ dt"""
        area = parse_form("dx1*dx2", 2)
        polar = pullback(area, [parse("x1*cos(x2)"), parse("x1*sin(x2)")], 2)
        points = rng.uniform(0.1, 1, (2, 10))
        expected = FormExpr.build(2, 2, {(1, 2): var(1)})
        assert form_residual(sub_forms(polar, expected), points) <= 1e-12

    def test_pullback_commutes_with_d(self, rng):
        points = rng.uniform(-1, 1, (2, 10))
        form = parse_form("x1^2*x2*dx1 + exp(x2)*dx2", 2)
        images = [parse("x1 + x2^2"), parse("sin(x1)*x2")]
        left = exterior_derivative(pullback(form, images, 2))
        right = pullback(exterior_derivative(form), images, 2)
        assert form_residual(sub_forms(left, right), points) <= 1e-12


class TestFormText:
    """Tests para el analizador y la impresión de formas"""

    def test_round_trip(self, rng):
        points = rng.uniform(-1, 1, (3, 10))
        for text in FORMS_3D:
            form = parse_form(text, 3)
            again = parse_form(form_to_text(form), 3)
            assert form_residual(sub_forms(form, again), points) <= 1e-12

    def test_scalar_form(self):
        assert scalar_form(2, "x1").degree == 0

    def test_rejects_mixed_degrees(self):
        with pytest.raises(ExprSyntaxError):
            parse_form("dx1 + dx1*dx2", 2)


class TestMatrixForm:
    """Tests para las matrices de formas"""

    def test_skew_matrix(self, rng):
        a = parse_form("x1*dx2", 2)
        zero = FormExpr(2, 1, ())
        omega = MatrixForm.build([[zero, -a], [a, zero]])
        assert is_symbolically_skew(omega)
        assert skew_residual(omega, rng.uniform(-1, 1, (2, 5))) == 0.0
        assert trace(omega).is_empty

    def test_wedge_of_two_by_two_rotation_connection_vanishes(self, rng):
        a = parse_form("x1*dx2 - x2*dx1", 2)
        zero = FormExpr(2, 1, ())
        omega = MatrixForm.build([[zero, -a], [a, zero]])
        values = evaluate_matrix_form(matrix_wedge(omega, omega), rng.uniform(-1, 1, (2, 5)))
        assert np.max(np.abs(values)) <= 1e-15
