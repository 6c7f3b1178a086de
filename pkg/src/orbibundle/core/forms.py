"""
Álgebra exterior de formas diferenciales con coeficientes Expr.

Una forma de grado k sobre una carta de dimensión n es una suma de términos
f_I dx_I con multiíndices I estrictamente crecientes (índices desde 1).
También se definen las matrices de formas (conexiones y curvaturas) y
utilidades para matrices de expresiones (transiciones).
"""

import itertools
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.orbibundle.core.expr import (
    ONE,
    ZERO,
    Const,
    Expr,
    ExprBuilder,
    add,
    as_expr,
    call,
    differentiate,
    div,
    evaluate,
    is_zero,
    mul,
    neg,
    parse_tree,
    power,
    substitute,
    to_text,
    transform,
)
from src.orbibundle.errors import ExprSyntaxError, UnknownIdentifierError

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
ExprMatrix = Tuple[Tuple[Expr, ...], ...]

_DIFFERENTIAL = re.compile(r"dx([0-9]+)$")


def permutation_sign(p: Iterable[int]) -> int:
    """Signo de la permutación p (lista de 0..n-1)"""
    p = list(p)
    s = 1
    for i in range(len(p)):
        j = i
        while p[j] != i:
            j += 1
        if j != i:
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def sorting_sign(indices: Sequence[int]) -> int:
    """Signo de la permutación que ordena una secuencia sin repetidos"""
    order = sorted(range(len(indices)), key=lambda k: indices[k])
    return permutation_sign(order)


def multi_indices(dim: int, degree: int) -> List[MultiIndex]:
    """Multiíndices crecientes de un grado dado, en orden lexicográfico"""
    if degree > dim or degree < 0:
        return []
    return list(itertools.combinations(range(1, dim + 1), degree))


@dataclass(frozen=True)
class FormExpr:
    """Forma diferencial: términos ordenados (multiíndice, coeficiente) sin ceros literales"""

    dim: int
    degree: int
    terms: Tuple[Tuple[MultiIndex, Expr], ...] = ()

    @classmethod
    def build(cls, dim: int, degree: int, mapping: Mapping[MultiIndex, Any]) -> "FormExpr":
        """
        Construye una forma validando los multiíndices.

        Args:
            dim: Dimensión de la carta
            degree: Grado de la forma
            mapping: Coeficientes por multiíndice

        Returns:
            FormExpr: vacía si degree > dim
        """
        if degree < 0:
            raise ValueError("el grado de una forma es no negativo")
        if degree > dim:
            return cls(dim, degree, ())
        terms = []
        for index, coefficient in mapping.items():
            index = tuple(index)
            if len(index) != degree:
                raise ValueError(f"multiíndice {index} de longitud distinta de {degree}")
            if any(b <= a for a, b in zip(index, index[1:])):
                raise ValueError(f"multiíndice {index} no estrictamente creciente")
            if index and (index[0] < 1 or index[-1] > dim):
                raise ValueError(f"multiíndice {index} fuera de la dimensión {dim}")
            expression = as_expr(coefficient)
            if not is_zero(expression):
                terms.append((index, expression))
        terms.sort(key=lambda term: term[0])
        return cls(dim, degree, tuple(terms))

    @property
    def coefficients(self) -> Dict[MultiIndex, Expr]:
        return dict(self.terms)

    def coefficient(self, index: MultiIndex) -> Expr:
        return self.coefficients.get(tuple(index), ZERO)

    @property
    def is_empty(self) -> bool:
        return not self.terms

    def __add__(self, other: "FormExpr") -> "FormExpr":
        return add_forms(self, other)

    def __sub__(self, other: "FormExpr") -> "FormExpr":
        return sub_forms(self, other)

    def __neg__(self) -> "FormExpr":
        return scale(self, Const(Fraction(-1)))

    def __str__(self) -> str:
        return form_to_text(self)


def zero_form(dim: int, degree: int) -> FormExpr:
    return FormExpr(dim, degree, ())


def scalar_form(dim: int, value: Any) -> FormExpr:
    """Forma de grado 0 con la función dada"""
    return FormExpr.build(dim, 0, {(): value})


def differential(dim: int, j: int) -> FormExpr:
    """La 1-forma dx_j"""
    return FormExpr.build(dim, 1, {(j,): ONE})


def scalar_part(form: FormExpr) -> Expr:
    """Coeficiente de una forma de grado 0"""
    if form.degree != 0:
        raise ValueError(f"se esperaba una forma de grado 0 y llegó grado {form.degree}")
    return form.coefficient(())


def _check_dims(a: FormExpr, b: FormExpr) -> None:
    if a.dim != b.dim:
        raise ValueError(f"formas de cartas distintas: dimensión {a.dim} y {b.dim}")


def add_forms(a: FormExpr, b: FormExpr) -> FormExpr:
    _check_dims(a, b)
    if a.is_empty and a.degree != b.degree:
        return b
    if b.is_empty and a.degree != b.degree:
        return a
    if a.degree != b.degree:
        raise ValueError(f"no se suman formas de grados {a.degree} y {b.degree}")
    merged: Dict[MultiIndex, Expr] = dict(a.terms)
    for index, coefficient in b.terms:
        merged[index] = add(merged[index], coefficient) if index in merged else coefficient
    return FormExpr.build(a.dim, a.degree, merged)


def sub_forms(a: FormExpr, b: FormExpr) -> FormExpr:
    return add_forms(a, scale(b, Const(Fraction(-1))))


def scale(a: FormExpr, factor: Any) -> FormExpr:
    """Multiplica todos los coeficientes por una función"""
    f = as_expr(factor)
    return FormExpr.build(a.dim, a.degree, {i: mul(f, c) for i, c in a.terms})


def map_coefficients(a: FormExpr, fn) -> FormExpr:
    return FormExpr.build(a.dim, a.degree, {i: fn(c) for i, c in a.terms})


def wedge(a: FormExpr, b: FormExpr) -> FormExpr:
    """
    Producto exterior; el signo sale de ordenar la concatenación de multiíndices.

    Args:
        a: Forma de grado p
        b: Forma de grado q sobre la misma carta

    Returns:
        FormExpr: forma de grado p + q (vacía si p + q > dim)
    """
    _check_dims(a, b)
    degree = a.degree + b.degree
    if degree > a.dim:
        return zero_form(a.dim, degree)
    merged: Dict[MultiIndex, Expr] = {}
    for index_a, coef_a in a.terms:
        for index_b, coef_b in b.terms:
            if set(index_a) & set(index_b):
                continue
            joined = index_a + index_b
            product = mul(coef_a, coef_b)
            if sorting_sign(joined) < 0:
                product = neg(product)
            key = tuple(sorted(joined))
            merged[key] = add(merged[key], product) if key in merged else product
    return FormExpr.build(a.dim, degree, merged)


def exterior_derivative(a: FormExpr) -> FormExpr:
    """d(f dx_I) = sum_j (df/dx_j) dx_j ^ dx_I"""
    degree = a.degree + 1
    if degree > a.dim:
        return zero_form(a.dim, degree)
    merged: Dict[MultiIndex, Expr] = {}
    for index, coefficient in a.terms:
        for j in range(1, a.dim + 1):
            if j in index:
                continue
            partial = differentiate(coefficient, j)
            if is_zero(partial):
                continue
            if sum(1 for i in index if i < j) % 2:
                partial = neg(partial)
            key = tuple(sorted(index + (j,)))
            merged[key] = add(merged[key], partial) if key in merged else partial
    return FormExpr.build(a.dim, degree, merged)


def evaluate_form(a: FormExpr, point: Any) -> Dict[MultiIndex, Any]:
    """
    Coeficientes numéricos de la forma en uno o varios puntos.

    Args:
        a: Forma
        point: (n,) o (n, m) con un punto por columna

    Returns:
        Dict con todos los multiíndices del grado (los ausentes valen 0)
    """
    coords = np.asarray(point, dtype=float)
    zero = np.zeros(coords.shape[1]) if coords.ndim == 2 else 0.0
    values: Dict[MultiIndex, Any] = {index: zero for index in multi_indices(a.dim, a.degree)}
    for index, coefficient in a.terms:
        values[index] = evaluate(coefficient, coords)
    return values


def coefficient_tensor(a: FormExpr, point: Any) -> np.ndarray:
    """Tensor antisimétrico completo (dim,)*degree de la forma en un punto"""
    values = evaluate_form(a, point)
    tensor = np.zeros((a.dim,) * a.degree)
    for index, value in values.items():
        for perm in itertools.permutations(range(a.degree)):
            tensor[tuple(index[k] - 1 for k in perm)] = permutation_sign(perm) * float(value)
    return tensor


def form_residual(a: FormExpr, points: Any) -> float:
    """Máximo valor absoluto de los coeficientes sobre los puntos"""
    if a.is_empty:
        return 0.0
    return max(float(np.max(np.abs(np.atleast_1d(v)))) for v in evaluate_form(a, points).values())


def substitute_form(a: FormExpr, mapping: Mapping[int, Any]) -> FormExpr:
    """Sustituye variables en los coeficientes, sin tocar las diferenciales"""
    return map_coefficients(a, lambda c: substitute(c, mapping))


def pullback(a: FormExpr, images: Sequence[Any], source_dim: int) -> FormExpr:
    """
    Pullback de la forma por un mapa y -> x = (images[0](y), ..., images[n-1](y)).

    Args:
        a: Forma en las coordenadas x (dim = len(images))
        images: Componentes del mapa como expresiones en y
        source_dim: Dimensión de las coordenadas y

    Returns:
        FormExpr: forma en las coordenadas y
    """
    if len(images) != a.dim:
        raise ValueError(f"el mapa tiene {len(images)} componentes y la forma dimensión {a.dim}")
    exprs = [as_expr(image) for image in images]
    mapping = {j + 1: e for j, e in enumerate(exprs)}
    d_images = [
        FormExpr.build(
            source_dim, 1, {(k,): differentiate(e, k) for k in range(1, source_dim + 1)}
        )
        for e in exprs
    ]
    result = zero_form(source_dim, a.degree)
    for index, coefficient in a.terms:
        term = scalar_form(source_dim, substitute(coefficient, mapping))
        for i in index:
            term = wedge(term, d_images[i - 1])
        result = add_forms(result, term)
    return result


def drop_differentials(a: FormExpr, keep: int, new_dim: Optional[int] = None) -> FormExpr:
    """Descarta los términos que contienen dx_j con j > keep (dv = 0)"""
    dim = keep if new_dim is None else new_dim
    kept = {i: c for i, c in a.terms if all(j <= keep for j in i)}
    return FormExpr.build(dim, a.degree, kept)


def form_to_text(a: FormExpr) -> str:
    """Imprime la forma como "f*dx1*dx2 + g*dx1*dx3" (el producto de diferenciales es la cuña)"""
    if a.is_empty:
        return "0"
    parts = []
    for index, coefficient in a.terms:
        differentials = "*".join(f"dx{i}" for i in index)
        if not index:
            parts.append(f"({to_text(coefficient)})")
        elif coefficient == ONE:
            parts.append(differentials)
        else:
            parts.append(f"({to_text(coefficient)})*{differentials}")
    return " + ".join(parts)


class FormBuilder(ExprBuilder):
    """Analiza formas: dxJ es una diferencial y el producto es la cuña"""

    def __init__(self, text: str, dim: int):
        super().__init__(text)
        self.dim = dim

    def _scalar(self, form: FormExpr, what: str, offset: int = 0) -> Expr:
        if form.degree != 0 and not form.is_empty:
            raise ExprSyntaxError(f"{what} necesita una función, no una forma", offset)
        return form.coefficient(()) if form.degree == 0 else ZERO

    def number(self, children):
        return scalar_form(self.dim, super().number(children).const)

    def name(self, children):
        token = children[0]
        match = _DIFFERENTIAL.match(token.value)
        if match:
            j = int(match.group(1))
            if not 1 <= j <= self.dim:
                raise UnknownIdentifierError(
                    f"diferencial '{token.value}' fuera de la dimensión {self.dim}",
                    self._offset(token),
                )
            return differential(self.dim, j)
        return scalar_form(self.dim, super().name(children))

    def call(self, children):
        token, arg = children
        checked = super().call([token, self._scalar(arg, token.value, self._offset(token))])
        return scalar_form(self.dim, call(checked.name, checked.arg))

    def paren(self, children):
        return children[0]

    def neg(self, children):
        return scale(children[0], Const(Fraction(-1)))

    def pow(self, children):
        base, token = children
        return scalar_form(self.dim, power(self._scalar(base, "^"), int(token.value)))

    def pow_neg(self, children):
        base, token = children
        return scalar_form(self.dim, power(self._scalar(base, "^"), -int(token.value)))

    def _combine(self, fn, children) -> FormExpr:
        try:
            return fn(children[0], children[1])
        except ValueError as exc:
            raise ExprSyntaxError(str(exc), 0) from None

    def add(self, children):
        return self._combine(add_forms, children)

    def sub(self, children):
        return self._combine(sub_forms, children)

    def mul(self, children):
        return wedge(children[0], children[1])

    def div(self, children):
        return scale(children[0], div(ONE, self._scalar(children[1], "/")))


def parse_form(text: str, dim: int) -> FormExpr:
    """
    Analiza una forma escrita como "f1*dx1 + f2*dx2" sobre una carta de dimensión dim.

    Args:
        text: Texto en la gramática de expresiones, con dx1, dx2, ... como diferenciales
        dim: Dimensión de la carta

    Returns:
        FormExpr
    """
    tree = parse_tree(text)
    return transform(tree, FormBuilder(text, dim))


# Matrices de formas


@dataclass(frozen=True)
class MatrixForm:
    """Matriz rectangular de formas del mismo grado y la misma carta"""

    dim: int
    degree: int
    entries: Tuple[Tuple[FormExpr, ...], ...]

    @classmethod
    def build(cls, entries: Sequence[Sequence[FormExpr]]) -> "MatrixForm":
        rows = tuple(tuple(row) for row in entries)
        if not rows or not rows[0]:
            raise ValueError("una matriz de formas necesita al menos una entrada")
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise ValueError("matriz de formas no rectangular")
        dims = {f.dim for row in rows for f in row}
        degrees = {f.degree for row in rows for f in row if not f.is_empty}
        if len(dims) != 1 or len(degrees) > 1:
            raise ValueError("las entradas deben tener la misma dimensión y el mismo grado")
        degree = degrees.pop() if degrees else rows[0][0].degree
        rows = tuple(
            tuple(f if f.degree == degree else zero_form(f.dim, degree) for f in row)
            for row in rows
        )
        return cls(dims.pop(), degree, rows)

    @classmethod
    def zeros(cls, dim: int, degree: int, rows: int, cols: Optional[int] = None) -> "MatrixForm":
        cols = rows if cols is None else cols
        return cls(dim, degree, tuple(tuple(zero_form(dim, degree) for _ in range(cols)) for _ in range(rows)))

    @classmethod
    def from_exprs(cls, dim: int, matrix: Sequence[Sequence[Any]]) -> "MatrixForm":
        """Matriz de grado 0 a partir de expresiones"""
        return cls.build([[scalar_form(dim, e) for e in row] for row in matrix])

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def __getitem__(self, key: Tuple[int, int]) -> FormExpr:
        i, j = key
        return self.entries[i][j]

    @property
    def is_zero(self) -> bool:
        return all(f.is_empty for row in self.entries for f in row)

    def map(self, fn) -> "MatrixForm":
        return MatrixForm.build([[fn(f) for f in row] for row in self.entries])

    def transpose(self) -> "MatrixForm":
        return MatrixForm(self.dim, self.degree, tuple(zip(*self.entries)))

    def __add__(self, other: "MatrixForm") -> "MatrixForm":
        return MatrixForm.build(
            [[add_forms(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)]
        )

    def __sub__(self, other: "MatrixForm") -> "MatrixForm":
        return MatrixForm.build(
            [[sub_forms(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)]
        )


def matrix_wedge(a: MatrixForm, b: MatrixForm) -> MatrixForm:
    """(A ^ B)_ij = sum_k A_ik ^ B_kj"""
    if a.cols != b.rows:
        raise ValueError(f"dimensiones incompatibles {a.rows}x{a.cols} y {b.rows}x{b.cols}")
    degree = a.degree + b.degree
    entries = []
    for i in range(a.rows):
        row = []
        for j in range(b.cols):
            total = zero_form(a.dim, degree)
            for k in range(a.cols):
                total = add_forms(total, wedge(a[i, k], b[k, j]))
            row.append(total)
        entries.append(row)
    return MatrixForm(a.dim, degree, tuple(tuple(row) for row in entries))


def matrix_d(a: MatrixForm) -> MatrixForm:
    return MatrixForm(
        a.dim, a.degree + 1, tuple(tuple(exterior_derivative(f) for f in row) for row in a.entries)
    )


def trace(a: MatrixForm) -> FormExpr:
    total = zero_form(a.dim, a.degree)
    for i in range(min(a.rows, a.cols)):
        total = add_forms(total, a[i, i])
    return total


def evaluate_matrix_form(a: MatrixForm, point: Any) -> np.ndarray:
    """Valores (rows, cols, C(dim, degree)[, m]) en los multiíndices de multi_indices()"""
    indices = multi_indices(a.dim, a.degree)
    coords = np.asarray(point, dtype=float)
    shape = (a.rows, a.cols, len(indices)) + ((coords.shape[1],) if coords.ndim == 2 else ())
    values = np.zeros(shape)
    for i in range(a.rows):
        for j in range(a.cols):
            evaluated = evaluate_form(a[i, j], coords)
            for k, index in enumerate(indices):
                values[i, j, k] = evaluated[index]
    return values


def is_symbolically_skew(a: MatrixForm) -> bool:
    """Antisimetría por oposición de entradas: A_ij + A_ji se anula símbolo a símbolo"""
    if a.rows != a.cols:
        return False
    return all(
        add_forms(a[i, j], a[j, i]).is_empty for i in range(a.rows) for j in range(i, a.cols)
    )


def skew_residual(a: MatrixForm, points: Any) -> float:
    """Máximo de |A + A^T| evaluado en los puntos"""
    if a.rows != a.cols:
        return float("inf")
    values = evaluate_matrix_form(a, points)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values + np.swapaxes(values, 0, 1))))


# Matrices de expresiones


def expr_matrix(matrix: Sequence[Sequence[Any]]) -> ExprMatrix:
    return tuple(tuple(as_expr(e) for e in row) for row in matrix)


def identity_matrix(k: int) -> ExprMatrix:
    return tuple(tuple(ONE if i == j else ZERO for j in range(k)) for i in range(k))


def constant_matrix(values: Any) -> ExprMatrix:
    """Matriz de expresiones constantes; los enteros y Fraction se mantienen exactos"""
    return tuple(tuple(as_expr(v if isinstance(v, (int, Fraction)) else float(v)) for v in row) for row in values)


def expr_matmul(a: ExprMatrix, b: ExprMatrix) -> ExprMatrix:
    inner = len(b)
    cols = len(b[0]) if b else 0
    result = []
    for row in a:
        out_row = []
        for j in range(cols):
            total: Expr = ZERO
            for k in range(inner):
                total = add(total, mul(row[k], b[k][j]))
            out_row.append(total)
        result.append(tuple(out_row))
    return tuple(result)


def expr_matvec(a: ExprMatrix, v: Sequence[Expr]) -> Tuple[Expr, ...]:
    result = []
    for row in a:
        total: Expr = ZERO
        for coefficient, component in zip(row, v):
            total = add(total, mul(coefficient, component))
        result.append(total)
    return tuple(result)


def expr_transpose(a: ExprMatrix) -> ExprMatrix:
    return tuple(zip(*a)) if a else ()


def substitute_matrix(a: ExprMatrix, mapping: Mapping[int, Any]) -> ExprMatrix:
    return tuple(tuple(substitute(e, mapping) for e in row) for row in a)


def evaluate_matrix(a: ExprMatrix, point: Any) -> np.ndarray:
    """Evalúa una matriz de expresiones: (r, c) para un punto, (r, c, m) para varios"""
    coords = np.asarray(point, dtype=float)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    shape = (rows, cols) + ((coords.shape[1],) if coords.ndim == 2 else ())
    values = np.zeros(shape)
    for i in range(rows):
        for j in range(cols):
            values[i, j] = evaluate(a[i][j], coords)
    return values


def matrix_to_text(a: ExprMatrix) -> List[List[str]]:
    return [[to_text(e) for e in row] for row in a]


def differential_of_matrix(dim: int, a: ExprMatrix) -> MatrixForm:
    """dA como matriz de 1-formas"""
    return matrix_d(MatrixForm.from_exprs(dim, a))
