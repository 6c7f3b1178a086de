"""
Lenguaje de expresiones para funciones suaves sobre las coordenadas de una carta.

Los árboles son inmutables: constantes exactas (Fraction) o decimales, variables
x1, x2, ..., operaciones binarias, potencias enteras y las funciones
sin, cos, exp y sqrt. La evaluación es en coma flotante de 64 bits y está
vectorizada con numpy (una columna por punto).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, FrozenSet, Mapping, Sequence, Union

import numpy as np
from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedInput, VisitError

from src.orbibundle.errors import (
    EvaluationDomainError,
    ExprSyntaxError,
    NonIntegerExponentError,
    OrbiError,
    UnknownIdentifierError,
)

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")

_VARIABLE = re.compile(r"x([0-9]+)$")


class Expr:
    """Nodo base de las expresiones; los operadores construyen con plegado de constantes"""

    __slots__ = ()

    def __add__(self, other: Any) -> "Expr":
        return add(self, as_expr(other))

    def __radd__(self, other: Any) -> "Expr":
        return add(as_expr(other), self)

    def __sub__(self, other: Any) -> "Expr":
        return sub(self, as_expr(other))

    def __rsub__(self, other: Any) -> "Expr":
        return sub(as_expr(other), self)

    def __mul__(self, other: Any) -> "Expr":
        return mul(self, as_expr(other))

    def __rmul__(self, other: Any) -> "Expr":
        return mul(as_expr(other), self)

    def __truediv__(self, other: Any) -> "Expr":
        return div(self, as_expr(other))

    def __rtruediv__(self, other: Any) -> "Expr":
        return div(as_expr(other), self)

    def __neg__(self) -> "Expr":
        return neg(self)

    def __pow__(self, exponent: int) -> "Expr":
        if not isinstance(exponent, int):
            raise NonIntegerExponentError("exponente no entero", 0)
        return power(self, exponent)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Expr):
    value: Number


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    name: str
    arg: Expr


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_expr(value: Any) -> Expr:
    """Convierte números, cadenas y expresiones en Expr"""
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("un booleano no es una expresión")
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    if isinstance(value, (float, np.floating)):
        return Const(float(value))
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"No se puede convertir {type(value).__name__} en expresión")


def var(index: int) -> Var:
    if index < 1:
        raise ValueError("los índices de variable empiezan en 1")
    return Var(index)


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1


def _fold(a: Number, b: Number, fn: Callable[[Any, Any], Any]) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return fn(a, b)
    return float(fn(float(a), float(b)))


# Constructores con plegado de constantes


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold(a.value, b.value, lambda p, q: p + q))
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if isinstance(a, Neg):
        return sub(b, a.arg)
    if b == neg(a):
        return ZERO
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold(a.value, b.value, lambda p, q: p - q))
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.arg)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold(a.value, b.value, lambda p, q: p * q))
    if is_zero(a) or is_zero(b):
        return ZERO
    if is_one(a):
        return b
    if is_one(b):
        return a
    if isinstance(a, Const) and a.value == -1:
        return neg(b)
    if isinstance(b, Const) and b.value == -1:
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        # se deja simbólico: la evaluación informa del error de dominio
        return BinOp("/", a, b)
    if is_zero(a):
        return ZERO
    if is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_fold(a.value, b.value, lambda p, q: p / q))
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    if isinstance(a, BinOp) and a.op == "-":
        return BinOp("-", a.right, a.left)
    return Neg(a)


def power(base: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0 and exponent < 0:
            return Pow(base, exponent)
        if isinstance(base.value, Fraction):
            return Const(base.value**exponent)
        return Const(float(base.value) ** exponent)
    return Pow(base, exponent)


def _exact_sqrt(value: Fraction) -> Fraction | None:
    if value < 0:
        return None
    num = _isqrt_exact(value.numerator)
    den = _isqrt_exact(value.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def _isqrt_exact(n: int) -> int | None:
    import math

    root = math.isqrt(n)
    return root if root * root == n else None


def call(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownIdentifierError(f"función desconocida '{name}'", 0)
    if isinstance(arg, Const) and isinstance(arg.value, Fraction):
        if arg.value == 0:
            return ONE if name in ("cos", "exp") else ZERO
        if name == "sqrt":
            root = _exact_sqrt(arg.value)
            if root is not None:
                return Const(root)
    return Call(name, arg)


def sin(a: Any) -> Expr:
    return call("sin", as_expr(a))


def cos(a: Any) -> Expr:
    return call("cos", as_expr(a))


def exp(a: Any) -> Expr:
    return call("exp", as_expr(a))


def sqrt(a: Any) -> Expr:
    return call("sqrt", as_expr(a))


def total(terms: Sequence[Expr]) -> Expr:
    """Suma una secuencia de expresiones"""
    result: Expr = ZERO
    for term in terms:
        result = add(result, term)
    return result


# Gramática y analizador

GRAMMAR = r"""
?start: sum

?sum: product
    | sum "+" product -> add
    | sum "-" product -> sub

?product: unary
    | product "*" unary -> mul
    | product "/" unary -> div

?unary: power
    | "-" unary -> neg

?power: atom
    | atom "^" INT -> pow
    | atom "^" "-" INT -> pow_neg
    | atom "^" DECIMAL -> pow_bad
    | atom "^" RATIONAL -> pow_bad
    | atom "^" NAME -> pow_bad

?atom: RATIONAL -> number
    | DECIMAL -> number
    | INT -> number
    | NAME "(" sum ")" -> call
    | NAME -> name
    | "(" sum ")" -> paren

RATIONAL.3: /(?<!\^)[0-9]+\/[0-9]+/
DECIMAL.2: /[0-9]+\.[0-9]*([eE][+-]?[0-9]+)?|[0-9]+[eE][+-]?[0-9]+/
INT.1: /[0-9]+/
NAME: /[a-zA-Z_][a-zA-Z_0-9]*/

%import common.WS
%ignore WS
"""

_PARSER = Lark(GRAMMAR, parser="lalr", start="start")


@dataclass(frozen=True)
class _Paren:
    inner: Expr


@dataclass(frozen=True)
class _Literal:
    const: Const


def _unwrap(node: Any) -> Expr:
    if isinstance(node, _Paren):
        return node.inner
    if isinstance(node, _Literal):
        return node.const
    return node


def byte_offset(text: str, char_pos: int) -> int:
    """Convierte una posición en caracteres en una posición en bytes UTF-8"""
    return len(text[:char_pos].encode("utf-8"))


class ExprBuilder(Transformer):
    """Construye el árbol Expr a partir del árbol de lark sin simplificar"""

    def __init__(self, text: str):
        super().__init__()
        self._text = text

    def _offset(self, token: Token) -> int:
        return byte_offset(self._text, token.start_pos or 0)

    def number(self, children):
        token = children[0]
        if token.type == "RATIONAL":
            num, den = token.value.split("/")
            if int(den) == 0:
                raise ExprSyntaxError("denominador cero", self._offset(token))
            return _Literal(Const(Fraction(int(num), int(den))))
        if token.type == "DECIMAL":
            return _Literal(Const(float(token.value)))
        return _Literal(Const(Fraction(int(token.value))))

    def name(self, children):
        token = children[0]
        match = _VARIABLE.match(token.value)
        if match and int(match.group(1)) >= 1:
            return Var(int(match.group(1)))
        raise UnknownIdentifierError(
            f"identificador desconocido '{token.value}'", self._offset(token)
        )

    def call(self, children):
        token, arg = children
        if token.value not in FUNCTIONS:
            raise UnknownIdentifierError(
                f"función desconocida '{token.value}'", self._offset(token)
            )
        return Call(token.value, _unwrap(arg))

    def paren(self, children):
        return _Paren(_unwrap(children[0]))

    def neg(self, children):
        child = children[0]
        if isinstance(child, _Literal):
            return Const(-child.const.value)
        return Neg(_unwrap(child))

    def pow(self, children):
        base, token = children
        return Pow(_unwrap(base), int(token.value))

    def pow_neg(self, children):
        base, token = children
        return Pow(_unwrap(base), -int(token.value))

    def pow_bad(self, children):
        token = children[1]
        raise NonIntegerExponentError(
            f"exponente no entero '{token.value}'", self._offset(token)
        )

    def _binary(self, op: str, children) -> Expr:
        return BinOp(op, _unwrap(children[0]), _unwrap(children[1]))

    def add(self, children):
        return self._binary("+", children)

    def sub(self, children):
        return self._binary("-", children)

    def mul(self, children):
        return self._binary("*", children)

    def div(self, children):
        return self._binary("/", children)


def parse_tree(text: str):
    """Analiza el texto y devuelve el árbol de lark, o ExprSyntaxError con la posición"""
    try:
        return _PARSER.parse(text)
    except UnexpectedInput as exc:
        pos = getattr(exc, "pos_in_stream", None)
        if pos is None or pos < 0:
            pos = len(text)
        raise ExprSyntaxError(
            f"error de sintaxis en '{text}'", byte_offset(text, pos)
        ) from None


def transform(tree, builder: Transformer) -> Any:
    """Aplica un transformador propagando nuestros errores sin envolver"""
    try:
        return builder.transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, OrbiError):
            raise exc.orig_exc from None
        raise


def parse(text: str) -> Expr:
    """
    Analiza una expresión de la gramática.

    Args:
        text: Texto en la gramática (x1, x2, ..., sin, cos, exp, sqrt, ^ entero)

    Returns:
        Expr: el árbol, sin simplificar
    """
    tree = parse_tree(text)
    return _unwrap(transform(tree, ExprBuilder(text)))


def parse_number(value: Any) -> Number:
    """Lee un número de documento: entero, decimal, "a/b" o expresión constante"""
    if isinstance(value, bool):
        raise TypeError("un booleano no es un número")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return value
    expression = as_expr(value)
    folded = fold_constants(expression)
    if isinstance(folded, Const):
        return folded.value
    if variables(expression):
        raise EvaluationDomainError(f"'{value}' no es una constante")
    return float(evaluate(expression, np.zeros(0)))


# Impresión

_PREC_SUM, _PREC_PRODUCT, _PREC_UNARY, _PREC_POWER, _PREC_ATOM = 1, 2, 3, 4, 5


def _const_text(value: Number) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return repr(float(value))


def _precedence(e: Expr) -> int:
    if isinstance(e, Const):
        text = _const_text(e.value)
        if text.startswith("-"):
            return _PREC_UNARY
        if isinstance(e.value, Fraction) and e.value.denominator != 1:
            return _PREC_PRODUCT
        return _PREC_ATOM
    if isinstance(e, BinOp):
        return _PREC_SUM if e.op in "+-" else _PREC_PRODUCT
    if isinstance(e, Neg):
        return _PREC_UNARY
    if isinstance(e, Pow):
        return _PREC_POWER
    return _PREC_ATOM


def _wrap(e: Expr, minimum: int) -> str:
    text = to_text(e)
    return text if _precedence(e) >= minimum else f"({text})"


def to_text(e: Expr) -> str:
    """Imprime la expresión en la gramática; parse(to_text(e)) reproduce el texto"""
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, BinOp):
        level = _PREC_SUM if e.op in "+-" else _PREC_PRODUCT
        return f"{_wrap(e.left, level)} {e.op} {_wrap(e.right, level + 1)}"
    if isinstance(e, Neg):
        if isinstance(e.arg, Const) and not _const_text(e.arg.value).startswith("-"):
            return f"-({to_text(e.arg)})"
        return f"-{_wrap(e.arg, _PREC_UNARY)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.name}({to_text(e.arg)})"
    raise TypeError(f"nodo desconocido {type(e).__name__}")


# Recorridos


def _memoized(fn: Callable[[Expr, Callable[[Expr], Any]], Any]) -> Callable[[Expr], Any]:
    cache: Dict[int, Any] = {}
    keep: list = []

    def visit(e: Expr) -> Any:
        key = id(e)
        if key not in cache:
            cache[key] = fn(e, visit)
            keep.append(e)
        return cache[key]

    return visit


def variables(e: Expr) -> FrozenSet[int]:
    """Índices de las variables que aparecen en la expresión"""

    def step(node: Expr, visit) -> FrozenSet[int]:
        if isinstance(node, Var):
            return frozenset({node.index})
        if isinstance(node, BinOp):
            return visit(node.left) | visit(node.right)
        if isinstance(node, (Neg, Call)):
            return visit(node.arg)
        if isinstance(node, Pow):
            return visit(node.base)
        return frozenset()

    return _memoized(step)(e)


def rebuild(e: Expr, leaf: Callable[[Expr], Expr]) -> Expr:
    """Reconstruye el árbol con los constructores que pliegan constantes"""

    def step(node: Expr, visit) -> Expr:
        if isinstance(node, (Const, Var)):
            return leaf(node)
        if isinstance(node, BinOp):
            left, right = visit(node.left), visit(node.right)
            return {"+": add, "-": sub, "*": mul, "/": div}[node.op](left, right)
        if isinstance(node, Neg):
            return neg(visit(node.arg))
        if isinstance(node, Pow):
            return power(visit(node.base), node.exponent)
        if isinstance(node, Call):
            return call(node.name, visit(node.arg))
        raise TypeError(f"nodo desconocido {type(node).__name__}")

    return _memoized(step)(e)


def fold_constants(e: Expr) -> Expr:
    return rebuild(e, lambda leaf: leaf)


def substitute(e: Expr, mapping: Mapping[int, Any]) -> Expr:
    """Sustituye variables por expresiones; las demás quedan intactas"""
    replacements = {index: as_expr(value) for index, value in mapping.items()}

    def leaf(node: Expr) -> Expr:
        if isinstance(node, Var) and node.index in replacements:
            return replacements[node.index]
        return node

    return rebuild(e, leaf)


def compose(e: Expr, images: Sequence[Any]) -> Expr:
    """Compone con un mapa de coordenadas: x_j se sustituye por images[j-1]"""
    return substitute(e, {j + 1: image for j, image in enumerate(images)})


def differentiate(e: Expr, j: int) -> Expr:
    """
    Derivada parcial simbólica exacta respecto de x_j.

    Args:
        e: Expresión a derivar
        j: Índice de la variable (empieza en 1)

    Returns:
        Expr: derivada, con plegado de constantes
    """

    def step(node: Expr, visit) -> Expr:
        if isinstance(node, Const):
            return ZERO
        if isinstance(node, Var):
            return ONE if node.index == j else ZERO
        if isinstance(node, BinOp):
            a, b = node.left, node.right
            da, db = visit(a), visit(b)
            if node.op == "+":
                return add(da, db)
            if node.op == "-":
                return sub(da, db)
            if node.op == "*":
                return add(mul(da, b), mul(a, db))
            return sub(div(da, b), div(mul(a, db), power(b, 2)))
        if isinstance(node, Neg):
            return neg(visit(node.arg))
        if isinstance(node, Pow):
            inner = visit(node.base)
            if is_zero(inner):
                return ZERO
            factor = mul(Const(Fraction(node.exponent)), power(node.base, node.exponent - 1))
            return mul(factor, inner)
        if isinstance(node, Call):
            inner = visit(node.arg)
            if is_zero(inner):
                return ZERO
            if node.name == "sin":
                outer = call("cos", node.arg)
            elif node.name == "cos":
                outer = neg(call("sin", node.arg))
            elif node.name == "exp":
                outer = node
            else:
                outer = div(ONE, mul(Const(Fraction(2)), node))
            return mul(outer, inner)
        raise TypeError(f"nodo desconocido {type(node).__name__}")

    return _memoized(step)(e)


def gradient(e: Expr, dim: int) -> list[Expr]:
    return [differentiate(e, j) for j in range(1, dim + 1)]


# Evaluación

_UNARY_NUMPY = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}


def evaluate(e: Expr, point: Any) -> Any:
    """
    Evalúa la expresión en uno o varios puntos.

    Args:
        e: Expresión
        point: vector de coordenadas (n,) o matriz (n, m) con un punto por columna

    Returns:
        float para un punto, ndarray (m,) para varios

    Raises:
        EvaluationDomainError: división por cero, raíz de negativo o valor no finito
    """
    coords = np.asarray(point, dtype=float)
    many = coords.ndim == 2
    count = coords.shape[1] if many else None

    def step(node: Expr, visit) -> Any:
        if isinstance(node, Const):
            return float(node.value)
        if isinstance(node, Var):
            if node.index > coords.shape[0]:
                raise EvaluationDomainError(
                    f"la variable x{node.index} excede la dimensión {coords.shape[0]}"
                )
            return coords[node.index - 1]
        if isinstance(node, BinOp):
            a, b = visit(node.left), visit(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if np.any(np.asarray(b) == 0):
                raise EvaluationDomainError(f"división por cero en '{to_text(node)}'")
            return a / b
        if isinstance(node, Neg):
            return -visit(node.arg)
        if isinstance(node, Pow):
            base = visit(node.base)
            if node.exponent < 0 and np.any(np.asarray(base) == 0):
                raise EvaluationDomainError(f"potencia negativa de cero en '{to_text(node)}'")
            return np.power(base, float(node.exponent)) if node.exponent < 0 else base**node.exponent
        if isinstance(node, Call):
            arg = visit(node.arg)
            if node.name == "sqrt" and np.any(np.asarray(arg) < 0):
                raise EvaluationDomainError(f"raíz de un negativo en '{to_text(node)}'")
            return _UNARY_NUMPY[node.name](arg)
        raise TypeError(f"nodo desconocido {type(node).__name__}")

    with np.errstate(all="ignore"):
        value = _memoized(step)(e)
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise EvaluationDomainError(f"valor no finito al evaluar '{to_text(e)}'")
    if many:
        return np.broadcast_to(value, (count,)).copy()
    return float(value)


def lambdify(e: Expr) -> Callable[[Any], Any]:
    """Devuelve una función de los puntos, útil en los nodos de cuadratura"""
    return lambda point: evaluate(e, point)
