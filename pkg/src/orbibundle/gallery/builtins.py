"""
Ejemplos incorporados: se generan en código, no se guardan como datos.

  s2-z3-bad   S² con Z/3 actuando trivialmente y el fibrado trivial de rango 2
              con Z/3 rotando la fibra (fibrado malo, solo admite la sección cero)
  teardrop-p  gota con punto cónico Z/p y su fibrado tangente con la métrica
              de curvatura concentrada alrededor del círculo unidad
  s2-tangent  teardrop-1, la esfera redonda
  s2-trivial  S² con el fibrado trivial de rango 2 y una sección constante
  flat-torus  una carta cuadrada con el fibrado trivial de rango 2
"""

import logging
from fractions import Fraction
from math import comb
from typing import List, Sequence, Tuple

import numpy as np

from src.orbibundle.core.atlas import Atlas, Chart, Overlap
from src.orbibundle.core.bundles import BundleCocycle, Section, make_section
from src.orbibundle.core.chernweil import (
    ConnectionData,
    PartitionOfUnity,
    flat_connection,
    trivial_partition,
)
from src.orbibundle.core.domains import Ball, Box, Shell
from src.orbibundle.core.expr import (
    ONE,
    Const,
    Expr,
    add,
    as_expr,
    div,
    mul,
    neg,
    power,
    sqrt,
    total,
    var,
)
from src.orbibundle.core.forms import FormExpr, MatrixForm, expr_matrix, identity_matrix, zero_form
from src.orbibundle.core.groups import (
    FiniteGroup,
    Representation,
    cyclic_group,
    rotation_representation,
    trivial_group,
    trivial_representation,
)
from src.orbibundle.gallery.base import Example

logger = logging.getLogger(__name__)

CAP_RADIUS = 8
SECTION_CANDIDATES = 20


# Piezas de geometría comunes


def radius_squared() -> Expr:
    """x1^2 + x2^2"""
    return add(power(var(1), 2), power(var(2), 2))


def conjugate_power(k: int) -> Tuple[Expr, Expr]:
    """
    Partes real e imaginaria de (x1 - i x2)^k.

    Args:
        k: Exponente, k >= 0

    Returns:
        Tuple[Expr, Expr]: (Re, Im) como polinomios en x1, x2
    """
    real: List[Expr] = []
    imaginary: List[Expr] = []
    for j in range(k + 1):
        monomial = mul(power(var(1), k - j), power(var(2), j))
        if j % 2 == 0:
            coefficient = comb(k, j) * (-1) ** (j // 2)
            real.append(mul(Const(Fraction(coefficient)), monomial))
        else:
            coefficient = -comb(k, j) * (-1) ** ((j - 1) // 2)
            imaginary.append(mul(Const(Fraction(coefficient)), monomial))
    return total(real), total(imaginary)


def inversion_images(p: int) -> Tuple[Expr, Expr]:
    """w = 1/u^p escrito en coordenadas reales: (Re ū^p, Im ū^p) / |u|^(2p)"""
    real, imaginary = conjugate_power(p)
    denominator = power(radius_squared(), p)
    return div(real, denominator), div(imaginary, denominator)


def angular_form(coefficient: Expr) -> FormExpr:
    """coefficient * (x1 dx2 - x2 dx1)"""
    return FormExpr.build(2, 1, {(1,): neg(mul(coefficient, var(2))), (2,): mul(coefficient, var(1))})


def rotation_connection(coefficient: Expr) -> MatrixForm:
    """omega = [[0, -a], [a, 0]] con a = coefficient * (x1 dx2 - x2 dx1)"""
    a = angular_form(coefficient)
    return MatrixForm.build([[zero_form(2, 1), -a], [a, zero_form(2, 1)]])


def _trivial_unitary(group: FiniteGroup, complex_dim: int) -> List[np.ndarray]:
    return [np.eye(complex_dim, dtype=complex) for _ in group.elements]


def _plane_action(group: FiniteGroup) -> Representation:
    """Acción trivial sobre R^2 = C con estructura compleja"""
    return trivial_representation(group, 2).with_unitary(_trivial_unitary(group, 1))


def two_cap_partition(p: int, south_id: str, north_id: str) -> PartitionOfUnity:
    """
    psi_norte = 1/(1 + s^(pk)), psi_sur = 1/(1 + s^k) con s = |x|^2.

    En el solapamiento s_sur = 1/s_norte^p y las dos funciones suman 1. El
    exponente k = 4 para p = 1 deja colas por debajo de 1e-9 en el radio 8.
    """
    k = 4 if p == 1 else 2
    s = radius_squared()
    return PartitionOfUnity(
        {
            north_id: div(ONE, add(ONE, power(s, p * k))),
            south_id: div(ONE, add(ONE, power(s, k))),
        }
    )


def two_cap_atlas(
    name: str,
    north: Chart,
    south: Chart,
    p: int = 1,
    lam: Sequence[int] = None,
) -> Atlas:
    """Dos discos identificados por w = 1/u^p en la corona p/(p+1) < |u| < (p+1)/p"""
    lam = tuple(lam) if lam is not None else tuple(0 for _ in north.group.elements)
    overlap = Overlap(
        f"{north.id}>{south.id}",
        north.id,
        south.id,
        inversion_images(p),
        lam,
        Shell(2, Fraction(p, p + 1), Fraction(p + 1, p)),
    )
    return Atlas(name, (north, south), overlaps=(overlap,))


# Gota y esfera


def teardrop_example(p: int) -> Example:
    """
    Gota con punto cónico Z/p en el centro de la carta 'cap' y su fibrado tangente.

    Las transiciones son rotaciones R(beta) con e^(i beta) = -ū^(p+1)/|u|^(p+1),
    la fase de la derivada de w = 1/u^p. La conexión tiene forma de Euler con
    integral 1 + 1/p sobre la orbifold.
    """
    name = "s2-tangent" if p == 1 else f"teardrop-{p}"
    group = cyclic_group(p) if p > 1 else trivial_group()
    cap = Chart("cap", Ball(2, CAP_RADIUS), group, rotation_representation(group, 1))
    base_group = trivial_group()
    base = Chart("base", Ball(2, CAP_RADIUS), base_group, _plane_action(base_group))
    atlas = two_cap_atlas(name, cap, base, p)

    real, imaginary = conjugate_power(p + 1)
    modulus = power(sqrt(radius_squared()), p + 1)
    cos_beta = neg(div(real, modulus))
    sin_beta = neg(div(imaginary, modulus))
    transition = expr_matrix([[cos_beta, neg(sin_beta)], [sin_beta, cos_beta]])
    bundle = BundleCocycle(
        f"T({name})",
        atlas,
        2,
        {"cap": rotation_representation(group, 1), "base": _plane_action(base_group)},
        {atlas.overlaps[0].id: transition},
    )

    s = radius_squared()
    cap_coefficient = div(
        mul(Const(Fraction(-(p + 1))), power(s, p - 1)),
        add(ONE, power(s, p)),
    )
    base_coefficient = div(Const(Fraction(-(p + 1), p)), add(ONE, s))
    connection = ConnectionData(
        "round" if p == 1 else "teardrop",
        bundle,
        {"cap": rotation_connection(cap_coefficient), "base": rotation_connection(base_coefficient)},
    )
    logger.debug("gota p=%d construida", p)
    return Example(
        name,
        "esfera redonda y su fibrado tangente" if p == 1 else f"gota Z/{p} y su fibrado tangente",
        bundle,
        connection,
        two_cap_partition(p, "base", "cap"),
        notes=(f"integral de Euler esperada {Fraction(p + 1, p)}",),
    )


def s2_tangent_example() -> Example:
    return teardrop_example(1)


# Fibrados triviales de rango 2


def _trivial_rank_two(name: str, atlas: Atlas, fiber_actions) -> BundleCocycle:
    transitions = {arrow.id: identity_matrix(2) for arrow in atlas.arrows()}
    return BundleCocycle(name, atlas, 2, fiber_actions, transitions)


def s2_z3_bad_example() -> Example:
    """
    Q = S² con Z/3 actuando trivialmente y E = Q x R^2 con Z/3 rotando la fibra.

    Todos los puntos de Q son singulares y la acción no es reducida; la única
    sección equivariante es la cero.
    """
    group = cyclic_group(3)
    north = Chart("north", Ball(2, CAP_RADIUS), group, _plane_action(group))
    south = Chart("south", Ball(2, CAP_RADIUS), group, _plane_action(group))
    atlas = two_cap_atlas("S2/Z3-trivial", north, south, 1, group.elements)
    rotation = rotation_representation(group, 1)
    bundle = _trivial_rank_two("E", atlas, {"north": rotation, "south": rotation})
    zero = make_section("zero", bundle, {"north": ("0", "0"), "south": ("0", "0")})
    return Example(
        "s2-z3-bad",
        "S² con Z/3 trivial y fibra rotada: fibrado malo",
        bundle,
        flat_connection(bundle),
        two_cap_partition(1, "south", "north"),
        (zero,),
    )


def s2_trivial_example() -> Example:
    """S² sin grupo con el fibrado trivial de rango 2 y la sección constante (1, 0)"""
    group = trivial_group()
    north = Chart("north", Ball(2, CAP_RADIUS), group, _plane_action(group))
    south = Chart("south", Ball(2, CAP_RADIUS), group, _plane_action(group))
    atlas = two_cap_atlas("S2", north, south, 1)
    fiber = _plane_action(group)
    bundle = _trivial_rank_two("S2 x R2", atlas, {"north": fiber, "south": fiber})
    constant = make_section("constant", bundle, {"north": ("1", "0"), "south": ("1", "0")})
    return Example(
        "s2-trivial",
        "S² con el fibrado trivial de rango 2 y una sección constante",
        bundle,
        flat_connection(bundle),
        two_cap_partition(1, "south", "north"),
        (constant,),
    )


def flat_torus_example() -> Example:
    """
    Toro plano dado por su dominio fundamental (0, 1)^2: una sola carta, que
    basta para integrar. Trae una sección constante y otra que gira con x1.
    """
    group = trivial_group()
    chart = Chart("square", Box((0, 0), (1, 1)), group, _plane_action(group))
    atlas = Atlas("T2", (chart,))
    bundle = _trivial_rank_two("T2 x R2", atlas, {"square": _plane_action(group)})
    constant = make_section("constant", bundle, {"square": ("1", "0")})
    turning = make_section(
        "turning", bundle, {"square": ("cos(2*3.141592653589793*x1)", "sin(2*3.141592653589793*x1)")}
    )
    return Example(
        "flat-torus",
        "toro plano con el fibrado trivial de rango 2",
        bundle,
        flat_connection(bundle),
        trivial_partition(atlas),
        (constant, turning),
    )


# Familia de secciones candidatas para el fibrado malo

_CANDIDATE_FUNCTIONS = ("0", "1", "x1", "x2", "x1*x2", "x1^2 + x2^2", "1/(1 + x1^2 + x2^2)")


def section_candidates(bundle: BundleCocycle, count: int = SECTION_CANDIDATES) -> List[Section]:
    """
    Genera `count` secciones candidatas (f, g) con f, g de una lista fija de
    funciones, iguales en todas las cartas. La primera es la sección cero.
    """
    candidates = []
    for first in _CANDIDATE_FUNCTIONS:
        for second in _CANDIDATE_FUNCTIONS:
            if len(candidates) == count:
                return candidates
            values = (as_expr(first), as_expr(second))[: bundle.rank]
            components = {chart_id: values for chart_id in bundle.base.chart_ids}
            candidates.append(Section(f"({first}, {second})", bundle, components))
    return candidates
