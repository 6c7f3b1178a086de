"""
Teoría de Chern-Weil sobre atlas de orbifold.

Conexiones matriciales por carta, curvatura, pfaffiano y forma de Euler,
integración con partición de la unidad (peso 1/|G| por carta), ensamblado de
clases por sectores, conexión escindida por una sección que no se anula y el
veredicto de obstrucción.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.orbibundle.config import settings
from src.orbibundle.core.atlas import Atlas, Injection, Overlap, affine_images, exact_number
from src.orbibundle.core.bundles import (
    BundleCocycle,
    Section,
    classify,
    lift_section,
    require_nonvanishing,
    total_space,
    validate_section,
    vertical_bundle,
)
from src.orbibundle.core.domains import sample_rng
from src.orbibundle.core.expr import (
    ONE,
    ZERO,
    Expr,
    as_expr,
    compose,
    div,
    evaluate,
    is_zero,
    mul,
    sqrt,
    sub,
    total,
)
from src.orbibundle.core.forms import (
    ExprMatrix,
    FormExpr,
    MatrixForm,
    add_forms,
    differential_of_matrix,
    evaluate_matrix,
    evaluate_matrix_form,
    exterior_derivative,
    form_residual,
    is_symbolically_skew,
    matrix_d,
    matrix_wedge,
    parse_form,
    pullback,
    scalar_form,
    scale,
    skew_residual,
    sub_forms,
    trace,
    wedge,
    zero_form,
)
from src.orbibundle.core.quadrature import integrate_converged
from src.orbibundle.core.report import CheckKind, Report
from src.orbibundle.core.sectors import (
    ClassComponent,
    OrbifoldClass,
    SectorAtlas,
    SectorClass,
    fiber_fixed_basis,
    iota_star,
    sector_atlas,
    sector_bundle,
    sector_census,
    sector_section,
    sector_shift,
)
from src.orbibundle.errors import (
    ConnectionDataError,
    DegreeShiftError,
    EvaluationDomainError,
    PfaffianError,
    QuadratureError,
    SectorError,
)

logger = logging.getLogger(__name__)

Arrow = Union[Injection, Overlap]

RANK_ZERO_NOTE = "forma de Euler de rango 0: constante 1 por convención"


class CharacteristicKind(Enum):
    EULER = "euler"
    PONTRYAGIN_1 = "pontryagin_1"
    CHERN_1 = "chern_1"


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """
    Conexión métrica por carta: matriz k x k de 1-formas. Las conexiones escindidas
    guardan además el marco adaptado F y la conexión en ese marco.
    """

    name: str
    bundle: BundleCocycle
    forms: Mapping[str, MatrixForm]
    metric: bool = True
    frames: Optional[Mapping[str, ExprMatrix]] = None
    adapted: Optional[Mapping[str, MatrixForm]] = None

    @property
    def rank(self) -> int:
        return self.bundle.rank

    def form(self, chart_id: str) -> MatrixForm:
        try:
            return self.forms[chart_id]
        except KeyError:
            raise ConnectionDataError(f"la conexión {self.name} no está definida en '{chart_id}'") from None


@dataclass(frozen=True, eq=False)
class CurvatureData:
    connection: ConnectionData
    forms: Mapping[str, MatrixForm]

    @property
    def rank(self) -> int:
        return self.connection.rank


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """Función psi >= 0 por carta"""

    functions: Mapping[str, Expr]

    def function(self, chart_id: str) -> Expr:
        try:
            return self.functions[chart_id]
        except KeyError:
            raise ConnectionDataError(f"la partición de la unidad no cubre '{chart_id}'") from None

    def to_dict(self) -> Dict[str, str]:
        return {cid: str(psi) for cid, psi in self.functions.items()}


def _empty_matrix(dim: int, degree: int) -> MatrixForm:
    return MatrixForm(dim, degree, ())


def flat_connection(bundle: BundleCocycle) -> ConnectionData:
    """omega = 0 en todas las cartas"""
    k = bundle.rank
    forms = {
        chart.id: MatrixForm.zeros(chart.dim, 1, k) if k else _empty_matrix(chart.dim, 1)
        for chart in bundle.base.charts
    }
    return ConnectionData("flat", bundle, forms)


def connection_from_texts(
    name: str, bundle: BundleCocycle, texts: Mapping[str, Sequence[Sequence[str]]], metric: bool = True
) -> ConnectionData:
    """Construye una conexión a partir de las entradas escritas como 1-formas"""
    forms = {}
    for chart in bundle.base.charts:
        rows = texts.get(chart.id)
        if rows is None:
            raise ConnectionDataError(f"falta la conexión de la carta '{chart.id}'")
        if not rows:
            forms[chart.id] = _empty_matrix(chart.dim, 1)
            continue
        parsed = [[parse_form(str(entry), chart.dim) for entry in row] for row in rows]
        for row in parsed:
            for form in row:
                if not form.is_empty and form.degree != 1:
                    raise ConnectionDataError(f"'{chart.id}': las entradas deben ser 1-formas")
        forms[chart.id] = MatrixForm.build(
            [[f if f.degree == 1 else zero_form(chart.dim, 1) for f in row] for row in parsed]
        )
    return ConnectionData(name, bundle, forms, metric)


def partition_from_texts(texts: Mapping[str, object]) -> PartitionOfUnity:
    return PartitionOfUnity({cid: as_expr(str(value)) for cid, value in texts.items()})


def trivial_partition(atlas: Atlas) -> PartitionOfUnity:
    return PartitionOfUnity({chart.id: ONE for chart in atlas.charts})


# Validación de conexiones


def _max_abs(values: np.ndarray) -> float:
    return float(np.max(np.abs(values), initial=0.0))


def _points_for(atlas: Atlas, arrow: Arrow) -> np.ndarray:
    if isinstance(arrow, Overlap):
        return arrow.sample_points()
    return atlas.chart(arrow.src).sample_points()


def _pullback_matrix(a: MatrixForm, images: Sequence[Expr], source_dim: int) -> MatrixForm:
    if not a.entries:
        return _empty_matrix(source_dim, a.degree)
    return MatrixForm(
        source_dim,
        a.degree,
        tuple(tuple(pullback(f, images, source_dim) for f in row) for row in a.entries),
    )


def _connection_compatibility(connection: ConnectionData, arrow: Arrow) -> float:
    """max |(phi* omega_2) g - (g omega_1 - dg)| en los puntos de muestra"""
    bundle = connection.bundle
    n = bundle.base.chart(arrow.src).dim
    points = _points_for(bundle.base, arrow)
    g_expr = bundle.transition(arrow.id)
    pulled = evaluate_matrix_form(_pullback_matrix(connection.form(arrow.dst), arrow.images, n), points)
    omega = evaluate_matrix_form(connection.form(arrow.src), points)
    g = evaluate_matrix(g_expr, points)
    dg = evaluate_matrix_form(differential_of_matrix(n, g_expr), points)
    lhs = np.einsum("ijcm,jlm->ilcm", pulled, g)
    rhs = np.einsum("ijm,jlcm->ilcm", g, omega) - dg
    return _max_abs(lhs - rhs)


def _connection_equivariance(connection: ConnectionData, chart_id: str) -> float:
    """max |h* omega - rho(h) omega rho(h)^T| sobre el grupo de la carta"""
    chart = connection.bundle.base.chart(chart_id)
    rho = connection.bundle.fiber_action(chart_id)
    omega = connection.form(chart_id)
    points = chart.sample_points()
    at_points = evaluate_matrix_form(omega, points)
    worst = 0.0
    for h in chart.group.elements:
        m = chart.action.matrix(h)
        moved = evaluate_matrix_form(omega, m @ points)
        lhs = np.einsum("ijam,ab->ijbm", moved, m)
        r = rho.matrix(h)
        rhs = np.einsum("ia,abcm,jb->ijcm", r, at_points, r)
        worst = max(worst, _max_abs(lhs - rhs))
    return worst


def validate_connection(connection: ConnectionData) -> Report:
    """
    Forma, antisimetría (si es métrica), compatibilidad con las transiciones y
    equivarianza, con tolerancia CONNECTION_TOL.

    Returns:
        Report con los residuos máximos en content
    """
    report = Report(title=f"conexión {connection.name}")
    k = connection.rank
    atlas = connection.bundle.base
    for chart in atlas.charts:
        try:
            omega = connection.form(chart.id)
        except ConnectionDataError as exc:
            report.add(CheckKind.REFERENCE, chart.id, str(exc))
            continue
        if omega.rows != k or omega.cols != k or omega.dim != chart.dim:
            report.add(CheckKind.REFERENCE, chart.id, f"se esperaba una matriz {k}x{k} en dimensión {chart.dim}")
            continue
        if connection.metric and k and not is_symbolically_skew(omega):
            residual = skew_residual(omega, chart.sample_points())
            logger.warning("%s: antisimetría de omega comprobada numéricamente (%.3e)", chart.id, residual)
            report.check(residual, settings.CONNECTION_TOL, CheckKind.SKEW_SYMMETRY, chart.id,
                         "omega no es antisimétrica")
    if not report.success or k == 0:
        return report

    residuals: Dict[str, float] = {}
    try:
        for chart in atlas.charts:
            residual = _connection_equivariance(connection, chart.id)
            residuals[chart.id] = residual
            report.check(residual, settings.CONNECTION_TOL, CheckKind.EQUIVARIANCE, chart.id,
                         "h* omega != rho omega rho^-1")
        for arrow in atlas.arrows():
            residual = _connection_compatibility(connection, arrow)
            residuals[arrow.id] = residual
            report.check(residual, settings.CONNECTION_TOL, CheckKind.COMPATIBILITY, arrow.id,
                         "phi* omega_2 g != g omega_1 - dg")
        residuals["bianchi"] = bianchi_residual(connection)
        report.check(residuals["bianchi"], settings.CONNECTION_TOL, CheckKind.COMPATIBILITY, connection.name,
                     "dOmega != Omega ^ omega - omega ^ Omega")
    except EvaluationDomainError as exc:
        report.error = f"conexión no evaluable: {exc}"
    report.content = {"residuals": residuals}
    return report


# Curvatura y formas características


def curvature(connection: ConnectionData) -> CurvatureData:
    """Omega = d omega + omega ^ omega en cada carta"""
    forms = {}
    for cid, omega in connection.forms.items():
        if not omega.entries:
            forms[cid] = _empty_matrix(omega.dim, 2)
            continue
        forms[cid] = matrix_d(omega) + matrix_wedge(omega, omega)
    return CurvatureData(connection, forms)


def _pfaffian_recursion(
    size: int,
    entry: Callable[[int, int], object],
    product: Callable[[object, object], object],
    plus: Callable[[object, object], object],
    negate: Callable[[object], object],
    unit: object,
    zero: Callable[[int], object],
    skip: Callable[[object], bool],
) -> object:
    """
    Desarrollo por la primera fila: Pf(A) = sum_j (-1)^j a_1j Pf(A sin 1 ni j).
    `zero(n)` es el cero de un subpfaffiano de n índices.
    """

    @lru_cache(maxsize=None)
    def pf(indices: Tuple[int, ...]) -> object:
        if not indices:
            return unit
        first, rest = indices[0], indices[1:]
        result = zero(len(indices))
        for position, j in enumerate(rest):
            a = entry(first, j)
            if skip(a):
                continue
            term = product(a, pf(rest[:position] + rest[position + 1:]))
            result = plus(result, negate(term) if position % 2 else term)
        return result

    return pf(tuple(range(size)))


def _is_rational(value: object) -> bool:
    return isinstance(value, (int, Fraction, np.integer)) and not isinstance(value, (bool, np.bool_))


def _exact_pfaffian(rows: np.ndarray) -> Fraction:
    """Pfaffiano en aritmética de Fraction para matrices de enteros y racionales"""
    size = rows.shape[0]
    a = [[Fraction(rows[i, j]) for j in range(size)] for i in range(size)]
    asymmetric = [(i, j) for i in range(size) for j in range(i, size) if a[i][j] != -a[j][i]]
    if asymmetric:
        i, j = asymmetric[0]
        raise PfaffianError(f"la matriz no es antisimétrica en ({i}, {j})")
    return _pfaffian_recursion(
        size,
        lambda i, j: a[i][j],
        lambda x, y: x * y,
        lambda x, y: x + y,
        lambda x: -x,
        Fraction(1),
        lambda n: Fraction(0),
        lambda x: x == 0,
    )


def pfaffian(
    matrix: Union[np.ndarray, Sequence[Sequence[object]], MatrixForm], check: bool = True
) -> Union[float, Fraction, FormExpr]:
    """
    Pfaffiano normalizado con Pf(diag por bloques de [[0, a], [-a, 0]]) = prod a.

    Args:
        matrix: Matriz antisimétrica de escalares o de 2-formas
        check: Exige la antisimetría símbolo a símbolo en las matrices de formas

    Returns:
        Fraction si todas las entradas son enteras o racionales, float para
        entradas reales, o FormExpr de grado igual a la dimensión de la matriz

    Raises:
        PfaffianError: dimensión impar o matriz no antisimétrica
    """
    if isinstance(matrix, MatrixForm):
        size = matrix.rows
        if size and matrix.cols != size:
            raise PfaffianError("matriz de formas no cuadrada")
        if size % 2:
            raise PfaffianError(f"pfaffiano de una matriz de dimensión impar {size}")
        if check and not is_symbolically_skew(matrix):
            raise PfaffianError("la matriz de formas no es antisimétrica")
        dim = matrix.dim
        return _pfaffian_recursion(
            size,
            lambda i, j: matrix[i, j],
            wedge,
            add_forms,
            lambda f: scale(f, -1),
            scalar_form(dim, 1),
            lambda n: zero_form(dim, n),
            lambda f: f.is_empty,
        )
    rows = matrix if isinstance(matrix, np.ndarray) else np.asarray(matrix, dtype=object)
    if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
        raise PfaffianError("se esperaba una matriz cuadrada")
    if rows.shape[0] % 2:
        raise PfaffianError(f"pfaffiano de una matriz de dimensión impar {rows.shape[0]}")
    if rows.size and all(_is_rational(value) for value in rows.flat):
        return _exact_pfaffian(rows)
    a = rows.astype(float)
    if _max_abs(a + a.T) > settings.MATRIX_TOL:
        raise PfaffianError(f"la matriz no es antisimétrica: |A + A^T| = {_max_abs(a + a.T):.3e}")
    return float(
        _pfaffian_recursion(
            a.shape[0],
            lambda i, j: float(a[i, j]),
            lambda x, y: x * y,
            lambda x, y: x + y,
            lambda x: -x,
            1.0,
            lambda n: 0.0,
            lambda x: x == 0.0,
        )
    )


def _skew_part(omega: MatrixForm) -> MatrixForm:
    """(Omega - Omega^T) / 2 fuera de la diagonal"""
    size = omega.rows
    entries = [[zero_form(omega.dim, omega.degree) for _ in range(size)] for _ in range(size)]
    for i in range(size):
        for j in range(i + 1, size):
            upper = scale(sub_forms(omega[i, j], omega[j, i]), Fraction(1, 2))
            entries[i][j] = upper
            entries[j][i] = scale(upper, -1)
    return MatrixForm(omega.dim, omega.degree, tuple(tuple(row) for row in entries))


def _curvature_pfaffian(curv: CurvatureData, chart_id: str, omega: MatrixForm) -> FormExpr:
    if is_symbolically_skew(omega):
        return pfaffian(omega)
    chart = curv.connection.bundle.base.chart(chart_id)
    residual = skew_residual(omega, chart.sample_points())
    if residual > settings.CONNECTION_TOL:
        raise PfaffianError(f"'{chart_id}': la curvatura no es antisimétrica ({residual:.3e})")
    logger.warning("%s: curvatura antisimétrica sólo numéricamente; se usa su parte antisimétrica", chart_id)
    return pfaffian(_skew_part(omega), check=False)


def euler_form(curv: CurvatureData) -> Dict[str, FormExpr]:
    """
    Forma de Euler Pf(Omega / 2 pi) por carta: 0 si el rango es impar y la
    constante 1 si es 0.
    """
    rank = curv.rank
    forms = {}
    if rank == 0:
        logger.warning(RANK_ZERO_NOTE)
    for cid, omega in curv.forms.items():
        if rank == 0:
            forms[cid] = scalar_form(omega.dim, 1)
        elif rank % 2:
            forms[cid] = zero_form(omega.dim, rank)
        else:
            half = rank // 2
            forms[cid] = scale(_curvature_pfaffian(curv, cid, omega), as_expr(1.0 / (2.0 * math.pi) ** half))
    return forms


def pontryagin_1(curv: CurvatureData) -> Dict[str, FormExpr]:
    """tr(Omega ^ Omega) / (8 pi^2)"""
    factor = as_expr(1.0 / (8.0 * math.pi ** 2))
    forms = {}
    for cid, omega in curv.forms.items():
        if not omega.entries:
            forms[cid] = zero_form(omega.dim, 4)
            continue
        forms[cid] = scale(trace(matrix_wedge(omega, omega)), factor)
    return forms


def chern_1(curv: CurvatureData) -> Dict[str, FormExpr]:
    """
    (i / 2 pi) tr_C(Omega) escrito en el real subyacente: tr(J Omega) / (4 pi), con J
    la estructura compleja estándar por bloques [[0, -1], [1, 0]].
    """
    rank = curv.rank
    if rank % 2:
        raise DegreeShiftError(f"c1 necesita rango real par y el fibrado tiene rango {rank}")
    factor = as_expr(1.0 / (4.0 * math.pi))
    forms = {}
    for cid, omega in curv.forms.items():
        result = zero_form(omega.dim, 2)
        for a in range(rank // 2):
            i, j = 2 * a, 2 * a + 1
            # (J Omega)_ii = -Omega_ji y (J Omega)_jj = Omega_ij
            result = add_forms(result, sub_forms(omega[i, j], omega[j, i]))
        forms[cid] = scale(result, factor)
    return forms


def characteristic_forms(curv: CurvatureData, kind: CharacteristicKind) -> Tuple[Dict[str, FormExpr], int]:
    """Formas del tipo pedido y su grado"""
    if kind is CharacteristicKind.EULER:
        return euler_form(curv), curv.rank
    if kind is CharacteristicKind.PONTRYAGIN_1:
        return pontryagin_1(curv), 4
    return chern_1(curv), 2


def bianchi_residual(connection: ConnectionData, samples: int = 10) -> float:
    """max |dOmega - (Omega ^ omega - omega ^ Omega)| en puntos aleatorios de cada carta"""
    curv = curvature(connection)
    worst = 0.0
    for chart in connection.bundle.base.charts:
        omega = connection.form(chart.id)
        if not omega.entries:
            continue
        omega_2 = curv.forms[chart.id]
        defect = matrix_d(omega_2) - (matrix_wedge(omega_2, omega) - matrix_wedge(omega, omega_2))
        points = chart.domain.random_points(sample_rng(f"bianchi:{chart.id}"), samples)
        worst = max(worst, _max_abs(evaluate_matrix_form(defect, points)))
    return worst


def euler_closedness(curv: CurvatureData, samples: int = 10) -> float:
    """max |d e(Omega)| en puntos aleatorios de cada carta"""
    worst = 0.0
    atlas = curv.connection.bundle.base
    for cid, form in euler_form(curv).items():
        chart = atlas.chart(cid)
        points = chart.domain.random_points(sample_rng(f"closed:{cid}"), samples)
        worst = max(worst, form_residual(exterior_derivative(form), points))
    return worst


# Integración


def check_partition(atlas: Atlas, partition: PartitionOfUnity) -> Report:
    """
    psi >= 0 en cada carta, psi = 1 en las cartas aisladas y
    psi_src(x) + psi_dst(phi(x)) = 1 en las regiones de los overlaps.
    """
    report = Report(title="partición de la unidad")
    connected = {a.src for a in atlas.arrows()} | {a.dst for a in atlas.arrows()}
    for chart in atlas.charts:
        try:
            psi = partition.function(chart.id)
        except ConnectionDataError as exc:
            report.add(CheckKind.PARTITION, chart.id, str(exc))
            continue
        points = chart.sample_points()
        values = np.broadcast_to(evaluate(psi, points), (points.shape[1],))
        if np.min(values, initial=0.0) < -settings.PARTITION_TOL:
            report.add(CheckKind.PARTITION, chart.id, "psi negativa", float(np.min(values)))
        if chart.id not in connected:
            report.check(_max_abs(values - 1.0), settings.PARTITION_TOL, CheckKind.PARTITION,
                         chart.id, "psi != 1 en una carta aislada")
    if not report.success:
        return report
    for overlap in atlas.overlaps:
        points = overlap.sample_points()
        m = points.shape[1]
        first = np.broadcast_to(evaluate(partition.function(overlap.src), points), (m,))
        second = np.broadcast_to(evaluate(partition.function(overlap.dst), overlap.apply(points)), (m,))
        report.check(_max_abs(first + second - 1.0), settings.PARTITION_TOL, CheckKind.PARTITION,
                     overlap.id, "sum psi != 1")
    return report


def check_form_compatibility(atlas: Atlas, forms: Mapping[str, FormExpr]) -> Report:
    """phi* f_dst = f_src en los puntos de muestra de cada flecha"""
    report = Report(title="compatibilidad de formas")
    for arrow in atlas.arrows():
        src_dim = atlas.chart(arrow.src).dim
        pulled = pullback(forms[arrow.dst], arrow.images, src_dim)
        residual = form_residual(sub_forms(pulled, forms[arrow.src]), _points_for(atlas, arrow))
        report.check(residual, settings.CONNECTION_TOL, CheckKind.COMPATIBILITY, arrow.id,
                     "phi* forma != forma")
    return report


def integrate_detailed(
    atlas: Atlas,
    forms: Mapping[str, FormExpr],
    partition: PartitionOfUnity,
    order: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> Tuple[float, int]:
    """
    Integral orbifold sum_charts (1/|G|) int psi f, con f el coeficiente de grado máximo.

    Returns:
        (valor, mayor orden de cuadratura usado)

    Raises:
        QuadratureError: grado distinto de la dimensión o cuadratura que no converge
    """
    value, used = 0.0, 0
    for chart in atlas.charts:
        form = forms[chart.id]
        if form.degree != chart.dim:
            raise QuadratureError(
                f"'{chart.id}': forma de grado {form.degree} en una carta de dimensión {chart.dim}"
            )
        coefficient = form.coefficient(tuple(range(1, chart.dim + 1)))
        if is_zero(coefficient):
            continue
        integrand = mul(partition.function(chart.id), coefficient)
        chart_value, chart_order = integrate_converged(
            chart.domain.quadrature,
            lambda nodes, e=integrand: evaluate(e, nodes),
            order,
            None,
            tolerance,
        )
        logger.debug("integral en %s: %.12g (orden %d)", chart.id, chart_value, chart_order)
        value += chart_value / chart.group.order
        used = max(used, chart_order)
    return value, used


def integrate(atlas: Atlas, forms: Mapping[str, FormExpr], partition: PartitionOfUnity) -> float:
    return integrate_detailed(atlas, forms, partition)[0]


# Restricción a sectores y al espacio total


def restrict_partition(partition: PartitionOfUnity, sectors: SectorAtlas) -> PartitionOfUnity:
    """psi~(y) = psi(B y) en cada carta del sector"""
    functions = {}
    for cid, data in sectors.charts.items():
        embedding = affine_images(data.basis, [0] * data.basis.shape[0])
        functions[cid] = compose(partition.function(data.member.chart), embedding)
    return PartitionOfUnity(functions)


def restrict_connection(
    connection: ConnectionData,
    sector: SectorClass,
    sectors: Optional[SectorAtlas] = None,
    restricted: Optional[BundleCocycle] = None,
) -> ConnectionData:
    """omega~ = C^T (B* omega) C sobre el fibrado del sector"""
    bundle = connection.bundle
    sectors = sectors or sector_atlas(bundle.base, sector)
    restricted = restricted or sector_bundle(bundle, sector, sectors)
    forms = {}
    for cid, data in sectors.charts.items():
        r = sectors.atlas.chart(cid).dim
        embedding = affine_images(data.basis, [0] * data.basis.shape[0])
        pulled = _pullback_matrix(connection.form(data.member.chart), embedding, r)
        fiber = fiber_fixed_basis(bundle, data.member)
        l = fiber.shape[1]
        if l == 0:
            forms[cid] = _empty_matrix(r, 1)
            continue
        entries = []
        for i in range(l):
            row = []
            for j in range(l):
                entry = zero_form(r, 1)
                for a in range(fiber.shape[0]):
                    for b in range(fiber.shape[0]):
                        c = exact_number(fiber[a, i] * fiber[b, j])
                        if c != 0:
                            entry = add_forms(entry, scale(pulled[a, b], c))
                row.append(entry)
            entries.append(tuple(row))
        forms[cid] = MatrixForm(r, 1, tuple(entries))
    return ConnectionData(f"{connection.name}{sector.label}", restricted, forms, connection.metric)


def _extend_form(form: FormExpr, dim: int) -> FormExpr:
    return FormExpr.build(dim, form.degree, form.coefficients)


def pullback_connection_to_total_space(
    connection: ConnectionData, vertical: Optional[BundleCocycle] = None
) -> ConnectionData:
    """Conexión de VE inducida por la proyección: las mismas formas en las cartas (x, v)"""
    bundle = connection.bundle
    vertical = vertical if vertical is not None else vertical_bundle(bundle)
    forms = {}
    for chart in vertical.base.charts:
        omega = connection.form(chart.id)
        forms[chart.id] = MatrixForm(
            chart.dim, 1, tuple(tuple(_extend_form(f, chart.dim) for f in row) for row in omega.entries)
        )
    return ConnectionData(f"V{connection.name}", vertical, forms, connection.metric)


# Conexión escindida


def _frame(values: Sequence[Expr], points: np.ndarray, rank: int) -> List[List[Expr]]:
    """Gram-Schmidt simbólico de s/|s| contra la base canónica; columnas del marco"""
    norm = sqrt(total([mul(e, e) for e in values]))
    columns = [[div(e, norm) for e in values]]
    for reference in range(rank):
        if len(columns) == rank:
            break
        u = []
        for j in range(rank):
            entry = ONE if j == reference else ZERO
            for column in columns:
                entry = sub(entry, mul(column[reference], column[j]))
            u.append(entry)
        length = np.sqrt(sum(np.broadcast_to(evaluate(e, points), (points.shape[1],)) ** 2 for e in u))
        if float(np.min(length)) < settings.NONVANISHING_THRESHOLD:
            continue
        norm_u = sqrt(total([mul(e, e) for e in u]))
        columns.append([div(e, norm_u) for e in u])
    if len(columns) != rank:
        raise ConnectionDataError("Gram-Schmidt degenerado: no se completa el marco adaptado")
    return columns


def _split_adapted(theta: MatrixForm) -> MatrixForm:
    """Anula la fila y la columna de e1"""
    empty = zero_form(theta.dim, 1)
    return MatrixForm(
        theta.dim,
        1,
        tuple(
            tuple(empty if i == 0 or j == 0 else theta[i, j] for j in range(theta.cols))
            for i in range(theta.rows)
        ),
    )


def split_connection(
    bundle: BundleCocycle, section: Section, ambient: Optional[ConnectionData] = None
) -> ConnectionData:
    """
    Conexión métrica que respeta span(s) ⊕ span(s)^⊥.

    En cada carta se construye el marco ortonormal F con e1 = s/|s|, se escribe la
    conexión ambiente en ese marco (theta = F^T omega F + F^T dF), se anulan la
    fila y la columna de e1 y se vuelve al marco original.

    Args:
        bundle: Fibrado bueno (los malos pasan por VE)
        section: Sección que no se anula
        ambient: Conexión métrica compatible de partida (plana por defecto)

    Raises:
        SectionError: si la sección se anula
        ConnectionDataError: Gram-Schmidt degenerado o rango 0
    """
    require_nonvanishing(bundle, section)
    k = bundle.rank
    if k == 0:
        raise ConnectionDataError("un fibrado de rango 0 no tiene secciones que no se anulen")
    ambient = ambient or flat_connection(bundle)
    forms, frames, adapted = {}, {}, {}
    for chart in bundle.base.charts:
        n = chart.dim
        points = np.hstack([
            chart.sample_points(),
            chart.domain.random_points(sample_rng(f"frame:{chart.id}"), settings.RANDOM_SAMPLES),
        ])
        columns = _frame(section.component(chart.id), points, k)
        if k > 1:
            frame_at = np.array([[float(evaluate(c[i], chart.domain.center())) for c in columns] for i in range(k)])
            if np.linalg.det(frame_at) < 0:
                columns[-1] = [mul(as_expr(-1), e) for e in columns[-1]]
        f = tuple(tuple(columns[j][i] for j in range(k)) for i in range(k))
        f_form = MatrixForm.from_exprs(n, f)
        f_t = f_form.transpose()
        d_f = differential_of_matrix(n, f)
        theta = matrix_wedge(matrix_wedge(f_t, ambient.form(chart.id)), f_form) + matrix_wedge(f_t, d_f)
        theta_split = _split_adapted(theta)
        forms[chart.id] = matrix_wedge(matrix_wedge(f_form, theta_split), f_t) - matrix_wedge(d_f, f_t)
        frames[chart.id] = f
        adapted[chart.id] = theta_split
    logger.debug("conexión escindida por %s en %d cartas", section.name, len(forms))
    return ConnectionData(f"split({section.name})", bundle, forms, True, frames, adapted)


# Clases de orbifold


def _component(
    bundle: BundleCocycle,
    connection: ConnectionData,
    sector: SectorClass,
    kind: CharacteristicKind,
    override: Optional[ConnectionData] = None,
) -> Tuple[ClassComponent, SectorAtlas]:
    sectors = sector_atlas(bundle.base, sector)
    if override is None:
        restricted = sector_bundle(bundle, sector, sectors)
        override = restrict_connection(connection, sector, sectors, restricted)
    forms, degree = characteristic_forms(curvature(override), kind)
    notes = (RANK_ZERO_NOTE,) if kind is CharacteristicKind.EULER and override.rank == 0 else ()
    component = ClassComponent(sector, sector_shift(bundle.base, sector), degree, forms, notes=notes)
    return component, sectors


def _integrate_component(
    component: ClassComponent, sectors: SectorAtlas, partition: Optional[PartitionOfUnity]
) -> ClassComponent:
    if partition is None:
        return component
    if any(component.form_degree != chart.dim for chart in sectors.atlas.charts):
        return component
    restricted = restrict_partition(partition, sectors)
    value, order = integrate_detailed(sectors.atlas, component.forms, restricted)
    return replace(component, integral=value, quadrature_order=order)


def _sector_class(
    bundle: BundleCocycle,
    connection: ConnectionData,
    kind: CharacteristicKind,
    partition: Optional[PartitionOfUnity],
    sector_connections: Mapping[int, ConnectionData],
) -> OrbifoldClass:
    components = []
    for sector in sector_census(bundle.base).classes:
        component, sectors = _component(
            bundle, connection, sector, kind, sector_connections.get(sector.index)
        )
        components.append(_integrate_component(component, sectors, partition))
    return OrbifoldClass(f"{kind.value}({bundle.name})", bundle.base.name, components)


def _vertical_class(
    bundle: BundleCocycle,
    vertical_connection: ConnectionData,
    kind: CharacteristicKind,
    partition: Optional[PartitionOfUnity],
    total: Atlas,
) -> OrbifoldClass:
    """c(E) := ι* c(VE): clase sobre los sectores de E y restricción a Q"""
    lifted = _sector_class(vertical_connection.bundle, vertical_connection, kind, None, {})
    restricted = iota_star(bundle, lifted, total=total)
    components = []
    census = sector_census(bundle.base)
    for component, source in zip(restricted.components, lifted.components):
        sectors = sector_atlas(bundle.base, census.classes[component.sector.index])
        component = replace(component, notes=source.notes)
        components.append(_integrate_component(component, sectors, partition))
    return OrbifoldClass(
        f"{kind.value}({bundle.name})", bundle.base.name, components, origin=lifted
    )


def orbifold_characteristic_class(
    bundle: BundleCocycle,
    connection: Optional[ConnectionData],
    kind: Union[CharacteristicKind, str] = CharacteristicKind.EULER,
    partition: Optional[PartitionOfUnity] = None,
    sector_connections: Optional[Mapping[int, ConnectionData]] = None,
    via_vertical: bool = False,
    graded: bool = False,
) -> OrbifoldClass:
    """
    Clase característica de orbifold, suma por sectores de c(Ẽ_(g)).

    Los fibrados malos (o via_vertical=True) se calculan sobre VE en el espacio
    total y se restringen con ι*.

    Args:
        bundle: Fibrado E
        connection: Conexión métrica de E (o None si se dan todas las de sector)
        kind: euler | pontryagin_1 | chern_1
        partition: Partición de la unidad de Q; sin ella no se integra
        sector_connections: Conexiones ya restringidas por índice de sector
        via_vertical: Fuerza el camino por VE
        graded: Exige desplazamientos de grado en todos los sectores

    Raises:
        ConnectionDataError: falta la conexión de un sector
        DegreeShiftError: graduación pedida sin estructura compleja
    """
    kind = CharacteristicKind(kind)
    sector_connections = dict(sector_connections or {})
    census = sector_census(bundle.base)
    if connection is None:
        missing = [s.label for s in census.classes if s.index not in sector_connections]
        if missing:
            raise ConnectionDataError(f"falta la conexión de los sectores {', '.join(missing)}")

    bad = not classify(bundle).is_good
    if bad or via_vertical:
        if connection is None:
            raise ConnectionDataError("el camino por VE necesita la conexión de E")
        total = total_space(bundle)
        vertical = vertical_bundle(bundle, total)
        result = _vertical_class(
            bundle, pullback_connection_to_total_space(connection, vertical), kind, partition, total
        )
    else:
        result = _sector_class(bundle, connection, kind, partition, sector_connections)
    if graded and not result.graded:
        raise DegreeShiftError(f"'{bundle.name}' no declara estructura compleja: la clase no se gradúa")
    return result


def _sector_section_norms(bundle: BundleCocycle, section: Section) -> Dict[str, Optional[float]]:
    """Mínimo de |s| restringida a la fibra fija de cada sector; None si el sector no admite fibrado"""
    norms: Dict[str, Optional[float]] = {}
    for sector in sector_census(bundle.base).classes:
        try:
            sectors = sector_atlas(bundle.base, sector)
            restricted = sector_bundle(bundle, sector, sectors)
        except SectorError as exc:
            logger.debug("sector %s sin fibrado restringido: %s", sector.label, exc)
            norms[sector.label] = None
            continue
        piece = sector_section(bundle, section, sector, restricted, sectors)
        norms[sector.label] = validate_section(restricted, piece).content["min_norm"]
    return norms


def obstruction_verdict(
    bundle: BundleCocycle,
    section: Section,
    partition: Optional[PartitionOfUnity] = None,
    ambient: Optional[ConnectionData] = None,
) -> Report:
    """
    Comprueba e_orb(E) = 0 para un fibrado con una sección que no se anula.

    Los fibrados buenos usan la conexión escindida por s; los malos levantan s a VE,
    escinden allí y restringen con ι*. Cada representante debe anularse en los
    nodos de cuadratura (OBSTRUCTION_NODE_TOL) y cada integral
    (OBSTRUCTION_INTEGRAL_TOL).

    Raises:
        SectionError: si la sección se anula o es inválida
    """
    section_report = require_nonvanishing(bundle, section)
    verdict = classify(bundle)
    report = Report(title=f"obstrucción {bundle.name}")
    report.metadata = {"verdict": verdict.verdict.value, "section": section.name}

    if verdict.is_good:
        connection = split_connection(bundle, section, ambient)
        report.merge(validate_connection(connection), prefix="conexión:")
        cls = orbifold_characteristic_class(bundle, connection, CharacteristicKind.EULER, partition)
    else:
        total = total_space(bundle)
        vertical = vertical_bundle(bundle, total)
        lifted = lift_section(bundle, section, vertical)
        lifted_ambient = None
        if ambient is not None:
            lifted_ambient = pullback_connection_to_total_space(ambient, vertical)
        connection = split_connection(vertical, lifted, lifted_ambient)
        cls = _vertical_class(bundle, connection, CharacteristicKind.EULER, partition, total)

    node_max, integral_max = 0.0, 0.0
    components = []
    census = sector_census(bundle.base)
    for component in cls.components:
        sectors = sector_atlas(bundle.base, census.classes[component.sector.index])
        worst = 0.0
        for chart in sectors.atlas.charts:
            nodes, _ = chart.domain.quadrature(settings.QUAD_ORDER)
            worst = max(worst, form_residual(component.forms[chart.id], nodes))
        node_max = max(node_max, worst)
        if component.integral is not None:
            integral_max = max(integral_max, abs(component.integral))
        report.check(worst, settings.OBSTRUCTION_NODE_TOL, CheckKind.OBSTRUCTION,
                     component.sector.label, "la forma de Euler no se anula en los nodos")
        if component.integral is not None:
            report.check(abs(component.integral), settings.OBSTRUCTION_INTEGRAL_TOL,
                         CheckKind.OBSTRUCTION, component.sector.label, "integral de Euler no nula")
        components.append({"sector": component.sector.label, "node_max": worst,
                           "integral": component.integral})
    report.content = {
        "result": "PASS" if report.success else "FAIL",
        "node_max": node_max,
        "integral_max": integral_max,
        "min_norm": section_report.content["min_norm"],
        "sector_min_norms": _sector_section_norms(bundle, section),
        "components": components,
        "connection": {cid: [[str(f) for f in row] for row in omega.entries]
                       for cid, omega in connection.forms.items()},
    }
    return report
