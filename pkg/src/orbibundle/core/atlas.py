"""
Atlas de orbifold con cartas lineales de grupo finito, inyecciones afines ortogonales,
tabla de composiciones e identificaciones curvas entre cartas (overlaps).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.orbibundle.config import settings
from src.orbibundle.core.domains import Ball, Domain, sample_rng
from src.orbibundle.core.expr import Expr, as_expr, evaluate, mul, total, var
from src.orbibundle.core.groups import (
    FiniteGroup,
    Representation,
    Subgroup,
    action_kernel,
    is_homomorphism,
    is_injective,
)
from src.orbibundle.core.report import CheckKind, Report
from src.orbibundle.errors import AtlasError, EvaluationDomainError, KernelConsistencyError

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]


@dataclass(frozen=True)
class Chart:
    """Carta lineal {V, G, pi}: dominio, grupo y acción ortogonal"""

    id: str
    domain: Domain
    group: FiniteGroup
    action: Representation

    @property
    def dim(self) -> int:
        return self.domain.dim

    def sample_points(self) -> np.ndarray:
        return self.domain.sample_points(sample_rng(f"chart:{self.id}"))


def exact_number(value: Number) -> Number:
    """Los flotantes a 1e-12 de un entero se guardan como Fraction exacta"""
    if isinstance(value, (float, np.floating)):
        nearest = round(float(value))
        if abs(float(value) - nearest) <= 1e-12:
            return Fraction(nearest)
        return float(value)
    return value


def affine_images(matrix: Sequence[Sequence[Number]], translation: Sequence[Number]) -> Tuple[Expr, ...]:
    """Componentes A x + t de un mapa afín como expresiones"""
    images = []
    for row, shift in zip(matrix, translation):
        terms = [mul(as_expr(exact_number(a)), var(j + 1)) for j, a in enumerate(row)]
        images.append(total(terms + [as_expr(exact_number(shift))]))
    return tuple(images)


def evaluate_images(images: Sequence[Expr], points: np.ndarray) -> np.ndarray:
    """Evalúa las componentes de un mapa en puntos (n, m) -> (len(images), m)"""
    if not images:
        return np.zeros((0, points.shape[-1]))
    return np.vstack([np.broadcast_to(evaluate(e, points), (points.shape[-1],)) for e in images])


@dataclass(frozen=True, eq=False)
class Injection:
    """
    Inyección (phi, lambda). phi se da por expresiones en las coordenadas de la carta
    origen; las del atlas base son afines ortogonales y guardan además (A, t).
    """

    id: str
    src: str
    dst: str
    images: Tuple[Expr, ...]
    lam: Tuple[int, ...]
    matrix: Optional[Tuple[Tuple[Number, ...], ...]] = None
    translation: Optional[Tuple[Number, ...]] = None

    @classmethod
    def affine(
        cls,
        id: str,
        src: str,
        dst: str,
        matrix: Sequence[Sequence[Number]],
        translation: Sequence[Number],
        lam: Sequence[int],
    ) -> "Injection":
        matrix = tuple(tuple(exact_number(a) for a in row) for row in matrix)
        translation = tuple(exact_number(t) for t in translation)
        return cls(id, src, dst, affine_images(matrix, translation), tuple(lam), matrix, translation)

    @property
    def is_affine(self) -> bool:
        return self.matrix is not None

    @cached_property
    def array(self) -> np.ndarray:
        rows = [[float(a) for a in row] for row in self.matrix]
        return np.array(rows, dtype=float).reshape(len(rows), len(rows[0]) if rows else 0)

    @cached_property
    def shift(self) -> np.ndarray:
        return np.array([float(t) for t in self.translation])

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.is_affine:
            if self.array.shape[1] == 0:
                return np.repeat(self.shift[:, np.newaxis], points.shape[-1], axis=1)
            return self.array @ points + self.shift[:, np.newaxis]
        return evaluate_images(self.images, points)


@dataclass(frozen=True, eq=False)
class Overlap:
    """
    Identificación curva entre cartas: phi dado por expresiones en las coordenadas
    de la carta origen, definido en la región de muestreo `region`. El homomorfismo
    lam no tiene por qué ser inyectivo.
    """

    id: str
    src: str
    dst: str
    images: Tuple[Expr, ...]
    lam: Tuple[int, ...]
    region: Domain

    def apply(self, points: np.ndarray) -> np.ndarray:
        return evaluate_images(self.images, np.asarray(points, dtype=float))

    def sample_points(self) -> np.ndarray:
        return self.region.sample_points(sample_rng(f"overlap:{self.id}"))


@dataclass(frozen=True)
class Composition:
    """second o first = result"""

    first: str
    second: str
    result: str


@dataclass(frozen=True, eq=False)
class Atlas:
    name: str
    charts: Tuple[Chart, ...]
    injections: Tuple[Injection, ...] = ()
    compositions: Tuple[Composition, ...] = ()
    overlaps: Tuple[Overlap, ...] = ()

    @cached_property
    def chart_map(self) -> Dict[str, Chart]:
        return {chart.id: chart for chart in self.charts}

    @cached_property
    def injection_map(self) -> Dict[str, Injection]:
        return {injection.id: injection for injection in self.injections}

    @cached_property
    def overlap_map(self) -> Dict[str, Overlap]:
        return {overlap.id: overlap for overlap in self.overlaps}

    def chart(self, chart_id: str) -> Chart:
        try:
            return self.chart_map[chart_id]
        except KeyError:
            raise AtlasError(f"carta desconocida '{chart_id}'") from None

    def injection(self, injection_id: str) -> Injection:
        try:
            return self.injection_map[injection_id]
        except KeyError:
            raise AtlasError(f"inyección desconocida '{injection_id}'") from None

    @property
    def chart_ids(self) -> List[str]:
        return [chart.id for chart in self.charts]

    @property
    def dim(self) -> int:
        dims = {chart.dim for chart in self.charts}
        if len(dims) != 1:
            raise AtlasError(f"el atlas '{self.name}' mezcla dimensiones {sorted(dims)}")
        return dims.pop()

    def arrows(self) -> Iterable[Union[Injection, Overlap]]:
        """Inyecciones y overlaps, en ese orden"""
        yield from self.injections
        yield from self.overlaps


def _max_abs(values: np.ndarray) -> float:
    return float(np.max(np.abs(values), initial=0.0))


def _validate_chart(chart: Chart) -> Report:
    report = Report(title=f"carta {chart.id}")
    group_report = chart.group.validate()
    report.merge(group_report, prefix=f"{chart.id}:")
    if chart.action.group != chart.group:
        report.add(CheckKind.REFERENCE, chart.id, "la acción no es del grupo de la carta")
        return report
    if chart.action.dim != chart.dim:
        report.add(
            CheckKind.DOMAIN,
            chart.id,
            f"acción de dimensión {chart.action.dim} en una carta de dimensión {chart.dim}",
        )
        return report
    report.merge(chart.action.validate(f"{chart.id}.action"))
    if not isinstance(chart.domain, Ball):
        # una bola se preserva por cualquier acción ortogonal; el resto se muestrea
        points = chart.sample_points()
        for g in chart.group.elements:
            moved = chart.action.matrix(g) @ points
            if not np.all(chart.domain.contains(moved)):
                report.add(
                    CheckKind.DOMAIN,
                    f"{chart.id}[{chart.group.labels[g]}]",
                    "la acción saca puntos del dominio",
                )
    return report


def _check_lambda(
    report: Report, subject: str, lam: Sequence[int], src: Chart, dst: Chart, injective: bool
) -> bool:
    if len(lam) != src.group.order or any(not 0 <= h < dst.group.order for h in lam):
        report.add(CheckKind.HOMOMORPHISM, subject, "lambda con longitud o índices incorrectos")
        return False
    ok = True
    if not is_homomorphism(src.group, dst.group, lam):
        report.add(CheckKind.HOMOMORPHISM, subject, "lambda no es un homomorfismo")
        ok = False
    if injective and not is_injective(lam):
        report.add(CheckKind.INJECTIVITY, subject, "lambda no es inyectivo")
        ok = False
    return ok


def _check_equivariance(
    report: Report,
    subject: str,
    apply,
    points: np.ndarray,
    lam: Sequence[int],
    src: Chart,
    dst: Chart,
) -> None:
    """phi(g x) = lambda(g) phi(x) en los puntos de muestra"""
    base = apply(points)
    residual = 0.0
    for g in src.group.elements:
        moved = apply(src.action.matrix(g) @ points)
        residual = max(residual, _max_abs(moved - dst.action.matrix(lam[g]) @ base))
    report.check(
        residual, settings.EQUIVARIANCE_TOL, CheckKind.EQUIVARIANCE, subject, "phi(g x) != lambda(g) phi(x)"
    )


def _validate_injection(atlas: Atlas, injection: Injection) -> Report:
    report = Report(title=f"inyección {injection.id}")
    subject = injection.id
    if injection.src not in atlas.chart_map or injection.dst not in atlas.chart_map:
        report.add(CheckKind.REFERENCE, subject, "carta origen o destino desconocida")
        return report
    src, dst = atlas.chart(injection.src), atlas.chart(injection.dst)
    lam_ok = _check_lambda(report, subject, injection.lam, src, dst, injective=True)
    if len(injection.images) != dst.dim:
        report.add(CheckKind.DOMAIN, subject, "número de componentes distinto de la dimensión destino")
        return report
    if injection.is_affine:
        a = injection.array
        if a.shape != (dst.dim, src.dim):
            report.add(
                CheckKind.DOMAIN, subject, f"matriz {a.shape} para cartas {src.dim} -> {dst.dim}"
            )
            return report
        report.check(
            _max_abs(a.T @ a - np.eye(src.dim)),
            settings.MATRIX_TOL,
            CheckKind.ORTHOGONALITY,
            subject,
            "la matriz de la inyección no es ortogonal",
        )
    points = src.sample_points()
    try:
        images = injection.apply(points)
    except EvaluationDomainError as exc:
        report.add(CheckKind.DOMAIN, subject, f"phi no se puede evaluar: {exc}")
        return report
    if not np.all(dst.domain.contains(images)):
        report.add(CheckKind.DOMAIN, subject, "phi saca puntos del dominio destino")
    if lam_ok:
        _check_equivariance(report, subject, injection.apply, points, injection.lam, src, dst)
    return report


def _validate_overlap(atlas: Atlas, overlap: Overlap) -> Report:
    report = Report(title=f"overlap {overlap.id}")
    subject = overlap.id
    if overlap.src not in atlas.chart_map or overlap.dst not in atlas.chart_map:
        report.add(CheckKind.REFERENCE, subject, "carta origen o destino desconocida")
        return report
    src, dst = atlas.chart(overlap.src), atlas.chart(overlap.dst)
    if len(overlap.images) != dst.dim:
        report.add(CheckKind.DOMAIN, subject, "número de componentes distinto de la dimensión destino")
        return report
    lam_ok = _check_lambda(report, subject, overlap.lam, src, dst, injective=False)
    points = overlap.sample_points()
    if not np.all(src.domain.contains(points)):
        report.add(CheckKind.DOMAIN, subject, "la región del overlap no está en la carta origen")
        return report
    try:
        images = overlap.apply(points)
    except EvaluationDomainError as exc:
        report.add(CheckKind.DOMAIN, subject, f"phi no se puede evaluar: {exc}")
        return report
    if not np.all(dst.domain.contains(images)):
        report.add(CheckKind.DOMAIN, subject, "phi saca puntos del dominio destino")
    if lam_ok:
        _check_equivariance(report, subject, overlap.apply, points, overlap.lam, src, dst)
    return report


def _validate_composition(atlas: Atlas, composition: Composition) -> Report:
    subject = f"{composition.second}o{composition.first}={composition.result}"
    report = Report(title=f"composición {subject}")
    ids = (composition.first, composition.second, composition.result)
    if any(i not in atlas.injection_map for i in ids):
        report.add(CheckKind.REFERENCE, subject, "inyección desconocida en la composición")
        return report
    first, second, result = (atlas.injection(i) for i in ids)
    if first.dst != second.src or result.src != first.src or result.dst != second.dst:
        report.add(CheckKind.COMPOSITION, subject, "las inyecciones no se encadenan")
        return report
    points = atlas.chart(first.src).sample_points()
    residual = _max_abs(second.apply(first.apply(points)) - result.apply(points))
    report.check(
        residual, settings.EQUIVARIANCE_TOL, CheckKind.COMPOSITION, subject, "phi2(phi1(x)) != phi(x)"
    )
    if any(second.lam[first.lam[g]] != result.lam[g] for g in range(len(first.lam))):
        report.add(CheckKind.COMPOSITION, subject, "lambda2 o lambda1 != lambda")
    return report


def validate_atlas(atlas: Atlas) -> Report:
    """
    Valida cartas, inyecciones, composiciones y overlaps.

    Args:
        atlas: Atlas a validar

    Returns:
        Report: vacío si el atlas es válido; cada violación nombra su carta o inyección
    """
    report = Report(title=f"atlas {atlas.name}")
    seen = set()
    for chart in atlas.charts:
        if chart.id in seen:
            report.add(CheckKind.REFERENCE, chart.id, "identificador de carta repetido")
        seen.add(chart.id)
        report.merge(_validate_chart(chart))
    for injection in atlas.injections:
        report.merge(_validate_injection(atlas, injection))
    for composition in atlas.compositions:
        report.merge(_validate_composition(atlas, composition))
    for overlap in atlas.overlaps:
        report.merge(_validate_overlap(atlas, overlap))
    report.content = {
        "charts": len(atlas.charts),
        "injections": len(atlas.injections),
        "compositions": len(atlas.compositions),
        "overlaps": len(atlas.overlaps),
    }
    logger.debug("atlas %s validado: %d violaciones", atlas.name, len(report.violations))
    return report


@dataclass
class BaseKernel:
    """Núcleo K_b por carta y resumen de su clase de isomorfismo"""

    kernels: Dict[str, Subgroup]
    order: int
    abelian: bool
    consistent: bool = True

    @property
    def is_trivial(self) -> bool:
        return self.order == 1

    def to_dict(self) -> Dict[str, object]:
        return {
            "order": self.order,
            "abelian": self.abelian,
            "consistent": self.consistent,
            "charts": {cid: k.labels() for cid, k in self.kernels.items()},
        }


def _kernel_is_abelian(kernel: Subgroup) -> bool:
    parent = kernel.parent
    return all(parent.mul(a, b) == parent.mul(b, a) for a in kernel.elements for b in kernel.elements)


def base_kernel(atlas: Atlas, strict: bool = True) -> BaseKernel:
    """
    Núcleo de la acción en cada carta y su consistencia a través de las inyecciones.

    Args:
        atlas: Atlas válido
        strict: lanzar KernelConsistencyError si los núcleos no se corresponden

    Returns:
        BaseKernel
    """
    kernels = {chart.id: action_kernel(chart.action) for chart in atlas.charts}
    consistent = True
    for arrow in atlas.arrows():
        image = frozenset(arrow.lam[g] for g in kernels[arrow.src].elements)
        target = kernels[arrow.dst].elements
        if isinstance(arrow, Injection):
            ok = image == target
        else:
            # un overlap sólo tiene que llevar el núcleo al núcleo
            ok = image <= target
        if not ok:
            consistent = False
            message = f"núcleos inconsistentes a través de '{arrow.id}'"
            if strict:
                raise KernelConsistencyError(message)
            logger.warning(message)
    orders = {k.order for k in kernels.values()}
    if len(orders) > 1:
        consistent = False
        if strict:
            raise KernelConsistencyError(f"núcleos de órdenes distintos {sorted(orders)}")
    order = max(orders) if orders else 1
    abelian = all(_kernel_is_abelian(k) for k in kernels.values())
    return BaseKernel(kernels, order, abelian, consistent)


def is_reduced(atlas: Atlas) -> bool:
    """True si todos los grupos locales actúan efectivamente"""
    return all(k.is_trivial for k in base_kernel(atlas, strict=False).kernels.values())

