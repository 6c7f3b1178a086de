"""
Fibrados vectoriales de orbifold como cociclos de transición equivariantes.

Incluye la clasificación buena/mala, el espacio total como atlas, el fibrado
vertical VE sobre el espacio total, la restricción a la sección cero con su
certificado y las secciones (validación, levantamiento y restricción).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.orbibundle.config import settings
from src.orbibundle.core.atlas import Atlas, Chart, Composition, Injection, Overlap, validate_atlas
from src.orbibundle.core.domains import fiber_domain, product_domain, sample_rng
from src.orbibundle.core.expr import (
    ZERO,
    Expr,
    as_expr,
    compose,
    evaluate,
    substitute,
    to_text,
    var,
    variables,
)
from src.orbibundle.core.forms import (
    ExprMatrix,
    evaluate_matrix,
    expr_matvec,
    substitute_matrix,
)
from src.orbibundle.core.groups import (
    Representation,
    Subgroup,
    action_kernel,
    direct_sum,
    quotient_group,
)
from src.orbibundle.core.report import CheckKind, Report
from src.orbibundle.errors import BundleError, CertificateError, EvaluationDomainError, SectionError

logger = logging.getLogger(__name__)

Arrow = Union[Injection, Overlap]


@dataclass(frozen=True, eq=False)
class BundleCocycle:
    """
    Fibrado de rango k sobre un atlas: acción de fibra por carta y transición
    g(x) (matriz k x k de expresiones en las coordenadas de la carta origen)
    por cada inyección y cada overlap. `source` es el fibrado E cuando este es VE.
    """

    name: str
    base: Atlas
    rank: int
    fiber_actions: Mapping[str, Representation]
    transitions: Mapping[str, ExprMatrix]
    source: Optional["BundleCocycle"] = field(default=None)

    def fiber_action(self, chart_id: str) -> Representation:
        try:
            return self.fiber_actions[chart_id]
        except KeyError:
            raise BundleError(f"falta la acción de fibra de la carta '{chart_id}'") from None

    def transition(self, arrow_id: str) -> ExprMatrix:
        try:
            return self.transitions[arrow_id]
        except KeyError:
            raise BundleError(f"falta la transición de '{arrow_id}'") from None

    def total_action(self, chart_id: str) -> Representation:
        """Acción base ⊕ fibra en la carta"""
        return direct_sum(self.base.chart(chart_id).action, self.fiber_action(chart_id))


def _max_abs(values: np.ndarray) -> float:
    return float(np.max(np.abs(values), initial=0.0))


def _points_for(atlas: Atlas, arrow: Arrow) -> np.ndarray:
    if isinstance(arrow, Overlap):
        return arrow.sample_points()
    return atlas.chart(arrow.src).sample_points()


def _batched(matrix: np.ndarray) -> np.ndarray:
    # (k, k, m) -> (m, k, k)
    return np.moveaxis(matrix, -1, 0)


def validate_bundle(bundle: BundleCocycle, include_base: bool = True) -> Report:
    """
    Comprueba acciones de fibra, invertibilidad, equivarianza y ley de cociclo.

    Args:
        bundle: Fibrado
        include_base: validar también el atlas base

    Returns:
        Report con una violación por invariante incumplido
    """
    report = Report(title=f"fibrado {bundle.name}")
    atlas = bundle.base
    if include_base:
        report.merge(validate_atlas(atlas), prefix="base:")
    k = bundle.rank
    for chart in atlas.charts:
        rep = bundle.fiber_actions.get(chart.id)
        if rep is None:
            report.add(CheckKind.REFERENCE, chart.id, "falta la acción de fibra")
            continue
        if rep.group != chart.group or rep.dim != k:
            report.add(CheckKind.REFERENCE, chart.id, "acción de fibra de otro grupo o dimensión")
            continue
        report.merge(rep.validate(f"{chart.id}.fiber"))
    if not report.success and any(v.kind == CheckKind.REFERENCE for v in report.violations):
        return report
    for arrow in atlas.arrows():
        report.merge(_validate_transition(bundle, arrow))
    for composition in atlas.compositions:
        report.merge(_validate_cocycle(bundle, composition))
    report.content = {"rank": k, "transitions": len(bundle.transitions)}
    return report


def _validate_transition(bundle: BundleCocycle, arrow: Arrow) -> Report:
    report = Report(title=f"transición {arrow.id}")
    subject = arrow.id
    matrix = bundle.transitions.get(arrow.id)
    if matrix is None:
        report.add(CheckKind.REFERENCE, subject, "falta la transición")
        return report
    k = bundle.rank
    if len(matrix) != k or any(len(row) != k for row in matrix):
        report.add(CheckKind.REFERENCE, subject, f"la transición no es {k}x{k}")
        return report
    if k == 0:
        return report
    src = bundle.base.chart(arrow.src)
    used = set().union(*(variables(e) for row in matrix for e in row))
    if used and max(used) > src.dim:
        report.add(CheckKind.REFERENCE, subject, "la transición usa variables fuera de la carta")
        return report
    points = _points_for(bundle.base, arrow)
    try:
        values = _batched(evaluate_matrix(matrix, points))
    except EvaluationDomainError as exc:
        report.add(CheckKind.DOMAIN, subject, f"transición no evaluable: {exc}")
        return report
    smallest = float(np.min(np.abs(np.linalg.det(values))))
    if smallest < settings.INVERTIBILITY_TOL:
        report.add(CheckKind.INVERTIBILITY, subject, f"|det g| = {smallest:.3e}", smallest)
    rho_src = bundle.fiber_action(arrow.src)
    rho_dst = bundle.fiber_action(arrow.dst)
    residual = 0.0
    for g in src.group.elements:
        moved = _batched(evaluate_matrix(matrix, src.action.matrix(g) @ points))
        lhs = moved @ rho_src.matrix(g)
        rhs = rho_dst.matrix(arrow.lam[g]) @ values
        residual = max(residual, _max_abs(lhs - rhs))
    report.check(
        residual,
        settings.EQUIVARIANCE_TOL,
        CheckKind.EQUIVARIANCE,
        subject,
        "g(h x) rho1(h) != rho2(lambda(h)) g(x)",
    )
    return report


def _validate_cocycle(bundle: BundleCocycle, composition: Composition) -> Report:
    subject = f"{composition.second}o{composition.first}"
    report = Report(title=f"cociclo {subject}")
    if bundle.rank == 0:
        return report
    atlas = bundle.base
    first = atlas.injection(composition.first)
    second = atlas.injection(composition.second)
    ids = (composition.first, composition.second, composition.result)
    if any(i not in bundle.transitions for i in ids):
        report.add(CheckKind.REFERENCE, subject, "falta una transición de la composición")
        return report
    points = atlas.chart(first.src).sample_points()
    g1 = _batched(evaluate_matrix(bundle.transitions[composition.first], points))
    g2 = _batched(evaluate_matrix(bundle.transitions[composition.second], first.apply(points)))
    g3 = _batched(evaluate_matrix(bundle.transitions[composition.result], points))
    report.check(
        _max_abs(g3 - g2 @ g1),
        settings.EQUIVARIANCE_TOL,
        CheckKind.COCYCLE,
        subject,
        "g_(i2 o i1)(x) != g_i2(phi1(x)) g_i1(x)",
    )
    return report


class Verdict(Enum):
    GOOD = "Good"
    BAD = "Bad"


@dataclass
class GoodBadVerdict:
    """Veredicto bueno/malo con los núcleos K_b y K_f de cada carta"""

    verdict: Verdict
    base_kernels: Dict[str, Subgroup]
    fiber_kernels: Dict[str, Subgroup]

    @property
    def is_good(self) -> bool:
        return self.verdict == Verdict.GOOD

    def to_dict(self) -> Dict[str, object]:
        return {
            "verdict": self.verdict.value,
            "charts": {
                cid: {
                    "K_b": self.base_kernels[cid].labels(),
                    "K_f": self.fiber_kernels[cid].labels(),
                }
                for cid in self.base_kernels
            },
            "K_b_order": max((k.order for k in self.base_kernels.values()), default=1),
            "K_f_order": max((k.order for k in self.fiber_kernels.values()), default=1),
        }


def classify(bundle: BundleCocycle) -> GoodBadVerdict:
    """
    Clasifica el fibrado: malo si K_f es un subgrupo propio de K_b en alguna carta.

    Raises:
        BundleError: si el veredicto cambia entre cartas conectadas
    """
    base_kernels: Dict[str, Subgroup] = {}
    fiber_kernels: Dict[str, Subgroup] = {}
    bad: Dict[str, bool] = {}
    for chart in bundle.base.charts:
        kb = action_kernel(chart.action)
        kf = action_kernel(bundle.total_action(chart.id))
        base_kernels[chart.id] = kb
        fiber_kernels[chart.id] = kf
        bad[chart.id] = kf.elements < kb.elements
    for arrow in bundle.base.arrows():
        if bad[arrow.src] != bad[arrow.dst]:
            raise BundleError(
                f"veredicto inconsistente entre '{arrow.src}' y '{arrow.dst}' a través de '{arrow.id}'"
            )
    verdict = Verdict.BAD if any(bad.values()) else Verdict.GOOD
    logger.debug("fibrado %s: %s", bundle.name, verdict.value)
    return GoodBadVerdict(verdict, base_kernels, fiber_kernels)


def fiber_variables(bundle: BundleCocycle, chart_id: str) -> List[int]:
    """Índices de las coordenadas de fibra v en la carta del espacio total"""
    n = bundle.base.chart(chart_id).dim
    return [n + i for i in range(1, bundle.rank + 1)]


def _extended_images(bundle: BundleCocycle, arrow: Arrow) -> Tuple[Expr, ...]:
    """(phi(x), g(x) v) en las coordenadas (x, v) de la carta origen"""
    n = bundle.base.chart(arrow.src).dim
    v = [var(n + i) for i in range(1, bundle.rank + 1)]
    return tuple(arrow.images) + expr_matvec(bundle.transition(arrow.id), v)


def total_space(bundle: BundleCocycle) -> Atlas:
    """
    Atlas del espacio total: cartas V x D_k con la acción base ⊕ fibra y
    inyecciones phi_E(x, v) = (phi(x), g(x) v) con el mismo lambda.
    """
    k = bundle.rank
    fiber = fiber_domain(k)
    charts = tuple(
        Chart(
            chart.id,
            product_domain(chart.domain, fiber),
            chart.group,
            bundle.total_action(chart.id),
        )
        for chart in bundle.base.charts
    )
    injections = tuple(
        Injection(inj.id, inj.src, inj.dst, _extended_images(bundle, inj), inj.lam)
        for inj in bundle.base.injections
    )
    overlaps = tuple(
        Overlap(
            ov.id,
            ov.src,
            ov.dst,
            _extended_images(bundle, ov),
            ov.lam,
            product_domain(ov.region, fiber),
        )
        for ov in bundle.base.overlaps
    )
    return Atlas(
        f"E({bundle.name})", charts, injections, bundle.base.compositions, overlaps
    )


def vertical_bundle(bundle: BundleCocycle, total: Optional[Atlas] = None) -> BundleCocycle:
    """
    VE sobre el espacio total: misma acción de fibra y (g_i)_VE(x, v) = g_i(x).

    Args:
        bundle: Fibrado E
        total: espacio total ya construido (opcional)

    Returns:
        BundleCocycle con source = bundle
    """
    atlas = total if total is not None else total_space(bundle)
    fiber_actions = {cid: bundle.fiber_action(cid) for cid in bundle.base.chart_ids}
    # g_i sólo depende de x, que son las primeras coordenadas de la carta total
    transitions = {aid: tuple(tuple(row) for row in g) for aid, g in bundle.transitions.items()}
    return BundleCocycle(
        f"V({bundle.name})", atlas, bundle.rank, fiber_actions, transitions, source=bundle
    )


@dataclass
class ZeroSectionRestriction:
    bundle: BundleCocycle
    certificate: float


def restrict_to_zero_section(vertical: BundleCocycle) -> ZeroSectionRestriction:
    """
    Restringe VE a la sección cero (v = 0) y compara con E entrada a entrada.

    Returns:
        ZeroSectionRestriction con el fibrado restringido y la desviación máxima

    Raises:
        CertificateError: si la desviación supera CERTIFICATE_TOL
    """
    if vertical.source is None:
        raise BundleError("la restricción a la sección cero necesita un fibrado vertical")
    original = vertical.source
    atlas = original.base
    transitions: Dict[str, ExprMatrix] = {}
    for arrow in atlas.arrows():
        zero = {j: ZERO for j in fiber_variables(original, arrow.src)}
        transitions[arrow.id] = substitute_matrix(vertical.transition(arrow.id), zero)
    restricted = BundleCocycle(
        f"{vertical.name}|0",
        atlas,
        vertical.rank,
        dict(vertical.fiber_actions),
        transitions,
    )
    certificate = 0.0
    if original.rank:
        for arrow in atlas.arrows():
            points = _points_for(atlas, arrow)
            deviation = evaluate_matrix(transitions[arrow.id], points) - evaluate_matrix(
                original.transition(arrow.id), points
            )
            certificate = max(certificate, _max_abs(deviation))
    if certificate > settings.CERTIFICATE_TOL:
        raise CertificateError(
            f"VE|0 difiere de {original.name}: desviación {certificate:.3e}"
        )
    return ZeroSectionRestriction(restricted, certificate)


def pullback_along_projection(bundle: BundleCocycle, total: Optional[Atlas] = None) -> BundleCocycle:
    """rho*E sobre el espacio total: transiciones g_i compuestas con la proyección (x, v) -> x"""
    atlas = total if total is not None else total_space(bundle)
    transitions = {}
    for arrow in bundle.base.arrows():
        n = bundle.base.chart(arrow.src).dim
        projection = [var(j) for j in range(1, n + 1)]
        transitions[arrow.id] = tuple(
            tuple(compose(e, projection) for e in row) for row in bundle.transition(arrow.id)
        )
    return BundleCocycle(
        f"rho*({bundle.name})",
        atlas,
        bundle.rank,
        {cid: bundle.fiber_action(cid) for cid in bundle.base.chart_ids},
        transitions,
    )


def pullback_matches_vertical(bundle: BundleCocycle) -> bool:
    """rho*E y VE tienen las mismas transiciones, símbolo a símbolo"""
    total = total_space(bundle)
    pulled = pullback_along_projection(bundle, total)
    vertical = vertical_bundle(bundle, total)
    return all(
        pulled.transition(aid) == vertical.transition(aid) for aid in bundle.transitions
    )


def fiber_kernel_report(bundle: BundleCocycle) -> Report:
    """¿Actúa K_f trivialmente sobre el espacio total de VE?"""
    report = Report(title=f"núcleo de fibra de {bundle.name}")
    total = total_space(bundle)
    vertical = vertical_bundle(bundle, total)
    charts = {}
    for chart in bundle.base.charts:
        kf = action_kernel(bundle.total_action(chart.id))
        on_ve = action_kernel(vertical.total_action(chart.id))
        trivial = kf.elements <= on_ve.elements
        charts[chart.id] = {"K_f": kf.labels(), "nontrivial": not kf.is_trivial, "acts_trivially": trivial}
        if not trivial:
            report.add(CheckKind.EQUIVARIANCE, chart.id, "K_f no actúa trivialmente sobre VE")
    report.content = {"charts": charts}
    return report


def reduce_bundle(bundle: BundleCocycle) -> BundleCocycle:
    """
    Fibrado reducido E_red sobre Q_red: cada grupo se cociente por su núcleo K_b.

    Raises:
        BundleError: si el fibrado es malo (la acción de fibra no desciende)
    """
    verdict = classify(bundle)
    if not verdict.is_good:
        raise BundleError("sólo los fibrados buenos descienden al orbifold reducido")
    projections: Dict[str, List[int]] = {}
    charts = []
    fiber_actions = {}
    for chart in bundle.base.charts:
        quotient, projection = quotient_group(chart.group, verdict.base_kernels[chart.id])
        projections[chart.id] = projection
        reps = [projection.index(c) for c in range(quotient.order)]
        action = Representation(quotient, chart.dim, tuple(chart.action.matrix(g) for g in reps))
        charts.append(Chart(chart.id, chart.domain, quotient, action))
        fiber = bundle.fiber_action(chart.id)
        fiber_actions[chart.id] = Representation(
            quotient, bundle.rank, tuple(fiber.matrix(g) for g in reps)
        )

    def descend(arrow: Arrow) -> Tuple[int, ...]:
        src_proj, dst_proj = projections[arrow.src], projections[arrow.dst]
        size = max(src_proj) + 1
        return tuple(dst_proj[arrow.lam[src_proj.index(c)]] for c in range(size))

    injections = tuple(
        Injection(i.id, i.src, i.dst, i.images, descend(i), i.matrix, i.translation)
        for i in bundle.base.injections
    )
    overlaps = tuple(
        Overlap(o.id, o.src, o.dst, o.images, descend(o), o.region) for o in bundle.base.overlaps
    )
    atlas = Atlas(
        f"{bundle.base.name}_red", tuple(charts), injections, bundle.base.compositions, overlaps
    )
    return BundleCocycle(
        f"{bundle.name}_red", atlas, bundle.rank, fiber_actions, dict(bundle.transitions)
    )


# Secciones


@dataclass(frozen=True, eq=False)
class Section:
    """Sección: vector de k expresiones por carta"""

    name: str
    bundle: BundleCocycle
    components: Mapping[str, Tuple[Expr, ...]]

    def component(self, chart_id: str) -> Tuple[Expr, ...]:
        try:
            return self.components[chart_id]
        except KeyError:
            raise SectionError(f"la sección '{self.name}' no está definida en '{chart_id}'") from None

    def to_dict(self) -> Dict[str, List[str]]:
        return {cid: [to_text(e) for e in values] for cid, values in self.components.items()}


def make_section(name: str, bundle: BundleCocycle, components: Mapping[str, Sequence[object]]) -> Section:
    return Section(
        name, bundle, {cid: tuple(as_expr(e) for e in values) for cid, values in components.items()}
    )


def _evaluate_vector(values: Sequence[Expr], points: np.ndarray) -> np.ndarray:
    m = points.shape[1]
    if not values:
        return np.zeros((0, m))
    return np.vstack([np.broadcast_to(evaluate(e, points), (m,)) for e in values])


def validate_section(bundle: BundleCocycle, section: Section) -> Report:
    """
    Equivarianza, compatibilidad a través de las inyecciones y no anulación.

    Returns:
        Report; content["nonvanishing"] y content["min_norm"] describen si se anula
    """
    report = Report(title=f"sección {section.name}")
    k = bundle.rank
    atlas = bundle.base
    min_norm = np.inf
    for chart in atlas.charts:
        values = section.components.get(chart.id)
        if values is None or len(values) != k:
            report.add(CheckKind.REFERENCE, chart.id, f"se esperaban {k} componentes")
            continue
        rho = bundle.fiber_action(chart.id)
        points = chart.sample_points()
        try:
            s = _evaluate_vector(values, points)
            residual = 0.0
            for g in chart.group.elements:
                moved = _evaluate_vector(values, chart.action.matrix(g) @ points)
                residual = max(residual, _max_abs(moved - rho.matrix(g) @ s))
            report.check(
                residual,
                settings.EQUIVARIANCE_TOL,
                CheckKind.EQUIVARIANCE,
                chart.id,
                "s(g x) != rho(g) s(x)",
            )
            extra = chart.domain.random_points(
                sample_rng(f"nonvanishing:{chart.id}"), settings.NONVANISHING_SAMPLES
            )
            both = np.hstack([s, _evaluate_vector(values, extra)])
        except EvaluationDomainError as exc:
            report.add(CheckKind.DOMAIN, chart.id, f"sección no evaluable: {exc}")
            continue
        norms = np.linalg.norm(both, axis=0) if k else np.zeros(both.shape[1])
        min_norm = min(min_norm, float(np.min(norms)))
    if report.success:
        for arrow in atlas.arrows():
            points = _points_for(atlas, arrow)
            s_src = _evaluate_vector(section.component(arrow.src), points)
            s_dst = _evaluate_vector(section.component(arrow.dst), arrow.apply(points))
            if k:
                g = _batched(evaluate_matrix(bundle.transition(arrow.id), points))
                expected = np.einsum("mij,jm->im", g, s_src)
            else:
                expected = s_dst
            report.check(
                _max_abs(s_dst - expected),
                settings.EQUIVARIANCE_TOL,
                CheckKind.COMPATIBILITY,
                arrow.id,
                "s2(phi(x)) != g(x) s1(x)",
            )
    min_norm = 0.0 if min_norm == np.inf else min_norm
    report.content = {
        "nonvanishing": bool(k > 0 and min_norm >= settings.NONVANISHING_THRESHOLD),
        "min_norm": min_norm,
    }
    return report


def require_nonvanishing(bundle: BundleCocycle, section: Section) -> Report:
    """Valida la sección y exige que no se anule"""
    report = validate_section(bundle, section)
    if not report.success:
        raise SectionError(f"sección '{section.name}' inválida: {report.violations[0].message}")
    if not report.content["nonvanishing"]:
        raise SectionError(
            f"la sección '{section.name}' se anula: mínimo |s| = {report.content['min_norm']:.3e}"
        )
    return report


def lift_section(
    bundle: BundleCocycle, section: Section, vertical: Optional[BundleCocycle] = None
) -> Section:
    """ŝ(x, v) = s(x): constante a lo largo de cada fibra"""
    target = vertical if vertical is not None else vertical_bundle(bundle)
    return Section(f"lift({section.name})", target, dict(section.components))


def restrict_section(vertical: BundleCocycle, section: Section) -> Section:
    """
    Sustituye v = 0 y devuelve la sección del fibrado original. Las componentes
    sin variables de fibra se devuelven tal cual, así restrict(lift(s)) == s
    también como árbol.
    """
    if vertical.source is None:
        raise SectionError("restrict_section necesita una sección de VE")
    original = vertical.source
    components = {}
    for chart_id, values in section.components.items():
        zero = {j: ZERO for j in fiber_variables(original, chart_id)}
        components[chart_id] = tuple(
            substitute(e, zero) if not variables(e).isdisjoint(zero) else e for e in values
        )
    name = section.name[5:-1] if section.name.startswith("lift(") else f"{section.name}|0"
    return Section(name, original, components)

