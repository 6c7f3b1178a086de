"""
Sectores torcidos: clases de equivalencia de clases de conjugación locales,
atlas de los conjuntos fijos {V^g, C(g)}, números de desplazamiento de grado,
la restricción ι* a la sección cero y la retracción H_t.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.orbibundle.config import settings
from src.orbibundle.core.atlas import (
    Atlas,
    Chart,
    Composition,
    Injection,
    Overlap,
    affine_images,
    evaluate_images,
    exact_number,
)
from src.orbibundle.core.bundles import BundleCocycle, Section, total_space
from src.orbibundle.core.domains import sample_rng, slice_domain
from src.orbibundle.core.expr import ZERO, Expr, as_expr, compose, mul, var
from src.orbibundle.core.forms import (
    ExprMatrix,
    FormExpr,
    constant_matrix,
    drop_differentials,
    expr_matmul,
    expr_matvec,
    form_to_text,
    substitute_form,
)
from src.orbibundle.core.groups import (
    FiniteGroup,
    Representation,
    centralizer,
    conjugacy_classes,
    fixed_subspace,
    is_injective,
    restrict_representation,
)
from src.orbibundle.core.report import CheckKind, Report
from src.orbibundle.errors import AtlasError, DegreeShiftError, SectorError

logger = logging.getLogger(__name__)

Node = Tuple[str, int]
Arrow = Union[Injection, Overlap]


class _DisjointSets:
    """Unión-búsqueda con compresión de caminos"""

    def __init__(self, nodes: Iterable[Node]):
        self.parent: Dict[Node, Node] = {node: node for node in nodes}

    def find(self, node: Node) -> Node:
        root = node
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[node] != root:
            self.parent[node], node = root, self.parent[node]
        return root

    def union(self, a: Node, b: Node) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # la raíz es siempre el nodo menor
            low, high = min(ra, rb), max(ra, rb)
            self.parent[high] = low

    def groups(self) -> List[List[Node]]:
        grouped: Dict[Node, List[Node]] = {}
        for node in self.parent:
            grouped.setdefault(self.find(node), []).append(node)
        return [sorted(members) for members in grouped.values()]


@dataclass(frozen=True)
class SectorMember:
    """Clase de conjugación `class_index` de la carta `chart`, con su representante mínimo"""

    chart: str
    class_index: int
    representative: int


@dataclass(frozen=True)
class SectorClass:
    index: int
    label: str
    members: Tuple[SectorMember, ...]

    @property
    def untwisted(self) -> bool:
        return self.index == 0

    @property
    def nodes(self) -> FrozenSet[Node]:
        return frozenset((m.chart, m.class_index) for m in self.members)

    def members_in(self, chart_id: str) -> List[SectorMember]:
        return [m for m in self.members if m.chart == chart_id]

    def to_dict(self) -> Dict[str, object]:
        return {
            "index": self.index,
            "label": self.label,
            "untwisted": self.untwisted,
            "members": [[m.chart, m.class_index] for m in self.members],
        }


@dataclass(frozen=True)
class SectorCensus:
    """Partición de los pares (carta, clase de conjugación); la clase 0 es la no torcida"""

    atlas: str
    classes: Tuple[SectorClass, ...]

    @property
    def untwisted(self) -> SectorClass:
        return self.classes[0]

    def __len__(self) -> int:
        return len(self.classes)

    def class_of(self, chart_id: str, class_index: int) -> SectorClass:
        for sector in self.classes:
            if (chart_id, class_index) in sector.nodes:
                return sector
        raise SectorError(f"({chart_id}, {class_index}) no pertenece al censo de '{self.atlas}'")

    def by_label(self, label: str) -> SectorClass:
        for sector in self.classes:
            if sector.label == label or str(sector.index) == label:
                return sector
        raise SectorError(f"sector desconocido '{label}'")

    def structure(self) -> List[FrozenSet[Node]]:
        return [sector.nodes for sector in self.classes]

    def to_dict(self) -> Dict[str, object]:
        return {"atlas": self.atlas, "classes": [sector.to_dict() for sector in self.classes]}


def _class_lookup(group: FiniteGroup) -> Tuple[List[FrozenSet[int]], Dict[int, int]]:
    classes = conjugacy_classes(group)
    return classes, {g: k for k, cls in enumerate(classes) for g in cls}


def sector_census(atlas: Atlas) -> SectorCensus:
    """
    Clases de equivalencia T de clases de conjugación locales.

    Dos clases se identifican cuando el lambda de una inyección (o de un overlap
    con lambda inyectivo) lleva una en la otra. Las identidades de todas las
    cartas forman la clase no torcida.

    Args:
        atlas: Atlas validado

    Returns:
        SectorCensus ordenado por (carta mínima, índice de clase), no torcida primero
    """
    lookups = {chart.id: _class_lookup(chart.group) for chart in atlas.charts}
    nodes = [(cid, k) for cid, (classes, _) in lookups.items() for k in range(len(classes))]
    sets = _DisjointSets(nodes)

    identities = [(chart.id, lookups[chart.id][1][chart.group.identity]) for chart in atlas.charts]
    for node in identities[1:]:
        sets.union(identities[0], node)

    for arrow in atlas.arrows():
        if isinstance(arrow, Overlap) and not is_injective(arrow.lam):
            logger.debug("overlap %s con lambda no inyectivo: no transporta clases", arrow.id)
            continue
        src_lookup, dst_lookup = lookups[arrow.src][1], lookups[arrow.dst][1]
        for g, image in enumerate(arrow.lam):
            sets.union((arrow.src, src_lookup[g]), (arrow.dst, dst_lookup[image]))

    untwisted_root = sets.find(identities[0]) if identities else None
    groups = sets.groups()
    groups.sort(key=lambda members: (sets.find(members[0]) != untwisted_root, members[0]))

    classes = []
    for index, members in enumerate(groups):
        sector_members = tuple(
            SectorMember(cid, k, min(lookups[cid][0][k])) for cid, k in members
        )
        first = sector_members[0]
        label = f"({atlas.chart(first.chart).group.labels[first.representative]})"
        classes.append(SectorClass(index, label, sector_members))
    logger.debug("censo de %s: %d clases", atlas.name, len(classes))
    return SectorCensus(atlas.name, tuple(classes))


@dataclass
class CensusCoincidence:
    coincide: bool
    matching: Dict[int, int]
    counterexample: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "coincide": self.coincide,
            "matching": {str(k): v for k, v in self.matching.items()},
            "counterexample": self.counterexample,
        }


def census_coincidence(bundle: BundleCocycle, total: Optional[Atlas] = None) -> CensusCoincidence:
    """
    Compara el censo de Q con el del espacio total E identificando cartas y grupos.

    Returns:
        CensusCoincidence con el emparejamiento de índices o un contraejemplo
    """
    base = sector_census(bundle.base)
    lifted = sector_census(total if total is not None else total_space(bundle))
    lifted_index = {sector.nodes: sector.index for sector in lifted.classes}
    matching: Dict[int, int] = {}
    for sector in base.classes:
        if sector.nodes not in lifted_index:
            return CensusCoincidence(
                False, matching, f"la clase {sector.label} de Q no aparece en E"
            )
        matching[sector.index] = lifted_index[sector.nodes]
    if len(lifted.classes) != len(base.classes):
        return CensusCoincidence(False, matching, "E tiene clases sin correspondencia en Q")
    return CensusCoincidence(True, matching)


# Atlas de sectores


@dataclass(frozen=True)
class SectorChartData:
    """Carta de sector: base de V^g, centralizador y mapas de índices con el grupo padre"""

    member: SectorMember
    basis: np.ndarray
    centralizer: Tuple[int, ...]
    position: Mapping[int, int]


@dataclass(frozen=True)
class SectorArrowData:
    """Flecha de sector: flecha padre y conjugador k del destino (k^-1 lambda(g) k = g')"""

    parent: str
    src: SectorMember
    dst: SectorMember
    conjugator: int


@dataclass(frozen=True, eq=False)
class SectorAtlas:
    atlas: Atlas
    sector: SectorClass
    parent: Atlas
    charts: Mapping[str, SectorChartData]
    arrows: Mapping[str, SectorArrowData] = field(default_factory=dict)

    def basis(self, chart_id: str) -> np.ndarray:
        return self.charts[chart_id].basis

    def chart_for(self, member: SectorMember) -> str:
        for cid, data in self.charts.items():
            if data.member == member:
                return cid
        raise SectorError(f"{member} no tiene carta en el sector {self.sector.label}")


def _sector_chart_id(sector: SectorClass, member: SectorMember) -> str:
    if len(sector.members_in(member.chart)) == 1:
        return member.chart
    return f"{member.chart}:{member.class_index}"


def _sector_arrow_id(sector: SectorClass, arrow: Arrow, member: SectorMember) -> str:
    if len(sector.members_in(arrow.src)) == 1:
        return arrow.id
    return f"{arrow.id}:{member.class_index}"


def _clean(matrix: np.ndarray) -> np.ndarray:
    cleaned = np.array(matrix, dtype=float)
    cleaned[np.abs(cleaned) < 1e-14] = 0.0
    return cleaned


def _find_conjugator(group: FiniteGroup, image: int, representative: int) -> int:
    """k con k^-1 image k = representative, empezando por la identidad"""
    candidates = [group.identity] + [k for k in group.elements if k != group.identity]
    for k in candidates:
        if group.conjugate(image, group.inverse(k)) == representative:
            return k
    raise SectorError(
        f"{group.labels[image]} no es conjugado de {group.labels[representative]} en {group.name}"
    )


def _linear_images(matrix: np.ndarray, exprs: Sequence[Expr]) -> Tuple[Expr, ...]:
    return expr_matvec(constant_matrix([[exact_number(a) for a in row] for row in matrix]), exprs)


def sector_atlas(atlas: Atlas, sector: SectorClass) -> SectorAtlas:
    """
    Atlas del sector (g): cartas V^g con coordenadas en la base de fixed_subspace y
    grupo C(g) actuando por restricción; flechas inducidas por las del atlas que
    transportan la clase.

    Args:
        atlas: Atlas padre (Q o el espacio total E)
        sector: Clase del censo del mismo atlas

    Returns:
        SectorAtlas con el atlas y los datos de reconstrucción

    Raises:
        SectorError: si la clase no tiene miembros en el atlas
    """
    if not sector.members:
        raise SectorError(f"la clase {sector.label} está vacía")
    lookups = {chart.id: _class_lookup(chart.group)[1] for chart in atlas.charts}
    member_of = {(m.chart, m.class_index): m for m in sector.members}

    charts: List[Chart] = []
    chart_data: Dict[str, SectorChartData] = {}
    for member in sector.members:
        parent = atlas.chart(member.chart)
        basis = fixed_subspace(parent.action, member.representative)
        cent = centralizer(parent.group, member.representative)
        action, position = restrict_representation(parent.action, cent, basis)
        cid = _sector_chart_id(sector, member)
        group = FiniteGroup(
            f"C{sector.label}@{member.chart}", action.group.table, action.group.labels,
            action.group.identity,
        )
        action = Representation(group, action.dim, action.matrices)
        charts.append(Chart(cid, slice_domain(parent.domain, basis), group, action))
        chart_data[cid] = SectorChartData(member, basis, tuple(cent.sorted_elements()), position)

    def restricted_lam(arrow: Arrow, src: SectorChartData, dst: SectorChartData, k: int) -> Tuple[int, ...]:
        group = atlas.chart(arrow.dst).group
        lam = []
        for g in src.centralizer:
            image = group.conjugate(arrow.lam[g], group.inverse(k))
            if image not in dst.position:
                raise SectorError(f"{arrow.id}: lambda no preserva los centralizadores")
            lam.append(dst.position[image])
        return tuple(lam)

    injections: List[Injection] = []
    overlaps: List[Overlap] = []
    arrow_data: Dict[str, SectorArrowData] = {}
    for arrow in atlas.arrows():
        for member in sector.members_in(arrow.src):
            image = arrow.lam[member.representative]
            target = member_of.get((arrow.dst, lookups[arrow.dst][image]))
            if target is None:
                continue
            dst_chart = atlas.chart(arrow.dst)
            k = _find_conjugator(dst_chart.group, image, target.representative)
            src_id, dst_id = _sector_chart_id(sector, member), _sector_chart_id(sector, target)
            src_data, dst_data = chart_data[src_id], chart_data[dst_id]
            linear = _clean(dst_data.basis.T @ dst_chart.action.matrix(dst_chart.group.inverse(k)))
            lam = restricted_lam(arrow, src_data, dst_data, k)
            aid = _sector_arrow_id(sector, arrow, member)
            if isinstance(arrow, Injection) and arrow.is_affine:
                matrix = _clean(linear @ arrow.array @ src_data.basis)
                shift = _clean(linear @ arrow.shift[:, np.newaxis])[:, 0]
                injections.append(Injection.affine(aid, src_id, dst_id, matrix, shift, lam))
            else:
                embedding = affine_images(src_data.basis, [0] * src_data.basis.shape[0])
                images = _linear_images(linear, [compose(e, embedding) for e in arrow.images])
                if isinstance(arrow, Injection):
                    injections.append(Injection(aid, src_id, dst_id, images, lam))
                else:
                    try:
                        region = slice_domain(arrow.region, src_data.basis)
                    except AtlasError:
                        logger.debug("overlap %s: el conjunto fijo no corta la región", arrow.id)
                        continue
                    overlaps.append(Overlap(aid, src_id, dst_id, images, lam, region))
            arrow_data[aid] = SectorArrowData(arrow.id, member, target, k)

    compositions = []
    by_parent: Dict[Tuple[str, SectorMember], str] = {
        (data.parent, data.src): aid for aid, data in arrow_data.items()
    }
    for comp in atlas.compositions:
        for member in sector.members_in(atlas.injection(comp.first).src):
            first = by_parent.get((comp.first, member))
            result = by_parent.get((comp.result, member))
            if first is None or result is None:
                continue
            second = by_parent.get((comp.second, arrow_data[first].dst))
            if second is None:
                continue
            ks = [arrow_data[a].conjugator for a in (first, second, result)]
            identities = [
                atlas.chart(arrow_data[a].dst.chart).group.identity for a in (first, second, result)
            ]
            if ks == identities:
                compositions.append(Composition(first, second, result))

    name = f"{atlas.name}{sector.label}"
    result_atlas = Atlas(name, tuple(charts), tuple(injections), tuple(compositions), tuple(overlaps))
    return SectorAtlas(result_atlas, sector, atlas, chart_data, arrow_data)


# Desplazamientos de grado


def _unitary(rep: Representation, g: int) -> np.ndarray:
    if rep.unitary is None:
        raise DegreeShiftError(f"la acción de {rep.group.name} no declara estructura compleja")
    return np.asarray(rep.unitary[g], dtype=complex)


def degree_shift(rep: Representation, g: int) -> Fraction:
    """
    Número de desplazamiento de grado de g: autovalores e^{2 pi i m_j / m} de la
    matriz unitaria, con m el orden de g, y resultado sum m_j / m.

    Raises:
        DegreeShiftError: sin estructura compleja o si un autovalor no es raíz m-ésima de la unidad
    """
    u = _unitary(rep, g)
    m = rep.group.element_order(g)
    total = 0
    for eigenvalue in np.linalg.eigvals(u) if u.size else []:
        angle = float(np.angle(eigenvalue)) % (2 * np.pi)
        j = int(round(m * angle / (2 * np.pi))) % m
        if abs(np.exp(2j * np.pi * j / m) - eigenvalue) > 1e-8:
            raise DegreeShiftError(
                f"el autovalor {eigenvalue:.6g} de {rep.group.labels[g]} no es raíz {m}-ésima de la unidad"
            )
        total += j
    return Fraction(total, m)


def fixed_codimension(rep: Representation, g: int) -> int:
    """Codimensión compleja del conjunto fijo de g (autovalores distintos de 1)"""
    u = _unitary(rep, g)
    if not u.size:
        return 0
    return int(np.sum(np.abs(np.linalg.eigvals(u) - 1.0) > 1e-8))


def sector_shift(atlas: Atlas, sector: SectorClass) -> Optional[Fraction]:
    """Desplazamiento del sector en su primer miembro; None sin estructura compleja"""
    member = sector.members[0]
    action = atlas.chart(member.chart).action
    if action.unitary is None:
        return None
    if sector.untwisted:
        return Fraction(0)
    return degree_shift(action, member.representative)


@dataclass
class ShiftEntry:
    sector: SectorClass
    shift: Optional[Fraction]
    codimension: Optional[int]
    inverse_shift: Optional[Fraction] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "sector": self.sector.label,
            "shift": None if self.shift is None else str(self.shift),
            "codimension": self.codimension,
            "inverse_shift": None if self.inverse_shift is None else str(self.inverse_shift),
        }


def degree_shift_table(atlas: Atlas, census: Optional[SectorCensus] = None) -> List[ShiftEntry]:
    """Desplazamiento de cada sector, el de g^-1 y la codimensión compleja del conjunto fijo"""
    census = census or sector_census(atlas)
    entries = []
    for sector in census.classes:
        member = sector.members[0]
        chart = atlas.chart(member.chart)
        shift = sector_shift(atlas, sector)
        if shift is None:
            entries.append(ShiftEntry(sector, None, None))
            continue
        g = member.representative
        inverse = degree_shift(chart.action, chart.group.inverse(g))
        entries.append(ShiftEntry(sector, shift, fixed_codimension(chart.action, g), inverse))
    return entries


# Clases de orbifold


@dataclass
class ClassComponent:
    """Componente de una clase sobre el sector `sector`: formas representantes e integral"""

    sector: SectorClass
    shift: Optional[Fraction]
    form_degree: int
    forms: Dict[str, FormExpr]
    integral: Optional[float] = None
    quadrature_order: Optional[int] = None
    notes: Tuple[str, ...] = ()

    @property
    def degree(self) -> Optional[Fraction]:
        if self.shift is None:
            return None
        return self.form_degree + 2 * self.shift

    def to_dict(self) -> Dict[str, object]:
        return {
            "sector": self.sector.label,
            "form_degree": self.form_degree,
            "shift": None if self.shift is None else str(self.shift),
            "degree": None if self.degree is None else str(self.degree),
            "forms": {cid: form_to_text(form) for cid, form in self.forms.items()},
            "integral": self.integral,
            "quadrature_order": self.quadrature_order,
            "notes": list(self.notes),
        }


@dataclass
class OrbifoldClass:
    name: str
    atlas: str
    components: List[ClassComponent]
    origin: Optional["OrbifoldClass"] = None

    @property
    def graded(self) -> bool:
        return all(c.shift is not None for c in self.components)

    def component(self, sector_index: int) -> ClassComponent:
        for c in self.components:
            if c.sector.index == sector_index:
                return c
        raise SectorError(f"la clase {self.name} no tiene componente en el sector {sector_index}")

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "atlas": self.atlas,
            "graded": self.graded,
            "components": [c.to_dict() for c in self.components],
            "origin": None if self.origin is None else self.origin.to_dict(),
        }


def _zero_section_form(form: FormExpr, base_dim: int) -> FormExpr:
    """Pullback por y -> (y, 0): v = 0 y dv = 0"""
    fiber = {j: ZERO for j in range(base_dim + 1, form.dim + 1)}
    return drop_differentials(substitute_form(form, fiber), base_dim)


def iota_star(
    bundle: BundleCocycle,
    cls: OrbifoldClass,
    base_census: Optional[SectorCensus] = None,
    total: Optional[Atlas] = None,
) -> OrbifoldClass:
    """
    ι* = ⊕ ι*_(g): restringe cada componente de una clase sobre los sectores de E
    a los sectores de Q sustituyendo v = 0 y dv = 0, y la regradúa con el
    desplazamiento de Q.

    Args:
        bundle: Fibrado E
        cls: Clase sobre los sectores del espacio total
        base_census: Censo de Q ya calculado (opcional)
        total: Espacio total ya construido (opcional)

    Returns:
        OrbifoldClass sobre Q, sin integrales
    """
    total = total if total is not None else total_space(bundle)
    base_census = base_census or sector_census(bundle.base)
    coincidence = census_coincidence(bundle, total)
    if not coincidence.coincide:
        raise SectorError(f"los censos de Q y E no coinciden: {coincidence.counterexample}")
    inverse = {lifted: base for base, lifted in coincidence.matching.items()}

    components = []
    for component in cls.components:
        sector = base_census.classes[inverse[component.sector.index]]
        base_sector = sector_atlas(bundle.base, sector)
        forms = {}
        for cid, form in component.forms.items():
            base_dim = base_sector.atlas.chart(cid).dim
            forms[cid] = _zero_section_form(form, base_dim)
        components.append(
            ClassComponent(sector, sector_shift(bundle.base, sector), component.form_degree, forms)
        )
    return OrbifoldClass(f"ι*{cls.name}", bundle.base.name, components)


def retraction_images(chart: Chart, base_dim: int, t: Fraction) -> Tuple[Expr, ...]:
    """H_t(y, w) = (y, t w) en una carta de sector del espacio total"""
    scale = as_expr(t)
    return tuple(
        var(j) if j <= base_dim else mul(scale, var(j)) for j in range(1, chart.dim + 1)
    )


def retraction_check(
    bundle: BundleCocycle,
    sector: SectorClass,
    t_samples: Sequence[Fraction] = (Fraction(0), Fraction(1, 2), Fraction(1)),
    total: Optional[Atlas] = None,
) -> Report:
    """
    Comprueba la retracción H_t sobre las cartas del sector de E: H_1 es la
    identidad y H_0 = ι_(g) o proyección de forma simbólica, y H_t deja el dominio
    de la carta dentro de sí mismo y conmuta con la acción de C(g).

    Args:
        bundle: Fibrado E
        sector: Clase del censo de E
        t_samples: Valores de t en [0, 1]
        total: Espacio total ya construido (opcional)

    Returns:
        Report con los residuos por carta y por t
    """
    total = total if total is not None else total_space(bundle)
    lifted = sector_atlas(total, sector)
    base = sector_atlas(bundle.base, sector_census(bundle.base).class_of(
        sector.members[0].chart, sector.members[0].class_index
    ))
    report = Report(f"retracción {sector.label}")
    residuals: Dict[str, float] = {}
    for chart in lifted.atlas.charts:
        base_dim = base.atlas.chart(chart.id).dim
        identity = tuple(var(j) for j in range(1, chart.dim + 1))
        projection = tuple(var(j) if j <= base_dim else ZERO for j in range(1, chart.dim + 1))
        if retraction_images(chart, base_dim, Fraction(1)) != identity:
            report.add(CheckKind.RETRACTION, chart.id, "H_1 no es la identidad")
        if retraction_images(chart, base_dim, Fraction(0)) != projection:
            report.add(CheckKind.RETRACTION, chart.id, "H_0 no es la proyección a la sección cero")
        points = chart.domain.sample_points(sample_rng(f"retraction:{chart.id}"))
        for t in t_samples:
            if not 0 <= t <= 1:
                raise SectorError(f"t = {t} fuera de [0, 1]")
            images = retraction_images(chart, base_dim, Fraction(t))
            moved = evaluate_images(images, points)
            inside = chart.domain.contains(moved)
            if not bool(np.all(inside)):
                report.add(CheckKind.RETRACTION, chart.id, f"H_{t} sale del dominio")
            worst = 0.0
            for h in chart.group.elements:
                m = chart.action.matrix(h)
                worst = max(worst, float(np.max(np.abs(
                    _retract(m @ points, base_dim, float(t)) - m @ _retract(points, base_dim, float(t))
                ), initial=0.0)))
            residuals[f"{chart.id}@{t}"] = worst
            report.check(worst, settings.EQUIVARIANCE_TOL, CheckKind.RETRACTION, chart.id,
                         f"H_{t} no conmuta con C(g)")
    report.content = {"sector": sector.label, "residuals": residuals}
    return report


def _retract(points: np.ndarray, base_dim: int, t: float) -> np.ndarray:
    moved = np.array(points, dtype=float)
    moved[base_dim:] *= t
    return moved


# Fibrado y sección sobre un sector


def fiber_fixed_basis(bundle: BundleCocycle, member: SectorMember) -> np.ndarray:
    """Base de (R^k)^g en la carta del miembro"""
    return fixed_subspace(bundle.fiber_action(member.chart), member.representative)


def sector_bundle(bundle: BundleCocycle, sector: SectorClass, sectors: Optional[SectorAtlas] = None) -> BundleCocycle:
    """
    Fibrado Ẽ_(g) sobre el atlas del sector de Q: fibra (R^k)^g con la acción
    restringida de C(g) y transiciones C_dst^T rho(k^-1) g(B y) C_src.

    Raises:
        SectorError: si el rango de (R^k)^g cambia entre cartas
    """
    sectors = sectors or sector_atlas(bundle.base, sector)
    fiber_bases = {cid: fiber_fixed_basis(bundle, data.member) for cid, data in sectors.charts.items()}
    ranks = {basis.shape[1] for basis in fiber_bases.values()}
    if len(ranks) != 1:
        raise SectorError(f"el rango de la fibra fija varía en el sector {sector.label}: {sorted(ranks)}")
    rank = ranks.pop()

    fiber_actions = {}
    for cid, data in sectors.charts.items():
        chart = sectors.atlas.chart(cid)
        cent = centralizer(bundle.base.chart(data.member.chart).group, data.member.representative)
        restricted, _ = restrict_representation(
            bundle.fiber_action(data.member.chart), cent, fiber_bases[cid]
        )
        fiber_actions[cid] = Representation(chart.group, rank, restricted.matrices)

    transitions: Dict[str, ExprMatrix] = {}
    for aid, data in sectors.arrows.items():
        arrow = sectors.atlas.injection_map.get(aid) or sectors.atlas.overlap_map[aid]
        src_id, dst_id = arrow.src, arrow.dst
        parent_dst = bundle.base.chart(data.dst.chart)
        embedding = affine_images(sectors.basis(src_id), [0] * sectors.basis(src_id).shape[0])
        g = tuple(tuple(compose(e, embedding) for e in row) for row in bundle.transition(data.parent))
        left = _clean(
            fiber_bases[dst_id].T
            @ bundle.fiber_action(data.dst.chart).matrix(parent_dst.group.inverse(data.conjugator))
        )
        right = _clean(fiber_bases[src_id])
        transitions[aid] = expr_matmul(
            expr_matmul(_constant(left), g), _constant(right)
        )
    return BundleCocycle(
        f"{bundle.name}{sector.label}", sectors.atlas, rank, fiber_actions, transitions
    )


def _constant(matrix: np.ndarray) -> ExprMatrix:
    return constant_matrix([[exact_number(a) for a in row] for row in matrix])


def sector_section(
    bundle: BundleCocycle, section: Section, sector: SectorClass,
    restricted: Optional[BundleCocycle] = None, sectors: Optional[SectorAtlas] = None,
) -> Section:
    """Restricción s~(y) = C^T s(B y) de una sección equivariante al sector"""
    sectors = sectors or sector_atlas(bundle.base, sector)
    restricted = restricted or sector_bundle(bundle, sector, sectors)
    components = {}
    for cid, data in sectors.charts.items():
        basis = sectors.basis(cid)
        embedding = affine_images(basis, [0] * basis.shape[0])
        values = [compose(e, embedding) for e in section.component(data.member.chart)]
        fiber = _clean(fiber_fixed_basis(bundle, data.member).T)
        components[cid] = _linear_images(fiber, values)
    return Section(f"{section.name}{sector.label}", restricted, components)
