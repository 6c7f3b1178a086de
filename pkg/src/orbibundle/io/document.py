"""
Documento de entrada y salida (JSON): esquema pydantic, carga y volcado.

Los números aceptan enteros, decimales y racionales exactos "a/b"; las
expresiones y formas se escriben con la gramática de core.expr.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.orbibundle.core.atlas import Atlas, Chart, Composition, Injection, Overlap
from src.orbibundle.core.bundles import BundleCocycle, Section, make_section
from src.orbibundle.core.chernweil import (
    ConnectionData,
    PartitionOfUnity,
    connection_from_texts,
    flat_connection,
    partition_from_texts,
    trivial_partition,
)
from src.orbibundle.core.domains import domain_from_dict
from src.orbibundle.core.expr import as_expr, parse_number, to_text
from src.orbibundle.core.forms import expr_matrix, form_to_text, matrix_to_text
from src.orbibundle.core.groups import FiniteGroup, Representation
from src.orbibundle.errors import DocumentError, OrbiError
from src.orbibundle.gallery.base import Example

logger = logging.getLogger(__name__)

Number = Union[int, float, str]
Matrix = List[List[Number]]
ComplexMatrix = List[List[Tuple[Number, Number]]]


# Esquema


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class GroupModel(_Model):
    name: str
    order: Optional[int] = None
    table: List[List[int]]
    labels: Optional[List[str]] = None


class ChartModel(_Model):
    id: str
    dim: Optional[int] = None
    domain: Dict[str, Any]
    group: str
    action: List[Matrix]
    complex_structure: Optional[List[ComplexMatrix]] = None


class InjectionModel(_Model):
    id: str
    src: str
    dst: str
    lam: List[int] = Field(alias="lambda")
    matrix: Optional[Matrix] = None
    translation: Optional[List[Number]] = None
    images: Optional[List[str]] = None


class OverlapModel(_Model):
    id: str
    src: str
    dst: str
    lam: List[int] = Field(alias="lambda")
    images: List[str]
    region: Dict[str, Any]


class CompositionModel(_Model):
    first: str
    second: str
    result: str


class FiberActionModel(_Model):
    matrices: List[Matrix]
    complex_structure: Optional[List[ComplexMatrix]] = None


class BundleModel(_Model):
    name: str = "E"
    rank: int = Field(ge=0)
    fiber_actions: Dict[str, FiberActionModel]
    transitions: Dict[str, List[List[str]]]


class SectionModel(_Model):
    name: str
    components: Dict[str, List[str]]


class ConnectionModel(_Model):
    name: str = "connection"
    metric: bool = True
    forms: Dict[str, List[List[str]]]


class OrbiDocument(_Model):
    """Documento completo; sólo `groups` y `charts` son obligatorios"""

    name: str = "document"
    groups: List[GroupModel]
    charts: List[ChartModel]
    injections: List[InjectionModel] = []
    overlaps: List[OverlapModel] = []
    compositions: List[CompositionModel] = []
    bundle: Optional[BundleModel] = None
    sections: List[SectionModel] = []
    connection: Optional[ConnectionModel] = None
    partition: Optional[Dict[str, str]] = None


@dataclass(frozen=True, eq=False)
class LoadedDocument:
    """Objetos construidos a partir de un documento"""

    name: str
    atlas: Atlas
    bundle: Optional[BundleCocycle] = None
    sections: Tuple[Section, ...] = ()
    connection: Optional[ConnectionData] = None
    partition: Optional[PartitionOfUnity] = None
    notes: Tuple[str, ...] = field(default=())

    def section(self, name: Optional[str] = None) -> Section:
        if not self.sections:
            raise DocumentError("el documento no trae secciones", "sections")
        if name is None:
            return self.sections[0]
        for section in self.sections:
            if section.name == name:
                return section
        raise DocumentError(f"sección desconocida '{name}'", f"sections.{name}")

    def require_bundle(self) -> BundleCocycle:
        if self.bundle is None:
            raise DocumentError("el documento no trae fibrado", "bundle")
        return self.bundle

    def connection_or_flat(self) -> ConnectionData:
        if self.connection is not None:
            return self.connection
        logger.warning("el documento no trae conexión: se usa la conexión plana")
        return flat_connection(self.require_bundle())

    def partition_or_trivial(self) -> PartitionOfUnity:
        if self.partition is not None:
            return self.partition
        return trivial_partition(self.atlas)


# Carga


def _location(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc)


def _matrix(rows: Matrix, dim: int) -> np.ndarray:
    values = [[float(parse_number(a)) for a in row] for row in rows]
    return np.array(values, dtype=float).reshape(dim, dim)


def _unitary(rows: ComplexMatrix) -> np.ndarray:
    return np.array(
        [[complex(float(parse_number(re)), float(parse_number(im))) for re, im in row] for row in rows],
        dtype=complex,
    )


def _representation(
    group: FiniteGroup, dim: int, matrices: List[Matrix], complex_structure: Optional[List[ComplexMatrix]]
) -> Representation:
    rep = Representation(group, dim, tuple(_matrix(m, dim) for m in matrices))
    if complex_structure is not None:
        rep = rep.with_unitary([_unitary(u) for u in complex_structure])
    return rep


def _build_atlas(doc: OrbiDocument) -> Atlas:
    groups: Dict[str, FiniteGroup] = {}
    for i, model in enumerate(doc.groups):
        with _located(f"groups.{i}"):
            if model.order is not None and model.order != len(model.table):
                raise DocumentError(f"orden {model.order} con una tabla de {len(model.table)} filas")
            groups[model.name] = FiniteGroup.from_table(model.name, model.table, model.labels)
    charts = []
    for i, model in enumerate(doc.charts):
        with _located(f"charts.{i}"):
            if model.group not in groups:
                raise DocumentError(f"grupo desconocido '{model.group}'")
            domain = domain_from_dict(model.domain, parse_number)
            if model.dim is not None and model.dim != domain.dim:
                raise DocumentError(f"dim {model.dim} con un dominio de dimensión {domain.dim}")
            action = _representation(groups[model.group], domain.dim, model.action, model.complex_structure)
            charts.append(Chart(model.id, domain, groups[model.group], action))
    injections = []
    for i, model in enumerate(doc.injections):
        with _located(f"injections.{i}"):
            if model.matrix is not None:
                injections.append(
                    Injection.affine(
                        model.id,
                        model.src,
                        model.dst,
                        [[parse_number(a) for a in row] for row in model.matrix],
                        [parse_number(t) for t in (model.translation or [0] * len(model.matrix))],
                        model.lam,
                    )
                )
            elif model.images is not None:
                images = tuple(as_expr(text) for text in model.images)
                injections.append(Injection(model.id, model.src, model.dst, images, tuple(model.lam)))
            else:
                raise DocumentError("una inyección necesita `matrix` o `images`")
    overlaps = []
    for i, model in enumerate(doc.overlaps):
        with _located(f"overlaps.{i}"):
            overlaps.append(
                Overlap(
                    model.id,
                    model.src,
                    model.dst,
                    tuple(as_expr(text) for text in model.images),
                    tuple(model.lam),
                    domain_from_dict(model.region, parse_number),
                )
            )
    compositions = tuple(Composition(c.first, c.second, c.result) for c in doc.compositions)
    return Atlas(doc.name, tuple(charts), tuple(injections), compositions, tuple(overlaps))


def _build_bundle(doc: OrbiDocument, atlas: Atlas) -> BundleCocycle:
    model = doc.bundle
    fiber_actions = {}
    for chart in atlas.charts:
        with _located(f"bundle.fiber_actions.{chart.id}"):
            if chart.id not in model.fiber_actions:
                raise DocumentError("falta la acción de fibra")
            fiber = model.fiber_actions[chart.id]
            fiber_actions[chart.id] = _representation(
                chart.group, model.rank, fiber.matrices, fiber.complex_structure
            )
    transitions = {}
    for arrow_id, rows in model.transitions.items():
        with _located(f"bundle.transitions.{arrow_id}"):
            transitions[arrow_id] = expr_matrix(rows)
    return BundleCocycle(model.name, atlas, model.rank, fiber_actions, transitions)


class _located:
    """Convierte los errores de construcción en DocumentError con su ubicación"""

    def __init__(self, location: str):
        self.location = location

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            return False
        if isinstance(exc, DocumentError) and exc.location is not None:
            return False
        if isinstance(exc, (OrbiError, ValueError, KeyError, TypeError)):
            message = exc.args[0] if isinstance(exc, DocumentError) else str(exc)
            raise DocumentError(message, self.location) from exc
        return False


def build_document(doc: OrbiDocument) -> LoadedDocument:
    """
    Construye atlas, fibrado, secciones, conexión y partición.

    Raises:
        DocumentError: con la ubicación del elemento que no se pudo construir
    """
    atlas = _build_atlas(doc)
    bundle = _build_bundle(doc, atlas) if doc.bundle is not None else None
    sections = []
    connection = None
    if doc.sections or doc.connection is not None:
        if bundle is None:
            raise DocumentError("secciones y conexión necesitan un fibrado", "bundle")
    for i, model in enumerate(doc.sections):
        with _located(f"sections.{i}"):
            sections.append(make_section(model.name, bundle, model.components))
    if doc.connection is not None:
        with _located("connection"):
            connection = connection_from_texts(
                doc.connection.name, bundle, doc.connection.forms, doc.connection.metric
            )
    partition = None
    if doc.partition is not None:
        with _located("partition"):
            partition = partition_from_texts(doc.partition)
    logger.debug("documento %s: %d cartas", doc.name, len(atlas.charts))
    return LoadedDocument(doc.name, atlas, bundle, tuple(sections), connection, partition)


def parse_document(data: Any) -> OrbiDocument:
    try:
        return OrbiDocument.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise DocumentError(first["msg"], _location(first["loc"])) from exc


def load_document(path: Union[str, Path]) -> LoadedDocument:
    """
    Lee y construye un documento JSON.

    Raises:
        DocumentError: si el fichero no existe, no es JSON o no cumple el esquema
    """
    path = Path(path)
    if not path.is_file():
        raise DocumentError(f"no existe el fichero '{path}'")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"{path.name}:{exc.lineno}:{exc.colno}") from exc
    return build_document(parse_document(data))


# Volcado


def number_out(value: Any) -> Union[int, float, str]:
    """Fraction como entero o "a/b"; flotantes enteros como entero"""
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    value = float(value)
    return int(value) if value.is_integer() else value


def _matrix_out(matrix: np.ndarray) -> Matrix:
    return [[number_out(a) for a in row] for row in np.asarray(matrix)]


def _unitary_out(matrix: np.ndarray) -> ComplexMatrix:
    return [[(number_out(z.real), number_out(z.imag)) for z in row] for row in np.asarray(matrix)]


def _representation_out(rep: Representation) -> Dict[str, Any]:
    data: Dict[str, Any] = {"matrices": [_matrix_out(m) for m in rep.matrices]}
    if rep.unitary is not None:
        data["complex_structure"] = [_unitary_out(u) for u in rep.unitary]
    return data


def _group_out(groups: Dict[str, FiniteGroup], group: FiniteGroup) -> None:
    known = groups.get(group.name)
    if known is not None and known.table != group.table:
        raise DocumentError(f"dos grupos distintos se llaman '{group.name}'", "groups")
    groups[group.name] = group


def dump_document(
    atlas: Atlas,
    bundle: Optional[BundleCocycle] = None,
    sections: Tuple[Section, ...] = (),
    connection: Optional[ConnectionData] = None,
    partition: Optional[PartitionOfUnity] = None,
    name: Optional[str] = None,
) -> Dict[str, Any]:
    """Forma de documento de los objetos; `load` la reconstruye tal cual"""
    groups: Dict[str, FiniteGroup] = {}
    charts = []
    for chart in atlas.charts:
        _group_out(groups, chart.group)
        action = _representation_out(chart.action)
        entry = {
            "id": chart.id,
            "dim": chart.dim,
            "domain": chart.domain.to_dict(),
            "group": chart.group.name,
            "action": action["matrices"],
        }
        if "complex_structure" in action:
            entry["complex_structure"] = action["complex_structure"]
        charts.append(entry)
    injections = []
    for injection in atlas.injections:
        entry = {"id": injection.id, "src": injection.src, "dst": injection.dst, "lambda": list(injection.lam)}
        if injection.is_affine:
            entry["matrix"] = [[number_out(a) for a in row] for row in injection.matrix]
            entry["translation"] = [number_out(t) for t in injection.translation]
        else:
            entry["images"] = [to_text(e) for e in injection.images]
        injections.append(entry)
    data: Dict[str, Any] = {
        "name": name or atlas.name,
        "groups": [
            {"name": g.name, "order": g.order, "table": [list(row) for row in g.table], "labels": list(g.labels)}
            for g in groups.values()
        ],
        "charts": charts,
        "injections": injections,
        "overlaps": [
            {
                "id": o.id,
                "src": o.src,
                "dst": o.dst,
                "lambda": list(o.lam),
                "images": [to_text(e) for e in o.images],
                "region": o.region.to_dict(),
            }
            for o in atlas.overlaps
        ],
        "compositions": [
            {"first": c.first, "second": c.second, "result": c.result} for c in atlas.compositions
        ],
    }
    if bundle is not None:
        data["bundle"] = {
            "name": bundle.name,
            "rank": bundle.rank,
            "fiber_actions": {cid: _representation_out(rep) for cid, rep in bundle.fiber_actions.items()},
            "transitions": {aid: matrix_to_text(g) for aid, g in bundle.transitions.items()},
        }
    data["sections"] = [{"name": s.name, "components": s.to_dict()} for s in sections]
    if connection is not None:
        data["connection"] = {
            "name": connection.name,
            "metric": connection.metric,
            "forms": {
                cid: [[form_to_text(f) for f in row] for row in omega.entries]
                for cid, omega in connection.forms.items()
            },
        }
    if partition is not None:
        data["partition"] = {cid: to_text(psi) for cid, psi in partition.functions.items()}
    return data


def dump_example(example: Example) -> Dict[str, Any]:
    """Documento de un ejemplo de la galería"""
    return dump_document(
        example.atlas,
        example.bundle,
        example.sections,
        example.connection,
        example.partition,
        example.name,
    )


def write_document(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
