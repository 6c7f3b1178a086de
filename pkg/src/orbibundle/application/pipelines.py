"""
Pipelines de las órdenes del CLI y su registro.

Cada pipeline recibe un JobSpec y devuelve un Report; `execute` traduce el
resultado a un código de salida: 0 éxito o PASS, 1 fallo de validación,
2 error de entrada.
"""

import json
import logging
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from src.orbibundle.config import settings
from src.orbibundle.core.atlas import base_kernel, validate_atlas
from src.orbibundle.core.bundles import (
    classify,
    fiber_kernel_report,
    lift_section,
    pullback_matches_vertical,
    reduce_bundle,
    restrict_section,
    restrict_to_zero_section,
    total_space,
    validate_bundle,
    validate_section,
    vertical_bundle,
)
from src.orbibundle.core.chernweil import (
    CharacteristicKind,
    check_form_compatibility,
    check_partition,
    curvature,
    euler_closedness,
    euler_form,
    obstruction_verdict,
    orbifold_characteristic_class,
    validate_connection,
)
from src.orbibundle.core.report import Report
from src.orbibundle.core.sectors import (
    census_coincidence,
    degree_shift_table,
    retraction_check,
    sector_census,
)
from src.orbibundle.errors import DocumentError, OrbiError, UnknownSubcommandError
from src.orbibundle.gallery import example_registry
from src.orbibundle.io.document import LoadedDocument, dump_example, load_document, write_document

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2


class OutputFormat(Enum):
    TEXT = "text"
    STRUCTURED = "structured"


@dataclass
class JobSpec:
    """Trabajo de una invocación: orden, entrada y ajustes"""

    command: str
    input: Optional[Path] = None
    example: Optional[str] = None
    seed: Optional[int] = None
    quad_order: Optional[int] = None
    tol: Optional[float] = None
    output_format: OutputFormat = OutputFormat.TEXT
    out: Optional[Path] = None
    section: Optional[str] = None
    kind: CharacteristicKind = CharacteristicKind.EULER
    via_vertical: bool = False

    def validate(self) -> None:
        """
        Raises:
            DocumentError: si falta la entrada o un ajuste no es positivo
        """
        if self.tol is not None and not self.tol > 0:
            raise DocumentError(f"la tolerancia debe ser positiva y es {self.tol}", "--tol")
        if self.quad_order is not None and self.quad_order < 1:
            raise DocumentError(f"el orden de cuadratura debe ser positivo y es {self.quad_order}", "--quad-order")
        if self.command == "example":
            if not self.example:
                raise DocumentError("la orden example necesita un nombre", "example")
        elif self.input is None:
            raise DocumentError(f"la orden {self.command} necesita un documento de entrada")
        elif not self.input.is_file():
            raise DocumentError(f"no existe el fichero '{self.input}'")


@dataclass
class JobResult:
    report: Report
    exit_code: int


@contextmanager
def job_settings(job: JobSpec) -> Iterator[None]:
    """Aplica las opciones del trabajo sobre `settings` y restaura los valores al salir"""
    overrides = {
        "SEED": job.seed,
        "QUAD_ORDER": job.quad_order,
        "QUAD_TOLERANCE": job.tol,
    }
    saved = {name: getattr(settings, name) for name in overrides}
    try:
        for name, value in overrides.items():
            if value is not None:
                setattr(settings, name, value)
        yield
    finally:
        for name, value in saved.items():
            setattr(settings, name, value)


# Pipelines


class Pipeline(ABC):
    """Clase base de las órdenes"""

    name: str = ""
    description: str = ""
    needs_document: bool = True

    @abstractmethod
    def run(self, job: JobSpec, document: Optional[LoadedDocument]) -> Report:
        """Ejecuta la orden y devuelve su reporte"""

    def get_pipeline_info(self) -> Dict[str, Any]:
        return {"name": self.name, "description": self.description}


class ValidatePipeline(Pipeline):
    name = "validate"
    description = "Valida atlas, fibrado, secciones, conexión y partición"

    def run(self, job, document):
        report = Report(title=f"validación de {document.name}")
        atlas_report = validate_atlas(document.atlas)
        report.merge(atlas_report, prefix="atlas:")
        content: Dict[str, Any] = {"atlas": atlas_report.success}
        if document.bundle is not None:
            bundle_report = validate_bundle(document.bundle, include_base=False)
            report.merge(bundle_report, prefix="fibrado:")
            content["bundle"] = bundle_report.success
            sections = {}
            for section in document.sections:
                section_report = validate_section(document.bundle, section)
                report.merge(section_report, prefix=f"sección {section.name}:")
                sections[section.name] = {
                    "valid": section_report.success,
                    **section_report.content,
                }
            content["sections"] = sections
            if document.connection is not None:
                connection_report = validate_connection(document.connection)
                report.merge(connection_report, prefix="conexión:")
                content["connection"] = connection_report.success
        if document.partition is not None:
            partition_report = check_partition(document.atlas, document.partition)
            report.merge(partition_report, prefix="partición:")
            content["partition"] = partition_report.success
        report.content = content
        return report


class ClassifyPipeline(Pipeline):
    name = "classify"
    description = "Clasifica el fibrado en bueno o malo con sus núcleos K_b y K_f"

    def run(self, job, document):
        bundle = document.require_bundle()
        verdict = classify(bundle)
        report = Report(title=f"clasificación de {bundle.name}")
        report.content = verdict.to_dict()
        report.content["reduced_base"] = base_kernel(bundle.base, strict=False).is_trivial
        report.content["fiber_kernel"] = fiber_kernel_report(bundle).content
        if verdict.is_good and report.content["K_b_order"] > 1:
            reduced = reduce_bundle(bundle)
            report.content["reduced_bundle"] = {
                "name": reduced.name,
                "groups": {chart.id: chart.group.order for chart in reduced.base.charts},
            }
        return report


class VerticalPipeline(Pipeline):
    name = "vertical"
    description = "Construye VE sobre el espacio total y certifica VE|0 = E"

    def run(self, job, document):
        bundle = document.require_bundle()
        total = total_space(bundle)
        vertical = vertical_bundle(bundle, total)
        restriction = restrict_to_zero_section(vertical)
        verdict = classify(vertical)
        report = Report(title=f"fibrado vertical de {bundle.name}")
        report.content = {
            "total_space": {
                "charts": [{"id": c.id, "dim": c.dim} for c in total.charts],
            },
            "verdict": verdict.to_dict(),
            "certificate": restriction.certificate,
            "pullback_matches_vertical": pullback_matches_vertical(bundle),
        }
        sections = {}
        for section in document.sections:
            back = restrict_section(vertical, lift_section(bundle, section, vertical))
            sections[section.name] = back.to_dict() == section.to_dict()
        if sections:
            report.content["sections_restrict_back"] = sections
        return report


def _unit_degree(shift: Optional[Fraction]) -> Optional[str]:
    """Grado orbifold de la clase unidad del sector: 2 veces el desplazamiento"""
    return None if shift is None else str(2 * shift)


class SectorsPipeline(Pipeline):
    name = "sectors"
    description = "Censo de sectores torcidos y tabla de desplazamientos de grado"

    def run(self, job, document):
        atlas = document.atlas
        census = sector_census(atlas)
        base_shifts = degree_shift_table(atlas, census)
        report = Report(title=f"sectores de {atlas.name}")
        rows: List[Dict[str, Any]] = []
        for sector, entry in zip(census.classes, base_shifts):
            rows.append({**sector.to_dict(), "base_shift": entry.to_dict()["shift"],
                         "Q_degree": _unit_degree(entry.shift), "codimension": entry.codimension})
        content: Dict[str, Any] = {"census": census.to_dict(), "classes": rows}
        if document.bundle is not None:
            total = total_space(document.bundle)
            coincidence = census_coincidence(document.bundle, total)
            content["coincidence"] = coincidence.to_dict()
            if coincidence.coincide:
                total_census = sector_census(total)
                total_shifts = degree_shift_table(total, total_census)
                for row in rows:
                    lifted = coincidence.matching[row["index"]]
                    row["total_shift"] = total_shifts[lifted].to_dict()["shift"]
                    row["E_degree"] = _unit_degree(total_shifts[lifted].shift)
                    retraction = retraction_check(document.bundle, total_census.classes[lifted], total=total)
                    report.merge(retraction, prefix="retracción:")
                    row["retraction"] = retraction.success
            else:
                report.error = coincidence.counterexample
        report.content = content
        return report


class EulerPipeline(Pipeline):
    name = "euler"
    description = "Clase característica de orbifold por sectores, con grados e integrales"

    def run(self, job, document):
        bundle = document.require_bundle()
        partition = document.partition_or_trivial()
        report = Report(title=f"{job.kind.value} de {bundle.name}")
        partition_report = check_partition(bundle.base, partition)
        report.merge(partition_report, prefix="partición:")
        connection = document.connection_or_flat()
        cls = orbifold_characteristic_class(
            bundle,
            connection,
            job.kind,
            partition if partition_report.success else None,
            via_vertical=job.via_vertical,
        )
        integrals = [c.integral for c in cls.components if c.integral is not None]
        report.content = {
            **cls.to_dict(),
            "total_integral": sum(integrals) if integrals else None,
        }
        if job.kind is CharacteristicKind.EULER and classify(bundle).is_good and not job.via_vertical:
            curv = curvature(connection)
            report.merge(check_form_compatibility(bundle.base, euler_form(curv)), prefix="forma de Euler:")
            report.content["closedness"] = euler_closedness(curv)
        return report


class ObstructPipeline(Pipeline):
    name = "obstruct"
    description = "Veredicto de obstrucción: e_orb(E) = 0 si hay una sección que no se anula"

    def run(self, job, document):
        bundle = document.require_bundle()
        return obstruction_verdict(
            bundle,
            document.section(job.section),
            document.partition_or_trivial(),
            document.connection,
        )


class ExamplePipeline(Pipeline):
    name = "example"
    description = "Materializa un ejemplo incorporado como documento JSON"
    needs_document = False

    def run(self, job, document):
        example = example_registry.get_example(job.example)
        data = dump_example(example)
        report = Report(title=f"ejemplo {example.name}")
        report.content = data
        report.metadata = example.get_example_info()
        if job.out is not None:
            write_document(data, job.out)
            report.metadata["written"] = str(job.out)
        return report


class PipelineRegistry:
    """Registro central de las órdenes disponibles"""

    def __init__(self):
        self.pipelines: Dict[str, Pipeline] = {}

    def register_pipeline(self, pipeline: Pipeline) -> None:
        self.pipelines[pipeline.name] = pipeline

    def get_pipeline(self, name: str) -> Pipeline:
        """
        Raises:
            UnknownSubcommandError: si la orden no está registrada
        """
        try:
            return self.pipelines[name]
        except KeyError:
            raise UnknownSubcommandError(f"orden desconocida '{name}'") from None

    def list_all_pipelines(self) -> Dict[str, Dict[str, Any]]:
        return {name: p.get_pipeline_info() for name, p in self.pipelines.items()}


pipeline_registry = PipelineRegistry()
for _pipeline in (
    ValidatePipeline(),
    ClassifyPipeline(),
    VerticalPipeline(),
    SectorsPipeline(),
    EulerPipeline(),
    ObstructPipeline(),
    ExamplePipeline(),
):
    pipeline_registry.register_pipeline(_pipeline)


def _write_report(report: Report, out: Path) -> None:
    out.write_text(json.dumps(report.to_dict(), indent=2, ensure_ascii=False, default=str) + "\n",
                   encoding="utf-8")


def execute(job: JobSpec) -> JobResult:
    """
    Ejecuta un trabajo completo sin lanzar excepciones. Con `job.out` el reporte
    se escribe también cuando el trabajo falla.

    Returns:
        JobResult: el reporte y el código de salida
    """
    try:
        pipeline = pipeline_registry.get_pipeline(job.command)
        job.validate()
        with job_settings(job):
            document = load_document(job.input) if pipeline.needs_document else None
            report = pipeline.run(job, document)
        exit_code = EXIT_OK if report.success else EXIT_FAILURE
    except (DocumentError, UnknownSubcommandError) as exc:
        logger.debug("error de entrada: %s", exc)
        report = Report(title=job.command, error=str(exc))
        report.metadata["location"] = getattr(exc, "location", None)
        exit_code = EXIT_INPUT_ERROR
    except OrbiError as exc:
        logger.debug("fallo de validación: %s", exc)
        report = Report(title=job.command, error=f"{type(exc).__name__}: {exc}")
        exit_code = EXIT_FAILURE
    report.metadata.setdefault("command", job.command)
    report.metadata.setdefault("seed", settings.SEED if job.seed is None else job.seed)
    if job.out is not None and job.command != "example":
        try:
            _write_report(report, job.out)
        except OSError as exc:
            logger.error("no se pudo escribir el reporte en %s: %s", job.out, exc)
            report.error = report.error or f"no se pudo escribir {job.out}: {exc}"
            exit_code = EXIT_INPUT_ERROR
    return JobResult(report, exit_code)
