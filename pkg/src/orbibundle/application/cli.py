import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Any, Dict, Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from src.orbibundle.application.pipelines import (
    EXIT_INPUT_ERROR,
    JobResult,
    JobSpec,
    OutputFormat,
    execute,
    pipeline_registry,
)
from src.orbibundle.config import settings
from src.orbibundle.core.chernweil import CharacteristicKind
from src.orbibundle.gallery import example_registry
from src.orbibundle.utils.input_checker import check_input_file


app = typer.Typer(help="Fibrados vectoriales de orbifold, sectores torcidos y clases de Euler")
console = Console()
error_console = Console(stderr=True)

InputArg = Annotated[Path, typer.Argument(help="Documento JSON de entrada")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", help="Semilla de los puntos de muestra")]
QuadOpt = Annotated[Optional[int], typer.Option("--quad-order", help="Orden inicial de Gauss-Legendre")]
TolOpt = Annotated[Optional[float], typer.Option("--tol", help="Tolerancia de convergencia de la cuadratura")]
FormatOpt = Annotated[OutputFormat, typer.Option("--format", "-f", help="text | structured")]
OutOpt = Annotated[Optional[Path], typer.Option("--out", "-o", help="Fichero donde escribir el resultado")]
VerboseOpt = Annotated[bool, typer.Option("--verbose", "-v", help="Registro detallado")]


def configure_logging(verbose: bool) -> None:
    """Instala un RichHandler en el registro raíz"""
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=error_console, show_path=False)],
        force=True,
    )


def _run(job: JobSpec, verbose: bool) -> None:
    configure_logging(verbose)
    if job.input is not None:
        # sólo avisa: el pipeline informa del error con su ubicación
        check_input_file(job.input, job.command)
    result = execute(job)
    render(job, result)
    raise typer.Exit(code=result.exit_code)


# Presentación


def _status(result: JobResult) -> str:
    if result.exit_code == 0:
        return "[bold green]OK[/bold green]"
    if result.exit_code == EXIT_INPUT_ERROR:
        return "[bold red]ERROR DE ENTRADA[/bold red]"
    return "[bold red]FALLO[/bold red]"


def _violations_table(violations) -> Table:
    table = Table(title="Violaciones", show_header=True, header_style="bold magenta")
    table.add_column("Tipo", style="cyan")
    table.add_column("Objeto", style="yellow")
    table.add_column("Mensaje", style="red")
    for violation in violations[:50]:
        table.add_row(violation.kind.value, violation.subject, violation.message)
    if len(violations) > 50:
        table.add_row("...", f"{len(violations) - 50} más", "")
    return table


def _render_classify(content: Dict[str, Any]) -> None:
    console.print(f"Veredicto: [bold]{content['verdict']}[/bold]")
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Carta", style="cyan")
    table.add_column("K_b")
    table.add_column("K_f")
    for chart_id, kernels in content["charts"].items():
        table.add_row(chart_id, ", ".join(kernels["K_b"]), ", ".join(kernels["K_f"]))
    console.print(table)


def _render_vertical(content: Dict[str, Any]) -> None:
    console.print(f"Veredicto de VE: [bold]{content['verdict']['verdict']}[/bold]")
    console.print(f"Certificado |VE|0 - E|: {content['certificate']:.3e}")
    console.print(f"rho*E = VE: {content['pullback_matches_vertical']}")


def _render_sectors(content: Dict[str, Any]) -> None:
    table = Table(title="Sectores", show_header=True, header_style="bold magenta")
    table.add_column("Clase", style="cyan")
    table.add_column("Miembros")
    table.add_column("Desplazamiento en Q")
    table.add_column("Desplazamiento en E")
    table.add_column("Grado en Q")
    table.add_column("Grado en E")
    for row in content["classes"]:
        members = ", ".join(f"{chart}:{index}" for chart, index in row["members"])
        table.add_row(
            row["label"],
            members,
            str(row["base_shift"]),
            str(row.get("total_shift", "-")),
            str(row["Q_degree"]),
            str(row.get("E_degree", "-")),
        )
    console.print(table)


def _render_class(content: Dict[str, Any]) -> None:
    table = Table(title=content["name"], show_header=True, header_style="bold magenta")
    table.add_column("Sector", style="cyan")
    table.add_column("Grado de forma")
    table.add_column("Grado")
    table.add_column("Integral", style="green")
    for component in content["components"]:
        integral = component["integral"]
        table.add_row(
            component["sector"],
            str(component["form_degree"]),
            str(component["degree"]),
            "-" if integral is None else f"{integral:.10g}",
        )
    console.print(table)
    if content.get("origin"):
        console.print("[dim]Componentes de origen en el espacio total:[/dim]")
        for component in content["origin"]["components"]:
            console.print(f"  {component['sector']}: grado {component['degree']}")
    if content.get("total_integral") is not None:
        console.print(f"Integral total: [bold]{content['total_integral']:.10g}[/bold]")


def _render_obstruct(content: Dict[str, Any]) -> None:
    style = "green" if content["result"] == "PASS" else "red"
    console.print(f"Resultado: [bold {style}]{content['result']}[/bold {style}]")
    console.print(f"max |e| en nodos: {content['node_max']:.3e}")
    console.print(f"max |integral|: {content['integral_max']:.3e}")
    console.print(f"min |s|: {content['min_norm']:.3e}")


_RENDERERS = {
    "classify": _render_classify,
    "vertical": _render_vertical,
    "sectors": _render_sectors,
    "euler": _render_class,
    "obstruct": _render_obstruct,
}


def render(job: JobSpec, result: JobResult) -> None:
    """Muestra el reporte como texto con rich o como JSON"""
    report = result.report
    if job.output_format == OutputFormat.STRUCTURED or (job.command == "example" and job.out is None):
        payload = report.content if job.command == "example" and report.success else report.to_dict()
        typer.echo(json.dumps(payload, indent=2, ensure_ascii=False, default=str))
        return
    console.print(Panel.fit(f"{report.title}\n{_status(result)}", border_style="blue"))
    if report.error:
        location = report.metadata.get("location")
        suffix = f" (en {location})" if location and location not in report.error else ""
        console.print(f"[bold red]Error: {report.error}{suffix}[/bold red]")
        return
    renderer = _RENDERERS.get(job.command)
    if renderer is not None:
        renderer(report.content)
    elif job.command == "example":
        console.print(f"Ejemplo escrito en [cyan]{report.metadata.get('written')}[/cyan]")
    if report.violations:
        console.print(_violations_table(report.violations))


# Órdenes


@app.command()
def validate(
    input: InputArg,
    seed: SeedOpt = None,
    output_format: FormatOpt = OutputFormat.TEXT,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Valida el atlas, el fibrado, las secciones, la conexión y la partición.
    """
    _run(JobSpec("validate", input, seed=seed, output_format=output_format, out=out), verbose)


@app.command()
def classify(
    input: InputArg,
    seed: SeedOpt = None,
    output_format: FormatOpt = OutputFormat.TEXT,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Clasifica el fibrado en bueno o malo.
    """
    _run(JobSpec("classify", input, seed=seed, output_format=output_format, out=out), verbose)


@app.command()
def vertical(
    input: InputArg,
    seed: SeedOpt = None,
    output_format: FormatOpt = OutputFormat.TEXT,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Construye el fibrado vertical VE y su certificado de restricción.
    """
    _run(JobSpec("vertical", input, seed=seed, output_format=output_format, out=out), verbose)


@app.command()
def sectors(
    input: InputArg,
    seed: SeedOpt = None,
    output_format: FormatOpt = OutputFormat.TEXT,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Censo de sectores torcidos y desplazamientos de grado.
    """
    _run(JobSpec("sectors", input, seed=seed, output_format=output_format, out=out), verbose)


@app.command()
def euler(
    input: InputArg,
    seed: SeedOpt = None,
    quad_order: QuadOpt = None,
    tol: TolOpt = None,
    kind: Annotated[
        CharacteristicKind, typer.Option("--kind", help="euler | pontryagin_1 | chern_1")
    ] = CharacteristicKind.EULER,
    via_vertical: Annotated[bool, typer.Option("--via-vertical", help="Calcula sobre VE y restringe")] = False,
    output_format: FormatOpt = OutputFormat.TEXT,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Clase de Euler de orbifold (o p1, c1) por sectores, con grados e integrales.
    """
    job = JobSpec(
        "euler",
        input,
        seed=seed,
        quad_order=quad_order,
        tol=tol,
        output_format=output_format,
        out=out,
        kind=kind,
        via_vertical=via_vertical,
    )
    _run(job, verbose)


@app.command()
def obstruct(
    input: InputArg,
    section: Annotated[Optional[str], typer.Option("--section", "-s", help="Nombre de la sección")] = None,
    seed: SeedOpt = None,
    quad_order: QuadOpt = None,
    tol: TolOpt = None,
    output_format: FormatOpt = OutputFormat.TEXT,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Veredicto de obstrucción a partir de una sección que no se anula.
    """
    job = JobSpec(
        "obstruct",
        input,
        seed=seed,
        quad_order=quad_order,
        tol=tol,
        output_format=output_format,
        out=out,
        section=section,
    )
    _run(job, verbose)


@app.command()
def example(
    name: Annotated[Optional[str], typer.Argument(help="Nombre del ejemplo")] = None,
    list_examples: Annotated[bool, typer.Option("--list", "-l", help="Lista los ejemplos")] = False,
    out: OutOpt = None,
    verbose: VerboseOpt = False,
):
    """
    Materializa un ejemplo incorporado como documento JSON.
    """
    if list_examples or name is None:
        show_examples()
        raise typer.Exit(code=0)
    _run(JobSpec("example", example=name, out=out), verbose)


def show_examples():
    """Muestra los ejemplos disponibles"""
    table = Table(title="Ejemplos disponibles", show_header=True, header_style="bold magenta")
    table.add_column("Nombre", style="cyan")
    table.add_column("Descripción", style="green")
    for name, description in example_registry.list_all_examples().items():
        table.add_row(name, description)
    console.print(table)


def show_commands_help():
    """Muestra información de ayuda sobre las órdenes disponibles."""
    table = Table(title="Órdenes disponibles", show_header=True, header_style="bold magenta")
    table.add_column("Orden", style="cyan")
    table.add_column("Descripción", style="green")
    for name, info in pipeline_registry.list_all_pipelines().items():
        table.add_row(name, info["description"])
    console.print(table)


def main():
    """Función principal que inicia la aplicación CLI."""
    try:
        if len(sys.argv) == 1:
            show_commands_help()
            console.print(
                "\nPara más información sobre una orden, usa: [cyan]orbibundle ORDEN --help[/cyan]"
            )
            return
        app()
    except KeyboardInterrupt:
        error_console.print("\n[bold red]Aplicación interrumpida.[/bold red]")
        sys.exit(130)
