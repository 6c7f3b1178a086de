"""
Utilidad para verificar el documento de entrada antes de lanzar una orden.
"""

import json
from pathlib import Path
from typing import Dict, List, Tuple

from rich.console import Console

console = Console(stderr=True)

# Secciones del documento que necesita cada orden
REQUIRED_SECTIONS: Dict[str, Tuple[str, ...]] = {
    "validate": ("groups", "charts"),
    "classify": ("groups", "charts", "bundle"),
    "vertical": ("groups", "charts", "bundle"),
    "sectors": ("groups", "charts"),
    "euler": ("groups", "charts", "bundle"),
    "obstruct": ("groups", "charts", "bundle", "sections"),
}

# Secciones que se pueden omitir con un valor por defecto
OPTIONAL_SECTIONS: Dict[str, Tuple[str, ...]] = {
    "euler": ("connection", "partition"),
    "obstruct": ("partition",),
}


def check_input_file(path: Path, command: str, quiet: bool = False) -> List[str]:
    """
    Verifica que el fichero existe, es JSON y trae las secciones que la orden necesita.

    Args:
        path: Ruta al documento
        command: Orden que se va a ejecutar
        quiet: No imprime nada si es True

    Returns:
        List[str]: Problemas encontrados; vacía si el documento es utilizable
    """
    problems: List[str] = []
    if not path.exists():
        problems.append(f"no existe el fichero '{path}'")
    elif path.suffix.lower() != ".json":
        problems.append(f"'{path.name}' no tiene extensión .json")
    else:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            problems.append(f"JSON inválido en la línea {exc.lineno}, columna {exc.colno}")
            data = None
        if data is not None and not isinstance(data, dict):
            problems.append("el documento debe ser un objeto JSON")
        elif data is not None:
            for section in REQUIRED_SECTIONS.get(command, ()):
                if not data.get(section):
                    problems.append(f"falta la sección '{section}' que necesita '{command}'")
            if not quiet:
                for section in OPTIONAL_SECTIONS.get(command, ()):
                    if section not in data:
                        console.print(
                            f"[yellow]El documento no trae '{section}': se usa el valor por defecto[/yellow]"
                        )

    if problems and not quiet:
        console.print(f"[bold red]El documento '{path}' no se puede usar:[/bold red]")
        for problem in problems:
            console.print(f"  - {problem}")
    return problems
