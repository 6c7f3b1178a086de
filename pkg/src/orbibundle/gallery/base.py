"""
Clases base de la galería de ejemplos: el ejemplo materializado y su registro
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

from src.orbibundle.core.atlas import Atlas
from src.orbibundle.core.bundles import BundleCocycle, Section
from src.orbibundle.core.chernweil import ConnectionData, PartitionOfUnity
from src.orbibundle.errors import DocumentError


class ExampleKind(Enum):
    """Procedencia de un ejemplo"""

    BUILTIN = "builtin"
    RANDOMIZED = "randomized"


@dataclass(frozen=True, eq=False)
class Example:
    """Entrada completa del pipeline: fibrado, conexión, partición y secciones"""

    name: str
    description: str
    bundle: BundleCocycle
    connection: ConnectionData
    partition: PartitionOfUnity
    sections: Tuple[Section, ...] = ()
    kind: ExampleKind = ExampleKind.BUILTIN
    notes: Tuple[str, ...] = field(default=())

    @property
    def atlas(self) -> Atlas:
        return self.bundle.base

    def section(self, name: Optional[str] = None) -> Section:
        """
        Devuelve una sección por nombre o la primera si no se indica.

        Raises:
            DocumentError: Si el ejemplo no tiene la sección pedida
        """
        if not self.sections:
            raise DocumentError(f"el ejemplo '{self.name}' no trae secciones", "sections")
        if name is None:
            return self.sections[0]
        for section in self.sections:
            if section.name == name:
                return section
        raise DocumentError(f"sección desconocida '{name}'", f"sections.{name}")

    def get_example_info(self) -> Dict[str, Any]:
        """Retorna información resumida del ejemplo"""
        return {
            "name": self.name,
            "description": self.description,
            "kind": self.kind.value,
            "charts": self.atlas.chart_ids,
            "rank": self.bundle.rank,
            "sections": [section.name for section in self.sections],
            "notes": list(self.notes),
        }


ExampleBuilder = Callable[[], Example]
ParametricBuilder = Callable[[int], Example]


class ExampleRegistry:
    """Registro central de los ejemplos disponibles para la orden `example`"""

    def __init__(self):
        self.builders: Dict[str, ExampleBuilder] = {}
        self.descriptions: Dict[str, str] = {}
        self.aliases: Dict[str, str] = {}
        self.families: Dict[str, Tuple[ParametricBuilder, int]] = {}

    def register_example(self, name: str, builder: ExampleBuilder, description: str) -> None:
        """Registra un ejemplo con nombre fijo"""
        self.builders[name] = builder
        self.descriptions[name] = description

    def register_alias(self, alias: str, name: str) -> None:
        self.aliases[alias] = name

    def register_family(
        self, prefix: str, builder: ParametricBuilder, description: str, minimum: int = 1
    ) -> None:
        """Registra una familia `prefijo-<n>` con n >= minimum"""
        self.families[prefix] = (builder, minimum)
        self.descriptions[f"{prefix}-<n>"] = description

    def get_example(self, name: str) -> Example:
        """
        Construye el ejemplo pedido.

        Raises:
            DocumentError: Si el nombre no corresponde a ningún ejemplo
        """
        name = self.aliases.get(name, name)
        if name in self.builders:
            return self.builders[name]()
        match = re.fullmatch(r"([a-z0-9-]+?)-([0-9]+)", name)
        if match and match.group(1) in self.families:
            builder, minimum = self.families[match.group(1)]
            parameter = int(match.group(2))
            if parameter < minimum:
                raise DocumentError(f"'{name}': el parámetro debe ser >= {minimum}", "example")
            return builder(parameter)
        raise DocumentError(f"ejemplo desconocido '{name}'", "example")

    def list_all_examples(self) -> Dict[str, str]:
        """Nombres registrados (alias incluidos) con su descripción"""
        listing = dict(self.descriptions)
        for alias, name in self.aliases.items():
            listing[alias] = f"alias de {name}"
        return listing

    def names(self) -> List[str]:
        return sorted(self.builders)
