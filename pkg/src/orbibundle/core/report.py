"""
Objetos de resultado para las validaciones: nunca lanzan, acumulan violaciones.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class CheckKind(Enum):
    """Tipos de comprobación que puede fallar"""

    GROUP_LAW = "group_law"
    HOMOMORPHISM = "homomorphism"
    ORTHOGONALITY = "orthogonality"
    DOMAIN = "domain"
    INJECTIVITY = "injectivity"
    EQUIVARIANCE = "equivariance"
    COMPOSITION = "composition"
    COCYCLE = "cocycle"
    INVERTIBILITY = "invertibility"
    COMPATIBILITY = "compatibility"
    PARTITION = "partition"
    SKEW_SYMMETRY = "skew_symmetry"
    NONVANISHING = "nonvanishing"
    REFERENCE = "reference"
    OBSTRUCTION = "obstruction"
    RETRACTION = "retraction"
    DEGREE_SHIFT = "degree_shift"


@dataclass(frozen=True)
class Violation:
    """Un invariante violado, con el objeto que lo viola"""

    kind: CheckKind
    subject: str
    message: str
    residual: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "subject": self.subject,
            "message": self.message,
            "residual": self.residual,
        }


@dataclass
class Report:
    """Resultado de una validación u operación del pipeline"""

    title: str
    violations: List[Violation] = field(default_factory=list)
    content: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return not self.violations and self.error is None

    def add(
        self,
        kind: CheckKind,
        subject: str,
        message: str,
        residual: Optional[float] = None,
    ) -> None:
        """Registra una violación"""
        self.violations.append(Violation(kind, subject, message, residual))

    def check(
        self,
        residual: float,
        tolerance: float,
        kind: CheckKind,
        subject: str,
        message: str,
    ) -> None:
        """Registra una violación si el residuo supera la tolerancia"""
        if not residual <= tolerance:
            self.add(kind, subject, f"{message}: {residual:.3e} > {tolerance:.1e}", residual)

    def merge(self, other: "Report", prefix: str = "") -> "Report":
        """Incorpora las violaciones de otro reporte"""
        for violation in other.violations:
            subject = f"{prefix}{violation.subject}" if prefix else violation.subject
            self.violations.append(
                Violation(violation.kind, subject, violation.message, violation.residual)
            )
        if other.error and not self.error:
            self.error = other.error
        return self

    def subjects(self) -> List[str]:
        return [violation.subject for violation in self.violations]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "success": self.success,
            "violations": [violation.to_dict() for violation in self.violations],
            "content": self.content,
            "error": self.error,
            "metadata": self.metadata,
        }
