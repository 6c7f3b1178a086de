"""
Jerarquía de excepciones de orbibundle.
"""

from typing import Optional


class OrbiError(Exception):
    """Error base de la biblioteca"""


class ExprSyntaxError(OrbiError):
    """Error de sintaxis en una expresión, con la posición en bytes"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    """Identificador desconocido en una expresión"""


class NonIntegerExponentError(ExprSyntaxError):
    """Exponente no entero en una potencia"""


class EvaluationDomainError(OrbiError):
    """División por cero, raíz de un negativo o valor no finito"""


class GroupError(OrbiError):
    """Tabla de multiplicación que no define un grupo"""


class RepresentationError(OrbiError):
    """Representación inconsistente con su grupo"""


class AtlasError(OrbiError):
    """Atlas mal formado"""


class KernelConsistencyError(AtlasError):
    """Núcleos de la acción inconsistentes a través de las inyecciones"""


class BundleError(OrbiError):
    """Cociclo de transición mal formado"""


class CertificateError(BundleError):
    """La restricción a la sección cero no reproduce el fibrado original"""


class SectionError(OrbiError):
    """Sección inválida o que se anula"""


class SectorError(OrbiError):
    """Error en la maquinaria de sectores torcidos"""


class DegreeShiftError(SectorError):
    """Autovalor que no es raíz de la unidad del orden esperado"""


class ConnectionDataError(OrbiError):
    """Datos de conexión ausentes o inválidos"""


class PfaffianError(OrbiError):
    """Matriz de dimensión impar o no antisimétrica"""


class QuadratureError(OrbiError):
    """La cuadratura no converge o el grado no coincide con la dimensión"""


class DocumentError(OrbiError):
    """Documento de entrada mal formado"""

    def __init__(self, message: str, location: Optional[str] = None):
        text = f"{message} (en {location})" if location else message
        super().__init__(text)
        self.location = location


class UnknownSubcommandError(OrbiError):
    """Subcomando desconocido"""
