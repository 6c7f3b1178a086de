"""
Dominios de las cartas: bolas abiertas centradas en el origen, cajas abiertas,
puntos (dimensión 0) y productos. Cada dominio sabe muestrear puntos interiores
y construir su regla de cuadratura.
"""

import itertools
import logging
import zlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from src.orbibundle.config import settings
from src.orbibundle.core.quadrature import Rule, interval_rule, point_rule, tensor_rule
from src.orbibundle.errors import AtlasError

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]

# fracción del radio (o del semiancho) en la que se colocan las esquinas de la muestra
_CORNER_SHRINK = 0.9
_RANDOM_SHRINK = 0.95


class Domain:
    """Interfaz común de los dominios de carta"""

    dim: int

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        raise NotImplementedError

    def center(self) -> np.ndarray:
        raise NotImplementedError

    def corners(self) -> np.ndarray:
        raise NotImplementedError

    def random_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def quadrature(self, order: int) -> Rule:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError

    def sample_points(self, rng: np.random.Generator, count: int = None) -> np.ndarray:
        """Muestra fija: 2^n esquinas interiores, el centro y puntos aleatorios (n, m)"""
        count = settings.RANDOM_SAMPLES if count is None else count
        return np.hstack(
            [self.corners(), self.center()[:, np.newaxis], self.random_points(rng, count)]
        )


@dataclass(frozen=True)
class Ball(Domain):
    dim: int
    radius: Number = Fraction(1)

    def contains(self, points, tol=1e-9):
        points = np.asarray(points, dtype=float)
        return np.linalg.norm(points, axis=0) < float(self.radius) + tol

    def center(self):
        return np.zeros(self.dim)

    def corners(self):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim))).T
        if self.dim == 0:
            return np.zeros((0, 1))
        return signs * (_CORNER_SHRINK * float(self.radius) / np.sqrt(self.dim))

    def random_points(self, rng, count):
        if self.dim == 0:
            return np.zeros((0, count))
        directions = rng.standard_normal((self.dim, count))
        directions /= np.linalg.norm(directions, axis=0)
        radii = float(self.radius) * _RANDOM_SHRINK * rng.random(count) ** (1.0 / self.dim)
        return directions * radii

    def quadrature(self, order: int) -> Rule:
        """Coordenadas hiperesféricas con su jacobiano; en dimensión 1 es un intervalo"""
        r = float(self.radius)
        if self.dim == 0:
            return point_rule()
        if self.dim == 1:
            return interval_rule(order, -r, r)
        rules = [interval_rule(order, 0.0, r)]
        rules += [interval_rule(order, 0.0, np.pi) for _ in range(self.dim - 2)]
        rules.append(interval_rule(order, 0.0, 2 * np.pi))
        polar, weights = tensor_rule(rules)
        radius, angles = polar[0], polar[1:]
        points = np.empty_like(polar)
        running = radius.copy()
        jacobian = radius ** (self.dim - 1)
        for k in range(self.dim - 1):
            points[k] = running * np.cos(angles[k])
            running = running * np.sin(angles[k])
            if k < self.dim - 2:
                jacobian = jacobian * np.sin(angles[k]) ** (self.dim - 2 - k)
        points[self.dim - 1] = running
        return points, weights * jacobian

    def to_dict(self):
        return {"kind": "ball", "dim": self.dim, "radius": _number_out(self.radius)}


@dataclass(frozen=True)
class Box(Domain):
    lower: Tuple[Number, ...]
    upper: Tuple[Number, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise AtlasError("los extremos de la caja tienen longitudes distintas")
        if any(float(a) >= float(b) for a, b in zip(self.lower, self.upper)):
            raise AtlasError("caja vacía: cada extremo inferior debe ser menor que el superior")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def _bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([float(a) for a in self.lower]), np.array([float(b) for b in self.upper])

    def contains(self, points, tol=1e-9):
        points = np.asarray(points, dtype=float)
        lower, upper = self._bounds()
        return np.all(
            (points > lower[:, np.newaxis] - tol) & (points < upper[:, np.newaxis] + tol), axis=0
        )

    def center(self):
        lower, upper = self._bounds()
        return 0.5 * (lower + upper)

    def corners(self):
        if self.dim == 0:
            return np.zeros((0, 1))
        lower, upper = self._bounds()
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim))).T
        half = 0.5 * (upper - lower)
        return self.center()[:, np.newaxis] + _CORNER_SHRINK * signs * half[:, np.newaxis]

    def random_points(self, rng, count):
        lower, upper = self._bounds()
        half = 0.5 * (upper - lower) * _RANDOM_SHRINK
        unit = rng.uniform(-1.0, 1.0, (self.dim, count))
        return self.center()[:, np.newaxis] + unit * half[:, np.newaxis]

    def quadrature(self, order: int) -> Rule:
        lower, upper = self._bounds()
        return tensor_rule([interval_rule(order, a, b) for a, b in zip(lower, upper)])

    def to_dict(self):
        return {
            "kind": "box",
            "lower": [_number_out(a) for a in self.lower],
            "upper": [_number_out(b) for b in self.upper],
        }


@dataclass(frozen=True)
class Point(Domain):
    """Dominio de dimensión 0 (sectores con conjunto fijo trivial)"""

    dim: int = 0

    def contains(self, points, tol=1e-9):
        return np.ones(np.asarray(points).shape[1] if np.ndim(points) == 2 else 1, dtype=bool)

    def center(self):
        return np.zeros(0)

    def corners(self):
        return np.zeros((0, 1))

    def random_points(self, rng, count):
        return np.zeros((0, count))

    def sample_points(self, rng, count=None):
        return np.zeros((0, 1))

    def quadrature(self, order: int) -> Rule:
        return point_rule()

    def to_dict(self):
        return {"kind": "point"}


@dataclass(frozen=True)
class Product(Domain):
    """Producto de dominios; las coordenadas se concatenan en orden"""

    factors: Tuple[Domain, ...]

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    def _split(self, points: np.ndarray) -> List[np.ndarray]:
        parts, start = [], 0
        for factor in self.factors:
            parts.append(points[start : start + factor.dim])
            start += factor.dim
        return parts

    def contains(self, points, tol=1e-9):
        points = np.asarray(points, dtype=float)
        result = np.ones(points.shape[1], dtype=bool)
        for factor, part in zip(self.factors, self._split(points)):
            if factor.dim:
                result &= factor.contains(part, tol)
        return result

    def center(self):
        return np.concatenate([f.center() for f in self.factors])

    def corners(self):
        columns = [
            np.concatenate(combo)
            for combo in itertools.product(*[list(f.corners().T) for f in self.factors])
        ]
        return np.array(columns).T.reshape(self.dim, -1)

    def random_points(self, rng, count):
        return np.vstack([f.random_points(rng, count) for f in self.factors])

    def quadrature(self, order: int) -> Rule:
        return tensor_rule([f.quadrature(order) for f in self.factors])

    def to_dict(self):
        return {"kind": "product", "factors": [f.to_dict() for f in self.factors]}


def _number_out(value: Number) -> Union[str, int, float]:
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return float(value)


def fiber_domain(rank: int, half_width: Number = None) -> Domain:
    """
    Dominio de fibra del espacio total: la bola |v| < w, que preservan las acciones
    ortogonales de la fibra y la retracción v -> t v
    """
    w = Fraction(settings.FIBER_HALF_WIDTH) if half_width is None else half_width
    if rank == 0:
        return Point()
    return Ball(rank, w)


def product_domain(base: Domain, fiber: Domain) -> Domain:
    """Producto que omite los factores de dimensión 0"""
    factors = []
    for part in (base, fiber):
        if isinstance(part, Product):
            factors.extend(part.factors)
        elif part.dim > 0:
            factors.append(part)
    if not factors:
        return Point()
    if len(factors) == 1:
        return factors[0]
    return Product(tuple(factors))


def _aligned_axes(basis: np.ndarray, tol: float = 1e-12) -> List[Tuple[int, float]]:
    """Para una base alineada con los ejes, el eje y el signo de cada columna"""
    axes = []
    for j in range(basis.shape[1]):
        column = basis[:, j]
        support = np.flatnonzero(np.abs(column) > tol)
        if len(support) != 1 or abs(abs(column[support[0]]) - 1.0) > tol:
            return []
        axes.append((int(support[0]), float(np.sign(column[support[0]]))))
    return axes


def slice_domain(parent: Domain, basis: np.ndarray) -> Domain:
    """
    Dominio de V^g en las coordenadas y, con x = B y, dentro del dominio padre.

    Args:
        parent: Dominio de la carta
        basis: Base ortonormal (n, r) del subespacio fijo

    Returns:
        Domain: Point si r = 0, bola si el padre es bola, caja si la base está alineada

    Raises:
        AtlasError: si la intersección no es de un tipo soportado
    """
    r = basis.shape[1]
    if r == 0:
        if not bool(parent.contains(np.zeros((parent.dim, 1)))[0]):
            raise AtlasError("el conjunto fijo {0} no está en el dominio de la carta")
        return Point()
    if isinstance(parent, Ball):
        return Ball(r, parent.radius)
    if isinstance(parent, Shell):
        return Shell(r, parent.inner, parent.outer)
    if r == parent.dim and np.allclose(basis, np.eye(parent.dim), atol=1e-12):
        return parent
    if isinstance(parent, Box):
        axes = _aligned_axes(basis)
        if not axes:
            raise AtlasError("subespacio fijo no alineado con los ejes de una carta caja")
        used = {axis for axis, _ in axes}
        for i in range(parent.dim):
            if i not in used and not float(parent.lower[i]) < 0 < float(parent.upper[i]):
                raise AtlasError("el subespacio fijo no corta la caja")
        lower, upper = [], []
        for axis, sign in axes:
            a, b = parent.lower[axis], parent.upper[axis]
            lower.append(a if sign > 0 else -b)
            upper.append(b if sign > 0 else -a)
        return Box(tuple(lower), tuple(upper))
    if isinstance(parent, Product):
        parts, start, column = [], 0, 0
        for factor in parent.factors:
            block = basis[start : start + factor.dim]
            owned = [j for j in range(r) if np.any(np.abs(block[:, j]) > 1e-12)]
            if owned and owned != list(range(column, column + len(owned))):
                raise AtlasError("subespacio fijo que mezcla factores del producto")
            sub_basis = block[:, owned] if owned else np.zeros((factor.dim, 0))
            parts.append(slice_domain(factor, sub_basis))
            column += len(owned)
            start += factor.dim
        if column != r:
            raise AtlasError("subespacio fijo que mezcla factores del producto")
        result: Domain = Point()
        for part in parts:
            result = product_domain(result, part)
        return result
    raise AtlasError(f"no se sabe cortar un dominio {type(parent).__name__}")


def domain_from_dict(data: Dict[str, Any], parse_number) -> Domain:
    """Reconstruye un dominio desde su forma de documento"""
    kind = data.get("kind")
    if kind == "ball":
        return Ball(int(data["dim"]), parse_number(data.get("radius", 1)))
    if kind == "box":
        return Box(
            tuple(parse_number(a) for a in data["lower"]),
            tuple(parse_number(b) for b in data["upper"]),
        )
    if kind == "point":
        return Point()
    if kind == "shell":
        return Shell(int(data["dim"]), parse_number(data["inner"]), parse_number(data["outer"]))
    if kind == "product":
        return Product(tuple(domain_from_dict(f, parse_number) for f in data["factors"]))
    raise AtlasError(f"tipo de dominio desconocido '{kind}'")


@dataclass(frozen=True)
class Shell(Domain):
    """Corona inner < |x| < outer: región de muestreo de las identificaciones curvas"""

    dim: int
    inner: Number
    outer: Number

    def contains(self, points, tol=1e-9):
        norms = np.linalg.norm(np.asarray(points, dtype=float), axis=0)
        return (norms > float(self.inner) - tol) & (norms < float(self.outer) + tol)

    def center(self):
        # un punto en el radio medio sobre el primer eje
        point = np.zeros(self.dim)
        point[0] = 0.5 * (float(self.inner) + float(self.outer))
        return point

    def corners(self):
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim))).T
        middle = 0.5 * (float(self.inner) + float(self.outer))
        return signs * (middle / np.sqrt(self.dim))

    def random_points(self, rng, count):
        directions = rng.standard_normal((self.dim, count))
        directions /= np.linalg.norm(directions, axis=0)
        a, b = float(self.inner), float(self.outer)
        span = 0.5 * (b - a) * _RANDOM_SHRINK
        radii = 0.5 * (a + b) + span * rng.uniform(-1.0, 1.0, count)
        return directions * radii

    def quadrature(self, order: int) -> Rule:
        raise AtlasError("una corona sólo se usa para muestrear")

    def to_dict(self):
        return {
            "kind": "shell",
            "dim": self.dim,
            "inner": _number_out(self.inner),
            "outer": _number_out(self.outer),
        }


def sample_rng(subject: str) -> np.random.Generator:
    """Generador determinista por objeto: la muestra no depende del orden de validación"""
    return np.random.default_rng([settings.SEED, zlib.crc32(subject.encode("utf-8"))])
