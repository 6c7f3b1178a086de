"""
Grupos finitos dados por su tabla de multiplicación y sus representaciones matriciales.

Los elementos se identifican por su índice en la tabla; las etiquetas sólo sirven
para los reportes. Todas las comprobaciones son por exhaustión.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from src.orbibundle.config import settings
from src.orbibundle.core.report import CheckKind, Report
from src.orbibundle.errors import GroupError, RepresentationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteGroup:
    """Grupo finito como tabla de Cayley sobre índices"""

    name: str
    table: Tuple[Tuple[int, ...], ...]
    labels: Tuple[str, ...] = ()
    identity: int = 0

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(len(self.table))))

    @classmethod
    def from_table(
        cls, name: str, rows: Sequence[Sequence[int]], labels: Optional[Sequence[str]] = None
    ) -> "FiniteGroup":
        """
        Construye un grupo a partir de su tabla y comprueba la ley de grupo.

        Args:
            name: Nombre del grupo
            rows: Tabla n x n con table[a][b] = índice de a*b
            labels: Etiquetas opcionales de los elementos

        Returns:
            FiniteGroup

        Raises:
            GroupError: si la tabla no define un grupo
        """
        table = tuple(tuple(int(x) for x in row) for row in rows)
        n = len(table)
        if n == 0 or any(len(row) != n for row in table):
            raise GroupError(f"la tabla de '{name}' no es cuadrada")
        if any(not 0 <= x < n for row in table for x in row):
            raise GroupError(f"la tabla de '{name}' tiene índices fuera de rango")
        identity = next(
            (e for e in range(n) if all(table[e][a] == a == table[a][e] for a in range(n))),
            None,
        )
        if identity is None:
            raise GroupError(f"la tabla de '{name}' no tiene elemento neutro")
        group = cls(name, table, tuple(labels) if labels else (), identity)
        report = group.validate()
        if not report.success:
            raise GroupError(report.violations[0].message)
        return group

    @property
    def order(self) -> int:
        return len(self.table)

    @property
    def elements(self) -> range:
        return range(self.order)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inverse(self, a: int) -> int:
        for b in self.elements:
            if self.table[a][b] == self.identity:
                return b
        raise GroupError(f"el elemento {a} de '{self.name}' no tiene inverso")

    def power(self, a: int, n: int) -> int:
        base = a if n >= 0 else self.inverse(a)
        result = self.identity
        for _ in range(abs(n)):
            result = self.mul(result, base)
        return result

    def element_order(self, a: int) -> int:
        result, k = a, 1
        while result != self.identity:
            result = self.mul(result, a)
            k += 1
        return k

    def conjugate(self, g: int, h: int) -> int:
        """h g h^-1"""
        return self.mul(self.mul(h, g), self.inverse(h))

    def is_abelian(self) -> bool:
        return all(self.mul(a, b) == self.mul(b, a) for a in self.elements for b in self.elements)

    def validate(self) -> Report:
        """Comprueba asociatividad, neutro e inversos por exhaustión"""
        report = Report(title=f"grupo {self.name}")
        n = self.order
        for a, b, c in itertools.product(range(n), repeat=3):
            if self.table[self.table[a][b]][c] != self.table[a][self.table[b][c]]:
                report.add(
                    CheckKind.GROUP_LAW,
                    self.name,
                    f"no asociativa en ({self.labels[a]}, {self.labels[b]}, {self.labels[c]})",
                )
                return report
        for a in range(n):
            if self.identity not in self.table[a]:
                report.add(CheckKind.GROUP_LAW, self.name, f"{self.labels[a]} no tiene inverso")
        return report


def cyclic_group(n: int) -> FiniteGroup:
    """Z/n con elementos 0..n-1 y la suma módulo n"""
    if n < 1:
        raise GroupError("el orden de un grupo cíclico es positivo")
    table = tuple(tuple((a + b) % n for b in range(n)) for a in range(n))
    return FiniteGroup(f"Z{n}", table, tuple(str(a) for a in range(n)), 0)


def trivial_group() -> FiniteGroup:
    return FiniteGroup("1", ((0,),), ("e",), 0)


def symmetric_group(n: int) -> FiniteGroup:
    """S_n con las permutaciones en orden lexicográfico (la identidad primero)"""
    perms = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    # (p*q)(k) = p(q(k))
    table = tuple(
        tuple(index[tuple(p[q[k]] for k in range(n))] for q in perms) for p in perms
    )
    labels = tuple("".join(str(k + 1) for k in p) for p in perms)
    return FiniteGroup(f"S{n}", table, labels, 0)


def direct_product(g: FiniteGroup, h: FiniteGroup) -> FiniteGroup:
    """G x H con el elemento (a, b) en el índice a*|H| + b"""
    m = h.order
    pairs = list(itertools.product(g.elements, h.elements))
    table = tuple(
        tuple(g.mul(a1, a2) * m + h.mul(b1, b2) for a2, b2 in pairs) for a1, b1 in pairs
    )
    labels = tuple(f"({g.labels[a]},{h.labels[b]})" for a, b in pairs)
    return FiniteGroup(f"{g.name}x{h.name}", table, labels, g.identity * m + h.identity)


@dataclass(frozen=True)
class Subgroup:
    """Subconjunto de elementos cerrado bajo la ley del grupo padre"""

    parent: FiniteGroup
    elements: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "elements", frozenset(self.elements))

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def is_trivial(self) -> bool:
        return self.elements == frozenset({self.parent.identity})

    def is_closed(self) -> bool:
        return self.parent.identity in self.elements and all(
            self.parent.mul(a, b) in self.elements for a in self.elements for b in self.elements
        )

    def is_normal(self) -> bool:
        return all(
            self.parent.conjugate(g, h) in self.elements
            for g in self.elements
            for h in self.parent.elements
        )

    def sorted_elements(self) -> List[int]:
        return sorted(self.elements)

    def labels(self) -> List[str]:
        return [self.parent.labels[g] for g in self.sorted_elements()]

    def as_group(self, name: Optional[str] = None) -> Tuple[FiniteGroup, Dict[int, int]]:
        """
        Reindexa el subgrupo como grupo propio.

        Returns:
            (grupo, mapa índice en el padre -> índice en el subgrupo)
        """
        members = self.sorted_elements()
        position = {g: i for i, g in enumerate(members)}
        table = tuple(tuple(position[self.parent.mul(a, b)] for b in members) for a in members)
        labels = tuple(self.parent.labels[g] for g in members)
        group = FiniteGroup(
            name or f"{self.parent.name}[{','.join(labels)}]",
            table,
            labels,
            position[self.parent.identity],
        )
        return group, position


def conjugacy_classes(group: FiniteGroup) -> List[FrozenSet[int]]:
    """Clases de conjugación ordenadas por su índice mínimo"""
    seen: set = set()
    classes = []
    for g in group.elements:
        if g in seen:
            continue
        orbit = frozenset(group.conjugate(g, h) for h in group.elements)
        seen |= orbit
        classes.append(orbit)
    classes.sort(key=min)
    return classes


def class_index(group: FiniteGroup, g: int) -> int:
    """Posición de la clase de g en conjugacy_classes(group)"""
    for k, cls in enumerate(conjugacy_classes(group)):
        if g in cls:
            return k
    raise GroupError(f"{g} no pertenece a {group.name}")


def centralizer(group: FiniteGroup, g: int) -> Subgroup:
    return Subgroup(
        group, frozenset(h for h in group.elements if group.mul(h, g) == group.mul(g, h))
    )


def is_homomorphism(source: FiniteGroup, target: FiniteGroup, lam: Sequence[int]) -> bool:
    if len(lam) != source.order:
        return False
    return all(
        lam[source.mul(a, b)] == target.mul(lam[a], lam[b])
        for a in source.elements
        for b in source.elements
    )


def is_injective(lam: Sequence[int]) -> bool:
    return len(set(lam)) == len(lam)


def quotient_group(group: FiniteGroup, normal: Subgroup) -> Tuple[FiniteGroup, List[int]]:
    """
    Grupo cociente G/N.

    Returns:
        (cociente, lista que envía cada elemento de G a su coclase)
    """
    if not normal.is_normal():
        raise GroupError(f"el subgrupo no es normal en {group.name}")
    cosets: List[FrozenSet[int]] = []
    projection = [0] * group.order
    for g in group.elements:
        if any(g in c for c in cosets):
            continue
        coset = frozenset(group.mul(g, n) for n in normal.elements)
        for member in coset:
            projection[member] = len(cosets)
        cosets.append(coset)
    reps = [min(c) for c in cosets]
    table = tuple(tuple(projection[group.mul(a, b)] for b in reps) for a in reps)
    labels = tuple(group.labels[r] for r in reps)
    quotient = FiniteGroup(
        f"{group.name}/{normal.order}", table, labels, projection[group.identity]
    )
    return quotient, projection


@dataclass(frozen=True, eq=False)
class Representation:
    """Matrices reales ortogonales por elemento y, opcionalmente, matrices unitarias"""

    group: FiniteGroup
    dim: int
    matrices: Tuple[np.ndarray, ...]
    unitary: Optional[Tuple[np.ndarray, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.matrices) != self.group.order:
            raise RepresentationError(
                f"{len(self.matrices)} matrices para un grupo de orden {self.group.order}"
            )
        mats = tuple(np.asarray(m, dtype=float).reshape(self.dim, self.dim) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        if self.unitary is not None:
            if len(self.unitary) != self.group.order:
                raise RepresentationError("número de matrices unitarias distinto del orden")
            object.__setattr__(
                self, "unitary", tuple(np.atleast_2d(np.asarray(u, dtype=complex)) for u in self.unitary)
            )

    def matrix(self, g: int) -> np.ndarray:
        return self.matrices[g]

    @property
    def complex_dim(self) -> Optional[int]:
        return None if self.unitary is None else self.unitary[0].shape[0]

    def validate(self, subject: str = "representación") -> Report:
        """Homomorfismo, ortogonalidad y unitariedad dentro de MATRIX_TOL"""
        report = Report(title=subject)
        tol = settings.MATRIX_TOL
        group = self.group
        eye = np.eye(self.dim)
        for g in group.elements:
            m = self.matrices[g]
            report.check(
                float(np.max(np.abs(m @ m.T - eye), initial=0.0)),
                tol,
                CheckKind.ORTHOGONALITY,
                f"{subject}[{group.labels[g]}]",
                "matriz no ortogonal",
            )
        for a, b in itertools.product(group.elements, repeat=2):
            residual = np.max(
                np.abs(self.matrices[a] @ self.matrices[b] - self.matrices[group.mul(a, b)]),
                initial=0.0,
            )
            report.check(
                float(residual),
                tol,
                CheckKind.HOMOMORPHISM,
                f"{subject}[{group.labels[a]}*{group.labels[b]}]",
                "M(g)M(h) != M(gh)",
            )
        if self.unitary is not None:
            c = self.unitary[0].shape[0]
            ceye = np.eye(c)
            for g in group.elements:
                u = self.unitary[g]
                report.check(
                    float(np.max(np.abs(u @ u.conj().T - ceye), initial=0.0)),
                    tol,
                    CheckKind.ORTHOGONALITY,
                    f"{subject}[{group.labels[g]}]",
                    "matriz no unitaria",
                )
            for a, b in itertools.product(group.elements, repeat=2):
                residual = np.max(
                    np.abs(self.unitary[a] @ self.unitary[b] - self.unitary[group.mul(a, b)]),
                    initial=0.0,
                )
                report.check(
                    float(residual),
                    tol,
                    CheckKind.HOMOMORPHISM,
                    f"{subject}[{group.labels[a]}*{group.labels[b]}]",
                    "U(g)U(h) != U(gh)",
                )
        return report

    def with_unitary(self, unitary: Sequence[np.ndarray]) -> "Representation":
        return Representation(self.group, self.dim, self.matrices, tuple(unitary))


def trivial_representation(group: FiniteGroup, dim: int) -> Representation:
    return Representation(group, dim, tuple(np.eye(dim) for _ in group.elements))


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_representation(group: FiniteGroup, k: int = 1) -> Representation:
    """Z/n actuando en R^2 por rotaciones de ángulo 2*pi*k*a/n; incluye la estructura compleja"""
    n = group.order
    matrices = tuple(rotation(2 * np.pi * k * a / n) for a in group.elements)
    unitary = tuple(np.array([[np.exp(2j * np.pi * k * a / n)]]) for a in group.elements)
    return Representation(group, 2, matrices, unitary)


def direct_sum(a: Representation, b: Representation) -> Representation:
    """Suma directa de dos representaciones del mismo grupo, bloque a bloque"""
    if a.group != b.group:
        raise RepresentationError("la suma directa necesita el mismo grupo")
    d = a.dim + b.dim
    matrices = []
    for g in a.group.elements:
        m = np.zeros((d, d))
        m[: a.dim, : a.dim] = a.matrices[g]
        m[a.dim :, a.dim :] = b.matrices[g]
        matrices.append(m)
    unitary = None
    if a.unitary is not None and b.unitary is not None:
        ca, cb = a.complex_dim, b.complex_dim
        unitary = []
        for g in a.group.elements:
            u = np.zeros((ca + cb, ca + cb), dtype=complex)
            u[:ca, :ca] = a.unitary[g]
            u[ca:, ca:] = b.unitary[g]
            unitary.append(u)
        unitary = tuple(unitary)
    return Representation(a.group, d, tuple(matrices), unitary)


def _normalize_columns(basis: np.ndarray) -> np.ndarray:
    # cada columna con su entrada de mayor módulo positiva
    for j in range(basis.shape[1]):
        column = basis[:, j]
        column[np.abs(column) < 1e-14] = 0.0
        pivot = int(np.argmax(np.abs(column)))
        if column[pivot] < 0:
            basis[:, j] = -column
    return basis


def _coordinate_blocks(a: np.ndarray, tol: float) -> List[List[int]]:
    """Componentes conexas de las coordenadas acopladas por entradas no nulas de a"""
    n = a.shape[0]
    linked = (np.abs(a) > tol) | (np.abs(a.T) > tol)
    seen: set = set()
    blocks = []
    for start in range(n):
        if start in seen:
            continue
        block, stack = [], [start]
        seen.add(start)
        while stack:
            i = stack.pop()
            block.append(i)
            for j in np.flatnonzero(linked[i]):
                if int(j) not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        blocks.append(sorted(block))
    return blocks


def fixed_subspace(rep: Representation, g: int) -> np.ndarray:
    """
    Base ortonormal de V^g = ker(M(g) - I).

    El núcleo se calcula por bloques de coordenadas acopladas, así que en una suma
    directa las columnas de cada sumando aparecen en orden y los ejes fijos quedan
    alineados con la base canónica.

    Args:
        rep: Representación
        g: Elemento del grupo

    Returns:
        ndarray (d, r) con la base en columnas; r = dim V^g (puede ser 0)
    """
    if rep.dim == 0:
        return np.zeros((0, 0))
    shifted = rep.matrix(g) - np.eye(rep.dim)
    columns = []
    for block in _coordinate_blocks(shifted, settings.MATRIX_TOL):
        sub = shifted[np.ix_(block, block)]
        if np.max(np.abs(sub)) <= settings.MATRIX_TOL:
            kernel = np.eye(len(block))
        else:
            kernel = _normalize_columns(null_space(sub, rcond=1e-10))
        for j in range(kernel.shape[1]):
            column = np.zeros(rep.dim)
            column[block] = kernel[:, j]
            columns.append(column)
    if not columns:
        return np.zeros((rep.dim, 0))
    return np.column_stack(columns)


def action_kernel(rep: Representation) -> Subgroup:
    """{g : M(g) = I} dentro de MATRIX_TOL"""
    eye = np.eye(rep.dim)
    return Subgroup(
        rep.group,
        frozenset(
            g
            for g in rep.group.elements
            if rep.dim == 0 or np.max(np.abs(rep.matrix(g) - eye)) <= settings.MATRIX_TOL
        ),
    )


def restrict_representation(
    rep: Representation, subgroup: Subgroup, basis: np.ndarray
) -> Tuple[Representation, Dict[int, int]]:
    """
    Restringe la acción a un subgrupo que preserva el subespacio con la base dada.

    Returns:
        (representación B^T M(h) B del subgrupo reindexado, mapa de índices)
    """
    group, position = subgroup.as_group()
    members = subgroup.sorted_elements()
    r = basis.shape[1]
    matrices = tuple(basis.T @ rep.matrix(h) @ basis if r else np.zeros((0, 0)) for h in members)
    return Representation(group, r, matrices), position

