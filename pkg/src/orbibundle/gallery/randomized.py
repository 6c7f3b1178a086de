"""
Fibrados pequeños aleatorios sobre grupos de orden <= 6 y rango <= 3.

Cada fibrado vive sobre dos bolas concéntricas unidas por la inclusión, con la
misma acción de base en las dos cartas; la acción de fibra de la carta grande es
la de la pequeña conjugada por la transición constante q.
"""

import itertools
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import ortho_group

from src.orbibundle.core.atlas import Atlas, Chart, Injection
from src.orbibundle.core.bundles import BundleCocycle, make_section
from src.orbibundle.core.chernweil import PartitionOfUnity, flat_connection
from src.orbibundle.core.domains import Ball
from src.orbibundle.core.expr import ONE, ZERO
from src.orbibundle.core.forms import constant_matrix
from src.orbibundle.core.groups import (
    FiniteGroup,
    Representation,
    cyclic_group,
    direct_product,
    direct_sum,
    rotation_representation,
    symmetric_group,
    trivial_representation,
)
from src.orbibundle.gallery.base import Example, ExampleKind

logger = logging.getLogger(__name__)

RANDOM_GALLERY_SIZE = 25
MAX_RANK = 3
MAX_BASE_DIM = 2


def small_groups() -> List[FiniteGroup]:
    """Z1..Z6, S3 y Z2 x Z2"""
    groups = [cyclic_group(n) for n in range(1, 7)]
    groups.append(symmetric_group(3))
    groups.append(direct_product(cyclic_group(2), cyclic_group(2)))
    return groups


def sign_characters(group: FiniteGroup) -> List[Representation]:
    """Todos los homomorfismos G -> {±1} como representaciones de dimensión 1"""
    characters = []
    for signs in itertools.product((1.0, -1.0), repeat=group.order):
        if signs[group.identity] != 1.0:
            continue
        if all(
            signs[a] * signs[b] == signs[group.mul(a, b)]
            for a, b in itertools.product(group.elements, repeat=2)
        ):
            characters.append(Representation(group, 1, tuple(np.array([[s]]) for s in signs)))
    return characters


def _standard_s3(group: FiniteGroup) -> Representation:
    """Representación estándar de S3: permutaciones sobre el plano x1 + x2 + x3 = 0"""
    basis = np.array([[1.0, 1.0], [-1.0, 1.0], [0.0, -2.0]]) / np.array([np.sqrt(2), np.sqrt(6)])
    matrices = []
    for label in group.labels:
        perm = [int(c) - 1 for c in label]
        p = np.zeros((3, 3))
        for k, image in enumerate(perm):
            p[image, k] = 1.0
        matrices.append(basis.T @ p @ basis)
    return Representation(group, 2, tuple(matrices))


def plane_pieces(group: FiniteGroup) -> List[Representation]:
    """Representaciones de dimensión 2 disponibles para el grupo"""
    if group.name == "S3":
        return [_standard_s3(group)]
    if group.name.startswith("Z") and "x" not in group.name and group.order > 2:
        return [rotation_representation(group, k) for k in range(1, group.order // 2 + 1)]
    return []


def random_representation(rng: np.random.Generator, group: FiniteGroup, dim: int) -> Representation:
    """Suma directa aleatoria de caracteres de signo y piezas planas hasta la dimensión pedida"""
    lines = sign_characters(group)
    planes = plane_pieces(group)
    pieces: List[Representation] = []
    remaining = dim
    while remaining > 0:
        if remaining >= 2 and planes and rng.random() < 0.5:
            pieces.append(planes[rng.integers(len(planes))])
            remaining -= 2
        else:
            pieces.append(lines[rng.integers(len(lines))])
            remaining -= 1
    if not pieces:
        return trivial_representation(group, 0)
    rep = pieces[0]
    for piece in pieces[1:]:
        rep = direct_sum(rep, piece)
    return rep


def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[rng.choice((-1.0, 1.0))]])
    return ortho_group.rvs(dim, random_state=rng)


def _conjugated(rep: Representation, q: np.ndarray) -> Representation:
    return Representation(rep.group, rep.dim, tuple(q @ m @ q.T for m in rep.matrices))


def nested_balls_bundle(
    name: str,
    base_action: Representation,
    fiber_action: Representation,
    q: np.ndarray,
) -> BundleCocycle:
    """Dos bolas B(1) ⊂ B(2) con la inclusión, la identidad como lambda y transición q"""
    group = base_action.group
    dim = base_action.dim
    small = Chart("small", Ball(dim, 1), group, base_action)
    large = Chart("large", Ball(dim, 2), group, base_action)
    inclusion = Injection.affine(
        "small>large", "small", "large", np.eye(dim).tolist(), [0] * dim, tuple(group.elements)
    )
    atlas = Atlas(f"{name}-base", (small, large), (inclusion,))
    return BundleCocycle(
        name,
        atlas,
        fiber_action.dim,
        {"small": fiber_action, "large": _conjugated(fiber_action, q)},
        {"small>large": constant_matrix(q)},
    )


def _inclusion_partition() -> PartitionOfUnity:
    # la carta grande cubre a la pequeña
    return PartitionOfUnity({"small": ZERO, "large": ONE})


def random_example(seed: int) -> Example:
    """
    Fibrado aleatorio reproducible a partir de la semilla.

    Args:
        seed: Semilla del generador

    Returns:
        Example: con conexión plana (las transiciones son constantes)
    """
    rng = np.random.default_rng(seed)
    groups = small_groups()
    group = groups[rng.integers(len(groups))]
    base_dim = int(rng.integers(1, MAX_BASE_DIM + 1))
    rank = int(rng.integers(1, MAX_RANK + 1))
    base_action = random_representation(rng, group, base_dim)
    fiber_action = random_representation(rng, group, rank)
    q = random_orthogonal(rng, rank)
    bundle = nested_balls_bundle(f"random-{seed}", base_action, fiber_action, q)
    logger.debug("fibrado aleatorio %s: grupo %s, base %d, rango %d", bundle.name, group.name, base_dim, rank)
    return Example(
        bundle.name,
        f"fibrado aleatorio sobre {group.name}, rango {rank}",
        bundle,
        flat_connection(bundle),
        _inclusion_partition(),
        kind=ExampleKind.RANDOMIZED,
    )


def random_gallery(count: int = RANDOM_GALLERY_SIZE, seeds: Optional[Sequence[int]] = None) -> List[Example]:
    seeds = list(seeds) if seeds is not None else list(range(count))
    return [random_example(seed) for seed in seeds]


def bad_example_with_section(seed: int = 0) -> Example:
    """
    Fibrado malo con sección que no se anula: Z/2 actúa trivialmente en la base
    y por trivial ⊕ signo en la fibra; la sección es el vector fijo (1, 0) en la
    carta pequeña y q (1, 0) en la grande.
    """
    rng = np.random.default_rng(seed)
    group = cyclic_group(2)
    sign = [c for c in sign_characters(group) if c.matrix(1)[0, 0] < 0][0]
    fiber_action = direct_sum(trivial_representation(group, 1), sign)
    q = random_orthogonal(rng, 2)
    bundle = nested_balls_bundle("bad-random", trivial_representation(group, 2), fiber_action, q)
    fixed = q @ np.array([1.0, 0.0])
    section = make_section(
        "fixed",
        bundle,
        {"small": (ONE, ZERO), "large": tuple(float(v) for v in fixed)},
    )
    return Example(
        "bad-random",
        "fibrado malo aleatorio con una sección que no se anula",
        bundle,
        flat_connection(bundle),
        _inclusion_partition(),
        (section,),
        kind=ExampleKind.RANDOMIZED,
    )
