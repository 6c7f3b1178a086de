"""
Reglas de Gauss-Legendre en producto tensorial y convergencia por duplicación del orden.
"""

import logging
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.orbibundle.config import settings
from src.orbibundle.errors import QuadratureError

logger = logging.getLogger(__name__)

Rule = Tuple[np.ndarray, np.ndarray]


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> Rule:
    """Nodos y pesos de Gauss-Legendre en [-1, 1]"""
    if order < 1:
        raise QuadratureError(f"orden de cuadratura no válido: {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def interval_rule(order: int, a: float, b: float) -> Rule:
    """Regla de orden dado en [a, b]; los nodos tienen forma (1, order)"""
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (b - a)
    return (a + half * (nodes + 1.0))[np.newaxis, :], half * weights


def point_rule() -> Rule:
    """Regla de un punto de dimensión 0 con peso 1"""
    return np.zeros((0, 1)), np.ones(1)


def tensor_rule(rules: Sequence[Rule]) -> Rule:
    """
    Producto tensorial de reglas.

    Args:
        rules: Reglas (nodos (d_i, m_i), pesos (m_i,))

    Returns:
        Nodos (sum d_i, prod m_i) y pesos (prod m_i,)
    """
    nodes, weights = point_rule()
    for factor_nodes, factor_weights in rules:
        m, k = weights.size, factor_weights.size
        nodes = np.vstack(
            [np.repeat(nodes, k, axis=1), np.tile(factor_nodes, (1, m))]
        )
        weights = np.repeat(weights, k) * np.tile(factor_weights, m)
    return nodes, weights


def integrate_rule(rule: Rule, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
    nodes, weights = rule
    values = np.asarray(integrand(nodes), dtype=float)
    return float(np.dot(np.broadcast_to(values, weights.shape), weights))


def integrate_converged(
    rule_for_order: Callable[[int], Rule],
    integrand: Callable[[np.ndarray], np.ndarray],
    order: Optional[int] = None,
    max_order: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> Tuple[float, int]:
    """
    Integra duplicando el orden hasta que dos valores sucesivos coinciden.

    Args:
        rule_for_order: Construye la regla para un orden por eje
        integrand: Función vectorizada de los nodos (n, m) -> (m,)
        order: Orden inicial (QUAD_ORDER por defecto)
        max_order: Orden máximo (QUAD_MAX_ORDER por defecto)
        tolerance: Diferencia admitida, relativa a max(1, |valor|)

    Returns:
        (valor, orden usado)

    Raises:
        QuadratureError: si no converge antes del orden máximo
    """
    order = order or settings.QUAD_ORDER
    max_order = max_order or settings.QUAD_MAX_ORDER
    tolerance = settings.QUAD_TOLERANCE if tolerance is None else tolerance
    previous = integrate_rule(rule_for_order(order), integrand)
    while True:
        if 2 * order > max_order:
            raise QuadratureError(
                f"la cuadratura no converge hasta el orden {max_order} (último valor {previous:.6g})"
            )
        order *= 2
        current = integrate_rule(rule_for_order(order), integrand)
        difference = abs(current - previous)
        logger.debug("cuadratura orden %d: %.12g (diferencia %.3e)", order, current, difference)
        if difference <= tolerance * max(1.0, abs(current)):
            return current, order
        previous = current
