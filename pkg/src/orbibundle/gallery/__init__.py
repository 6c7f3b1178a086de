"""
Galería de ejemplos de orbibundle: incorporados y aleatorios
"""

# Importar ejemplos incorporados
from .builtins import (
    flat_torus_example,
    s2_tangent_example,
    s2_trivial_example,
    s2_z3_bad_example,
    section_candidates,
    teardrop_example,
)

# Importar ejemplos aleatorios
from .randomized import bad_example_with_section, random_example, random_gallery

# Importar clase base y registro
from .base import Example, ExampleKind, ExampleRegistry

# Crear registro global de ejemplos
example_registry = ExampleRegistry()

# Registrar los ejemplos incorporados
example_registry.register_example(
    "s2-z3-bad", s2_z3_bad_example, "S² con Z/3 trivial y fibra rotada (fibrado malo)"
)
example_registry.register_example("s2-tangent", s2_tangent_example, "fibrado tangente de la esfera redonda")
example_registry.register_example(
    "s2-trivial", s2_trivial_example, "S² con el fibrado trivial de rango 2 y sección constante"
)
example_registry.register_example("flat-torus", flat_torus_example, "toro plano con el fibrado trivial")
example_registry.register_family("teardrop", teardrop_example, "gota Z/p y su fibrado tangente")
example_registry.register_alias("s2-tangentless", "s2-trivial")

# Registrar los ejemplos aleatorios
example_registry.register_example(
    "bad-random", bad_example_with_section, "fibrado malo aleatorio con sección que no se anula"
)
example_registry.register_family("random", random_example, "fibrado aleatorio con la semilla n", minimum=0)


def gallery_examples():
    """Todos los ejemplos con nombre fijo más teardrop-2, teardrop-3 y teardrop-7"""
    examples = [example_registry.get_example(name) for name in example_registry.names()]
    examples += [teardrop_example(p) for p in (2, 3, 7)]
    return examples


# Exportar todo lo necesario
__all__ = [
    "Example",
    "ExampleKind",
    "ExampleRegistry",
    "example_registry",
    "gallery_examples",
    "flat_torus_example",
    "s2_tangent_example",
    "s2_trivial_example",
    "s2_z3_bad_example",
    "section_candidates",
    "teardrop_example",
    "bad_example_with_section",
    "random_example",
    "random_gallery",
]
