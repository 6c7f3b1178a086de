import json

import numpy as np
import pytest

from src.orbibundle.gallery import (
    bad_example_with_section,
    flat_torus_example,
    s2_tangent_example,
    s2_trivial_example,
    s2_z3_bad_example,
    teardrop_example,
)
from src.orbibundle.gallery.builtins import CAP_RADIUS
from src.orbibundle.io.document import dump_example, write_document


@pytest.fixture
def rng():
    """
    Fixture con un generador aleatorio sembrado: las pruebas son deterministas.
    """
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def s2_z3_bad():
    """
    Fixture con el ejemplo de S² con Z/3 trivial y la fibra rotada.
    """
    return s2_z3_bad_example()


@pytest.fixture(scope="session")
def s2_tangent():
    return s2_tangent_example()


@pytest.fixture(scope="session")
def s2_trivial():
    return s2_trivial_example()


@pytest.fixture(scope="session")
def flat_torus():
    return flat_torus_example()


@pytest.fixture(scope="session")
def teardrop_3():
    return teardrop_example(3)


@pytest.fixture(scope="session")
def bad_random():
    return bad_example_with_section(0)


@pytest.fixture
def cap_radius():
    return CAP_RADIUS


@pytest.fixture
def example_file(tmp_path):
    """
    Fixture que escribe un ejemplo de la galería como documento JSON y
    devuelve su ruta.
    """

    def _write(example, name: str = "documento.json"):
        path = tmp_path / name
        write_document(dump_example(example), path)
        return path

    return _write


@pytest.fixture
def broken_document(tmp_path):
    """
    Fixture con un documento cuya expresión de transición no se puede analizar.
    """
    data = dump_example(s2_trivial_example())
    data["bundle"]["transitions"]["north>south"][0][0] = "x1 +* 2"
    path = tmp_path / "roto.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path
