"""
Pruebas de extremo a extremo sobre la galería: el ejemplo de S² con Z/3,
la construcción de VE, la obstrucción y Gauss-Bonnet.
"""

from fractions import Fraction

import numpy as np
import pytest

from src.orbibundle.core.atlas import validate_atlas
from src.orbibundle.core.bundles import (
    Verdict,
    classify,
    lift_section,
    restrict_section,
    restrict_to_zero_section,
    validate_bundle,
    validate_section,
    vertical_bundle,
)
from src.orbibundle.core.chernweil import CharacteristicKind, obstruction_verdict, orbifold_characteristic_class
from src.orbibundle.core.forms import form_residual
from src.orbibundle.core.sectors import census_coincidence, degree_shift_table, sector_census
from src.orbibundle.gallery import gallery_examples, random_gallery, section_candidates, teardrop_example


@pytest.fixture(scope="module")
def gallery():
    """
    Fixture con la galería completa: ejemplos con nombre, gotas y 25 fibrados aleatorios.
    """
    return gallery_examples() + random_gallery()


class TestTrivialZ3Sphere:
    """Tests para el fibrado malo sobre S² con Z/3 trivial"""

    def test_verdict(self, s2_z3_bad):
        verdict = classify(s2_z3_bad.bundle)
        assert verdict.verdict == Verdict.BAD
        assert all(kernel.order == 3 for kernel in verdict.base_kernels.values())
        assert all(kernel.is_trivial for kernel in verdict.fiber_kernels.values())

    def test_only_the_zero_section_is_valid(self, s2_z3_bad):
        candidates = section_candidates(s2_z3_bad.bundle)
        assert len(candidates) == 20
        valid = [s.name for s in candidates if validate_section(s2_z3_bad.bundle, s).success]
        assert valid == [candidates[0].name]

    def test_three_sectors_with_shifts(self, s2_z3_bad):
        total = vertical_bundle(s2_z3_bad.bundle).base
        assert len(sector_census(s2_z3_bad.atlas)) == 3
        shifts = [entry.shift for entry in degree_shift_table(total)]
        assert shifts == [0, Fraction(1, 3), Fraction(2, 3)]

    def test_euler_class_lands_in_degree_zero(self, s2_z3_bad):
        cls = orbifold_characteristic_class(
            s2_z3_bad.bundle, s2_z3_bad.connection, CharacteristicKind.EULER
        )
        twisted = cls.components[1:]
        assert [c.degree for c in twisted] == [0, 0]
        for component in twisted:
            for form in component.forms.values():
                assert form.degree == 0
                assert form_residual(form, np.zeros((2, 1))) == 1.0
        origin_degrees = [c.degree for c in cls.origin.components[1:]]
        assert origin_degrees == [Fraction(2, 3), Fraction(4, 3)]


class TestVerticalBundle:
    """Tests para VE sobre toda la galería"""

    def test_vertical_bundle_is_good_and_restricts(self, gallery):
        for example in gallery:
            vertical = vertical_bundle(example.bundle)
            assert classify(vertical).is_good, example.name
            assert restrict_to_zero_section(vertical).certificate <= 1e-12, example.name

    def test_structural_residuals(self, gallery):
        for example in gallery:
            assert validate_atlas(example.atlas).success, example.name
            assert validate_bundle(example.bundle, include_base=False).success, example.name

    def test_census_coincidence(self, gallery):
        for example in gallery:
            assert census_coincidence(example.bundle).coincide, example.name

    def test_lift_and_restrict_sections(self, gallery):
        for example in gallery:
            vertical = vertical_bundle(example.bundle)
            for section in example.sections:
                back = restrict_section(vertical, lift_section(example.bundle, section, vertical))
                assert back.to_dict() == section.to_dict(), (example.name, section.name)


class TestObstruction:
    """Tests para el veredicto de obstrucción en fibrados con sección"""

    @pytest.mark.parametrize("fixture_name", ["flat_torus", "s2_trivial"])
    def test_constant_sections(self, fixture_name, request):
        example = request.getfixturevalue(fixture_name)
        report = obstruction_verdict(example.bundle, example.section("constant"), example.partition)
        assert report.content["result"] == "PASS"
        assert report.content["node_max"] <= 1e-10
        assert report.content["integral_max"] <= 1e-8

    def test_bad_bundle_reaches_the_same_verdict(self, bad_random):
        report = obstruction_verdict(bad_random.bundle, bad_random.section(), bad_random.partition)
        assert report.metadata["verdict"] == Verdict.BAD.value
        assert report.content["result"] == "PASS"


class TestGaussBonnet:
    """Tests para las integrales de Euler conocidas"""

    def test_round_sphere(self, s2_tangent):
        cls = orbifold_characteristic_class(
            s2_tangent.bundle, s2_tangent.connection, CharacteristicKind.EULER, s2_tangent.partition
        )
        assert cls.component(0).integral == pytest.approx(2.0, abs=1e-6)

    @pytest.mark.parametrize("p", [2, 3, 7])
    def test_teardrop(self, p):
        example = teardrop_example(p)
        cls = orbifold_characteristic_class(
            example.bundle, example.connection, CharacteristicKind.EULER, example.partition
        )
        assert cls.component(0).integral == pytest.approx(1 + 1 / p, abs=1e-3)

    def test_direct_and_vertical_paths_agree(self, teardrop_3):
        args = (teardrop_3.bundle, teardrop_3.connection, CharacteristicKind.EULER, teardrop_3.partition)
        direct = orbifold_characteristic_class(*args)
        vertical = orbifold_characteristic_class(*args, via_vertical=True)
        for first, second in zip(direct.components, vertical.components):
            assert second.integral == pytest.approx(first.integral, abs=1e-6)
