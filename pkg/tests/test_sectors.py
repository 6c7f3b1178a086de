from fractions import Fraction

import numpy as np
import pytest

from src.orbibundle.core.atlas import Atlas, Chart, validate_atlas
from src.orbibundle.core.bundles import total_space, validate_bundle, validate_section
from src.orbibundle.core.domains import Ball, Point
from src.orbibundle.core.groups import (
    cyclic_group,
    direct_sum,
    rotation_representation,
    symmetric_group,
    trivial_representation,
)
from src.orbibundle.core.sectors import (
    census_coincidence,
    degree_shift,
    degree_shift_table,
    fixed_codimension,
    retraction_check,
    sector_atlas,
    sector_bundle,
    sector_census,
    sector_section,
    sector_shift,
)
from src.orbibundle.errors import DegreeShiftError, SectorError
from src.orbibundle.gallery import random_gallery


class TestCensus:
    """Tests para el censo de sectores"""

    def test_trivial_z3_sphere(self, s2_z3_bad):
        census = sector_census(s2_z3_bad.atlas)
        assert len(census) == 3
        assert census.untwisted.untwisted
        assert {m.chart for m in census.untwisted.members} == {"north", "south"}
        twisted = census.by_label("(1)")
        assert twisted.nodes == frozenset({("north", 1), ("south", 1)})

    def test_teardrop_cap_classes_stay_apart(self, teardrop_3):
        """El overlap con lambda no inyectivo no identifica clases"""
        census = sector_census(teardrop_3.atlas)
        assert len(census) == 3
        assert census.untwisted.nodes == frozenset({("cap", 0), ("base", 0)})
        assert all(len(sector.members) == 1 for sector in census.classes[1:])

    def test_symmetric_group_chart(self):
        s3 = symmetric_group(3)
        atlas = Atlas("s3", (Chart("only", Ball(2), s3, trivial_representation(s3, 2)),))
        census = sector_census(atlas)
        assert len(census) == 3
        assert census.class_of("only", 0).untwisted

    def test_unknown_node(self, s2_z3_bad):
        census = sector_census(s2_z3_bad.atlas)
        with pytest.raises(SectorError):
            census.class_of("ghost", 0)
        with pytest.raises(SectorError):
            census.by_label("(7)")

    def test_census_of_total_space_coincides(self, s2_z3_bad, teardrop_3, bad_random):
        for example in (s2_z3_bad, teardrop_3, bad_random):
            coincidence = census_coincidence(example.bundle)
            assert coincidence.coincide, coincidence.counterexample
            assert coincidence.matching[0] == 0

    def test_random_gallery_censuses_coincide(self):
        for example in random_gallery():
            assert census_coincidence(example.bundle).coincide, example.name


class TestDegreeShift:
    """Tests para los números de desplazamiento de grado"""

    def test_rotation_eigenvalue(self):
        rep = rotation_representation(cyclic_group(5), 2)
        assert degree_shift(rep, 1) == Fraction(2, 5)
        assert degree_shift(rep, 0) == 0

    def test_shift_and_inverse_add_to_codimension(self):
        z6 = cyclic_group(6)
        rep = direct_sum(rotation_representation(z6, 1), rotation_representation(z6, 3))
        for g in z6.elements:
            total = degree_shift(rep, g) + degree_shift(rep, z6.inverse(g))
            assert total == fixed_codimension(rep, g)

    def test_without_complex_structure(self):
        rep = trivial_representation(cyclic_group(2), 2)
        with pytest.raises(DegreeShiftError):
            degree_shift(rep, 1)

    def test_trivial_base_shifts_vanish(self, s2_z3_bad):
        table = degree_shift_table(s2_z3_bad.atlas)
        assert [entry.shift for entry in table] == [0, 0, 0]

    def test_total_space_shifts(self, s2_z3_bad):
        """La fibra rotada aporta 1/3 y 2/3 en el espacio total"""
        total = total_space(s2_z3_bad.bundle)
        table = degree_shift_table(total)
        assert [entry.shift for entry in table] == [0, Fraction(1, 3), Fraction(2, 3)]
        assert [entry.codimension for entry in table[1:]] == [1, 1]

    def test_teardrop_shifts(self, teardrop_3):
        census = sector_census(teardrop_3.atlas)
        shifts = sorted(sector_shift(teardrop_3.atlas, sector) for sector in census.classes)
        assert shifts == [0, Fraction(1, 3), Fraction(2, 3)]


class TestSectorAtlas:
    """Tests para los atlas de conjuntos fijos"""

    def test_teardrop_twisted_sector_is_a_point(self, teardrop_3):
        census = sector_census(teardrop_3.atlas)
        sectors = sector_atlas(teardrop_3.atlas, census.classes[1])
        assert [chart.id for chart in sectors.atlas.charts] == ["cap"]
        chart = sectors.atlas.chart("cap")
        assert isinstance(chart.domain, Point)
        assert chart.group.order == 3
        assert validate_atlas(sectors.atlas).success

    def test_trivial_action_sector_is_the_whole_chart(self, s2_z3_bad):
        census = sector_census(s2_z3_bad.atlas)
        sectors = sector_atlas(s2_z3_bad.atlas, census.by_label("(1)"))
        assert sorted(sectors.atlas.chart_ids) == ["north", "south"]
        assert all(chart.dim == 2 for chart in sectors.atlas.charts)
        assert len(sectors.atlas.overlaps) == len(s2_z3_bad.atlas.overlaps)
        assert validate_atlas(sectors.atlas).success

    def test_untwisted_sector_reproduces_the_atlas(self, teardrop_3):
        census = sector_census(teardrop_3.atlas)
        sectors = sector_atlas(teardrop_3.atlas, census.untwisted)
        assert len(sectors.atlas.charts) == len(teardrop_3.atlas.charts)
        assert validate_atlas(sectors.atlas).success


class TestSectorBundle:
    """Tests para el fibrado y las secciones sobre un sector"""

    def test_rotated_fiber_has_no_fixed_vectors(self, s2_z3_bad):
        census = sector_census(s2_z3_bad.atlas)
        assert sector_bundle(s2_z3_bad.bundle, census.by_label("(1)")).rank == 0
        assert sector_bundle(s2_z3_bad.bundle, census.untwisted).rank == 2

    def test_sign_fiber_keeps_one_line(self, bad_random):
        census = sector_census(bad_random.atlas)
        twisted = census.classes[1]
        restricted = sector_bundle(bad_random.bundle, twisted)
        assert restricted.rank == 1
        assert validate_bundle(restricted).success
        piece = sector_section(bad_random.bundle, bad_random.section("fixed"), twisted, restricted)
        report = validate_section(restricted, piece)
        assert report.success
        assert report.content["min_norm"] == pytest.approx(1.0, abs=1e-10)

    def test_teardrop_sector_bundle(self, teardrop_3):
        census = sector_census(teardrop_3.atlas)
        restricted = sector_bundle(teardrop_3.bundle, census.classes[1])
        assert restricted.rank == 0
        assert validate_bundle(restricted).success


class TestRetraction:
    """Tests para la retracción sobre la sección cero"""

    def test_retraction_on_total_space_sectors(self, s2_z3_bad):
        total = total_space(s2_z3_bad.bundle)
        for sector in sector_census(total).classes:
            report = retraction_check(s2_z3_bad.bundle, sector, total=total)
            assert report.success, report.subjects()
            assert all(value <= 1e-12 for value in report.content["residuals"].values())

    def test_t_outside_unit_interval(self, s2_z3_bad):
        total = total_space(s2_z3_bad.bundle)
        sector = sector_census(total).classes[1]
        with pytest.raises(SectorError):
            retraction_check(s2_z3_bad.bundle, sector, t_samples=(Fraction(2),), total=total)

    def test_retraction_fixes_base_points(self, teardrop_3):
        total = total_space(teardrop_3.bundle)
        report = retraction_check(teardrop_3.bundle, sector_census(total).untwisted, total=total)
        assert report.success
        assert np.isfinite(list(report.content["residuals"].values())).all()
