import dataclasses
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from src.orbibundle.core.bundles import BundleCocycle
from src.orbibundle.core.chernweil import (
    CharacteristicKind,
    PartitionOfUnity,
    bianchi_residual,
    check_form_compatibility,
    check_partition,
    chern_1,
    curvature,
    euler_closedness,
    euler_form,
    flat_connection,
    integrate,
    integrate_detailed,
    obstruction_verdict,
    orbifold_characteristic_class,
    pfaffian,
    pontryagin_1,
    split_connection,
    validate_connection,
)
from src.orbibundle.core.expr import ONE, ZERO
from src.orbibundle.core.forms import MatrixForm, differential, form_residual, scale, wedge
from src.orbibundle.core.groups import trivial_group, trivial_representation
from src.orbibundle.core.report import CheckKind
from src.orbibundle.errors import ConnectionDataError, PfaffianError, QuadratureError, SectionError
from src.orbibundle.gallery import teardrop_example
from src.orbibundle.gallery.builtins import rotation_connection


def _pfaffian_by_matchings(a: np.ndarray) -> float:
    """Pf(A) = 1/(2^n n!) sum_sigma sgn(sigma) prod a_{sigma(2i-1) sigma(2i)}"""
    size = a.shape[0]
    half = size // 2
    result = 0.0
    for sigma in itertools.permutations(range(size)):
        inversions = sum(1 for i in range(size) for j in range(i + 1, size) if sigma[i] > sigma[j])
        term = (-1) ** inversions
        for i in range(half):
            term *= a[sigma[2 * i], sigma[2 * i + 1]]
        result += term
    return result / (2 ** half * math.factorial(half))


def _pfaffian_by_cofactors(a: np.ndarray) -> float:
    """Pf(A) = sum_{j>1} (-1)^j a_1j Pf(A_1j^) sin caché"""
    size = a.shape[0]
    if size == 0:
        return 1.0
    rest = list(range(1, size))
    result = 0.0
    for position, j in enumerate(rest):
        keep = [k for k in rest if k != j]
        result += (-1) ** position * a[0, j] * _pfaffian_by_cofactors(a[np.ix_(keep, keep)])
    return result


def _random_skew(rng, size: int) -> np.ndarray:
    a = rng.uniform(-1, 1, (size, size))
    return a - a.T


def _rank_bundle(example, rank: int) -> BundleCocycle:
    """Fibrado trivial de rango `rank` sobre la base del ejemplo"""
    base = example.atlas
    group = trivial_group()
    return BundleCocycle(
        f"rango {rank}",
        base,
        rank,
        {cid: trivial_representation(group, rank) for cid in base.chart_ids},
        {arrow.id: tuple(tuple(ONE if i == j else ZERO for j in range(rank)) for i in range(rank))
         for arrow in base.arrows()},
    )


class TestPfaffian:
    """Tests para el pfaffiano numérico y simbólico"""

    def test_block_diagonal_normalization(self):
        a = np.zeros((4, 4))
        a[0, 1], a[1, 0] = 2.0, -2.0
        a[2, 3], a[3, 2] = 5.0, -5.0
        assert pfaffian(a) == pytest.approx(10.0)

    def test_matches_sum_over_matchings(self, rng):
        for _ in range(200):
            size = int(rng.choice([2, 4, 6]))
            a = _random_skew(rng, size)
            assert pfaffian(a) == pytest.approx(_pfaffian_by_matchings(a), abs=1e-12)

    def test_size_eight_matches_cofactor_recursion(self, rng):
        for _ in range(5):
            a = _random_skew(rng, 8)
            assert pfaffian(a) == pytest.approx(_pfaffian_by_cofactors(a), abs=1e-12)

    def test_rational_matrix_is_exact(self):
        third = Fraction(1, 3)
        result = pfaffian([[0, third], [-third, 0]])
        assert isinstance(result, Fraction)
        assert result == Fraction(1, 3)

    def test_integer_block_diagonal_is_exact(self):
        a = [[0, 2, 0, 0], [-2, 0, 0, 0], [0, 0, 0, Fraction(5, 7)], [0, 0, Fraction(-5, 7), 0]]
        assert pfaffian(a) == Fraction(10, 7)

    def test_rational_matrix_not_skew(self):
        with pytest.raises(PfaffianError):
            pfaffian([[0, 1], [1, 0]])

    def test_zero_form_matrix_keeps_degree(self):
        for size in (2, 4):
            result = pfaffian(MatrixForm.zeros(size, 2, size))
            assert result.is_empty
            assert result.degree == size

    def test_square_is_determinant(self, rng):
        for size in (2, 4, 6, 8):
            a = _random_skew(rng, size)
            assert pfaffian(a) ** 2 == pytest.approx(np.linalg.det(a), rel=1e-9)

    def test_empty_matrix_is_one(self):
        assert pfaffian(np.zeros((0, 0))) == 1.0

    def test_odd_dimension(self):
        with pytest.raises(PfaffianError):
            pfaffian(np.zeros((3, 3)))

    def test_not_skew(self, rng):
        with pytest.raises(PfaffianError):
            pfaffian(rng.uniform(-1, 1, (4, 4)))

    def test_form_matrix(self):
        """Pf de 2-formas: en dimensión 4, Pf = w12 ^ w34 - w13 ^ w24 + w14 ^ w23"""
        dx = [differential(4, j) for j in range(1, 5)]
        f = wedge(dx[0], dx[1])
        g = wedge(dx[2], dx[3])
        zero = scale(f, 0)
        omega = MatrixForm.build([
            [zero, f, zero, zero],
            [scale(f, -1), zero, zero, zero],
            [zero, zero, zero, g],
            [zero, zero, scale(g, -1), zero],
        ])
        result = pfaffian(omega)
        assert result.degree == 4
        assert form_residual(result - wedge(f, g), np.zeros((4, 1))) == 0.0


class TestCurvature:
    """Tests para curvatura, Bianchi y la forma de Euler"""

    def test_flat_connection_is_flat(self, s2_trivial):
        curv = curvature(flat_connection(s2_trivial.bundle))
        assert all(entry.is_empty for omega in curv.forms.values() for row in omega.entries for entry in row)

    def test_bianchi_identity(self, teardrop_3, s2_tangent):
        for example in (teardrop_3, s2_tangent):
            assert bianchi_residual(example.connection) <= 1e-10

    def test_gallery_connections_are_valid(self, teardrop_3, s2_tangent, s2_trivial, flat_torus):
        for example in (teardrop_3, s2_tangent, s2_trivial, flat_torus):
            report = validate_connection(example.connection)
            assert report.success, (example.name, report.subjects())

    def test_incompatible_connection(self, s2_tangent):
        connection = s2_tangent.connection
        forms = dict(connection.forms)
        forms["cap"] = rotation_connection(ONE)
        broken = dataclasses.replace(connection, forms=forms)
        report = validate_connection(broken)
        assert any(v.kind == CheckKind.COMPATIBILITY for v in report.violations)

    def test_missing_chart(self, s2_tangent):
        connection = dataclasses.replace(s2_tangent.connection, forms={})
        with pytest.raises(ConnectionDataError):
            connection.form("cap")

    def test_euler_form_is_closed_and_compatible(self, teardrop_3):
        curv = curvature(teardrop_3.connection)
        assert euler_closedness(curv) <= 1e-10
        assert check_form_compatibility(teardrop_3.atlas, euler_form(curv)).success

    def test_rank_zero_euler_form_is_one(self, s2_trivial):
        forms = euler_form(curvature(flat_connection(_rank_bundle(s2_trivial, 0))))
        for form in forms.values():
            assert form.degree == 0
            assert form_residual(form, np.zeros((2, 1))) == 1.0

    def test_odd_rank_euler_form_vanishes(self, s2_trivial):
        forms = euler_form(curvature(flat_connection(_rank_bundle(s2_trivial, 1))))
        assert all(form.is_empty for form in forms.values())


class TestIntegration:
    """Tests para la partición de la unidad y la integral de orbifold"""

    def test_gallery_partitions(self, teardrop_3, s2_tangent, s2_z3_bad, flat_torus):
        for example in (teardrop_3, s2_tangent, s2_z3_bad, flat_torus):
            report = check_partition(example.atlas, example.partition)
            assert report.success, (example.name, report.subjects())

    def test_partition_that_does_not_sum_to_one(self, s2_tangent):
        partition = PartitionOfUnity({"cap": ONE, "base": ONE})
        report = check_partition(s2_tangent.atlas, partition)
        assert report.subjects() == [overlap.id for overlap in s2_tangent.atlas.overlaps]

    def test_partition_missing_chart(self, s2_tangent):
        report = check_partition(s2_tangent.atlas, PartitionOfUnity({"cap": ONE}))
        assert report.subjects() == ["base"]

    def test_area_of_flat_torus(self, flat_torus):
        area = {"square": wedge(differential(2, 1), differential(2, 2))}
        assert integrate(flat_torus.atlas, area, flat_torus.partition) == pytest.approx(1.0, abs=1e-12)

    def test_degree_must_match_dimension(self, flat_torus):
        with pytest.raises(QuadratureError):
            integrate(flat_torus.atlas, {"square": differential(2, 1)}, flat_torus.partition)

    def test_sphere_euler_integral(self, s2_tangent):
        forms = euler_form(curvature(s2_tangent.connection))
        value, order = integrate_detailed(s2_tangent.atlas, forms, s2_tangent.partition)
        assert value == pytest.approx(2.0, rel=1e-6)
        assert order >= 48

    @pytest.mark.parametrize("p", [2, 3, 7])
    def test_teardrop_euler_integral(self, p):
        example = teardrop_example(p)
        forms = euler_form(curvature(example.connection))
        value = integrate(example.atlas, forms, example.partition)
        assert value == pytest.approx(1 + 1 / p, abs=1e-3)


class TestOrbifoldClass:
    """Tests para las clases de orbifold por sectores"""

    def test_teardrop_components(self, teardrop_3):
        cls = orbifold_characteristic_class(
            teardrop_3.bundle, teardrop_3.connection, CharacteristicKind.EULER, teardrop_3.partition
        )
        assert len(cls.components) == 3
        assert cls.component(0).integral == pytest.approx(4 / 3, abs=1e-3)
        for component in cls.components[1:]:
            assert component.form_degree == 0
            assert component.integral == pytest.approx(1 / 3, rel=1e-12)
            assert component.notes
        assert cls.graded
        assert sorted(c.shift for c in cls.components) == [0, Fraction(1, 3), Fraction(2, 3)]

    def test_via_vertical_agrees(self, s2_tangent):
        direct = orbifold_characteristic_class(
            s2_tangent.bundle, s2_tangent.connection, "euler", s2_tangent.partition
        )
        vertical = orbifold_characteristic_class(
            s2_tangent.bundle, s2_tangent.connection, "euler", s2_tangent.partition, via_vertical=True
        )
        assert vertical.origin is not None
        assert vertical.component(0).integral == pytest.approx(direct.component(0).integral, rel=1e-8)

    def test_chern_class_of_tangent_bundle(self, teardrop_3):
        cls = orbifold_characteristic_class(
            teardrop_3.bundle, teardrop_3.connection, CharacteristicKind.CHERN_1, teardrop_3.partition
        )
        assert cls.component(0).integral == pytest.approx(4 / 3, abs=1e-3)

    def test_chern_form_equals_euler_form_in_rank_two(self, s2_tangent, rng):
        curv = curvature(s2_tangent.connection)
        euler, chern = euler_form(curv), chern_1(curv)
        points = s2_tangent.atlas.chart("cap").domain.random_points(rng, 20)
        assert form_residual(euler["cap"] - chern["cap"], points) <= 1e-12

    def test_pontryagin_vanishes_on_surfaces(self, s2_tangent):
        forms = pontryagin_1(curvature(s2_tangent.connection))
        assert all(form.degree == 4 and form.is_empty for form in forms.values())

    def test_missing_sector_connections(self, teardrop_3):
        with pytest.raises(ConnectionDataError):
            orbifold_characteristic_class(teardrop_3.bundle, None)


class TestObstruction:
    """Tests para la conexión escindida y el veredicto de obstrucción"""

    def test_split_connection_is_metric_and_compatible(self, flat_torus):
        connection = split_connection(flat_torus.bundle, flat_torus.section("turning"))
        assert validate_connection(connection).success
        assert set(connection.frames) == {"square"}

    def test_good_bundle_with_constant_section(self, s2_trivial):
        report = obstruction_verdict(s2_trivial.bundle, s2_trivial.section("constant"), s2_trivial.partition)
        assert report.success
        assert report.content["result"] == "PASS"
        assert report.content["integral_max"] <= 1e-8

    def test_turning_section_on_torus(self, flat_torus):
        report = obstruction_verdict(flat_torus.bundle, flat_torus.section("turning"), flat_torus.partition)
        assert report.content["result"] == "PASS"
        assert report.content["node_max"] <= 1e-10

    def test_bad_bundle_passes_through_vertical(self, bad_random):
        report = obstruction_verdict(bad_random.bundle, bad_random.section("fixed"), bad_random.partition)
        assert report.content["result"] == "PASS", report.subjects()
        assert report.metadata["verdict"] == "Bad"
        assert report.content["min_norm"] == pytest.approx(1.0, abs=1e-10)
        norms = list(report.content["sector_min_norms"].values())
        assert norms == [pytest.approx(1.0, abs=1e-10)] * 2

    def test_zero_section_is_rejected(self, s2_z3_bad):
        with pytest.raises(SectionError):
            obstruction_verdict(s2_z3_bad.bundle, s2_z3_bad.section("zero"), s2_z3_bad.partition)
