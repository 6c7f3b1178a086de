import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from src.orbibundle.core.atlas import Atlas, Chart, Composition, Injection, validate_atlas
from src.orbibundle.core.bundles import (
    BundleCocycle,
    Verdict,
    classify,
    fiber_kernel_report,
    lift_section,
    make_section,
    pullback_matches_vertical,
    reduce_bundle,
    require_nonvanishing,
    restrict_section,
    restrict_to_zero_section,
    total_space,
    validate_bundle,
    validate_section,
    vertical_bundle,
)
from src.orbibundle.core.domains import Ball
from src.orbibundle.core.expr import var
from src.orbibundle.core.forms import constant_matrix
from src.orbibundle.core.groups import (
    cyclic_group,
    rotation_representation,
    trivial_group,
    trivial_representation,
)
from src.orbibundle.core.report import CheckKind
from src.orbibundle.errors import BundleError, SectionError
from src.orbibundle.gallery import random_gallery
from src.orbibundle.gallery.randomized import nested_balls_bundle


def _line_chain(first, second, composite) -> BundleCocycle:
    """Tres intervalos encajados con transiciones de rango 1 y una composición declarada"""
    group = trivial_group()
    charts = tuple(
        Chart(cid, Ball(1, Fraction(r)), group, trivial_representation(group, 1))
        for cid, r in (("a", 1), ("b", 2), ("c", 3))
    )
    injections = (
        Injection.affine("a>b", "a", "b", ((1,),), (0,), [0]),
        Injection.affine("b>c", "b", "c", ((1,),), (0,), [0]),
        Injection.affine("a>c", "a", "c", ((1,),), (0,), [0]),
    )
    atlas = Atlas("linea", charts, injections, (Composition("a>b", "b>c", "a>c"),))
    fiber = trivial_representation(group, 1)
    return BundleCocycle(
        "L",
        atlas,
        1,
        {"a": fiber, "b": fiber, "c": fiber},
        {"a>b": first, "b>c": second, "a>c": composite},
    )


def _good_unreduced() -> BundleCocycle:
    """Z/2 actúa trivialmente en la base y en la fibra: K_f = K_b = Z/2"""
    z2 = cyclic_group(2)
    return nested_balls_bundle("bueno", trivial_representation(z2, 2), trivial_representation(z2, 1), np.eye(1))


class TestValidateBundle:
    """Tests para la validación de cociclos"""

    def test_gallery_bundles_are_valid(self, s2_z3_bad, s2_tangent, s2_trivial, flat_torus, teardrop_3, bad_random):
        for example in (s2_z3_bad, s2_tangent, s2_trivial, flat_torus, teardrop_3, bad_random):
            report = validate_bundle(example.bundle)
            assert report.success, (example.name, report.subjects())

    def test_random_gallery_is_valid(self):
        for example in random_gallery():
            assert validate_bundle(example.bundle).success, example.name

    def test_cocycle_law(self):
        ok = _line_chain(constant_matrix([[2]]), constant_matrix([[3]]), constant_matrix([[6]]))
        assert validate_bundle(ok).success
        bad = _line_chain(constant_matrix([[2]]), constant_matrix([[3]]), constant_matrix([[5]]))
        report = validate_bundle(bad)
        assert [v.kind for v in report.violations] == [CheckKind.COCYCLE]

    def test_singular_transition(self):
        bundle = _line_chain(((var(1),),), constant_matrix([[1]]), ((var(1),),))
        report = validate_bundle(bundle)
        assert any(v.kind == CheckKind.INVERTIBILITY and v.subject == "a>b" for v in report.violations)

    def test_non_equivariant_transition(self):
        z3 = cyclic_group(3)
        bundle = nested_balls_bundle(
            "rotado", trivial_representation(z3, 2), rotation_representation(z3), np.eye(2)
        )
        reflected = dataclasses.replace(bundle, transitions={"small>large": constant_matrix([[1, 0], [0, -1]])})
        report = validate_bundle(reflected)
        assert any(v.kind == CheckKind.EQUIVARIANCE for v in report.violations)

    def test_missing_fiber_action(self, s2_trivial):
        bundle = dataclasses.replace(s2_trivial.bundle, fiber_actions={})
        report = validate_bundle(bundle, include_base=False)
        assert all(v.kind == CheckKind.REFERENCE for v in report.violations)
        assert not report.success


class TestClassify:
    """Tests para el veredicto bueno/malo"""

    def test_trivial_z3_with_rotated_fiber_is_bad(self, s2_z3_bad):
        verdict = classify(s2_z3_bad.bundle)
        assert verdict.verdict == Verdict.BAD
        summary = verdict.to_dict()
        assert summary["K_b_order"] == 3
        assert summary["K_f_order"] == 1

    def test_teardrop_tangent_is_good(self, teardrop_3):
        assert classify(teardrop_3.bundle).is_good

    def test_reduced_base_is_good(self, s2_trivial):
        assert classify(s2_trivial.bundle).is_good

    def test_bad_random(self, bad_random):
        assert classify(bad_random.bundle).verdict == Verdict.BAD

    def test_random_gallery_verdicts_are_consistent(self):
        for example in random_gallery():
            verdict = classify(example.bundle)
            bad = any(
                verdict.fiber_kernels[cid].elements < verdict.base_kernels[cid].elements
                for cid in verdict.base_kernels
            )
            assert (verdict.verdict == Verdict.BAD) == bad

    def test_good_with_nontrivial_kernel(self):
        verdict = classify(_good_unreduced())
        assert verdict.is_good
        assert verdict.to_dict()["K_f_order"] == 2


class TestTotalSpace:
    """Tests para el espacio total y el fibrado vertical"""

    def test_total_space_of_bad_example(self, s2_z3_bad):
        total = total_space(s2_z3_bad.bundle)
        assert {chart.dim for chart in total.charts} == {4}
        action = total.chart("north").action
        for g in action.group.elements:
            assert np.allclose(action.matrix(g)[:2, :2], np.eye(2))
        assert validate_atlas(total).success

    def test_total_space_of_teardrop_is_valid(self, teardrop_3):
        assert validate_atlas(total_space(teardrop_3.bundle)).success

    def test_rank_zero_total_space_is_the_base(self, s2_trivial):
        base = s2_trivial.atlas
        group = trivial_group()
        bundle = BundleCocycle(
            "cero",
            base,
            0,
            {cid: trivial_representation(group, 0) for cid in base.chart_ids},
            {arrow.id: () for arrow in base.arrows()},
        )
        total = total_space(bundle)
        assert [c.domain for c in total.charts] == [c.domain for c in base.charts]
        assert validate_bundle(bundle).success

    def test_vertical_bundle_restricts_to_original(self, s2_z3_bad, teardrop_3):
        for example in (s2_z3_bad, teardrop_3):
            vertical = vertical_bundle(example.bundle)
            assert vertical.rank == example.bundle.rank
            assert vertical.source is example.bundle
            restriction = restrict_to_zero_section(vertical)
            assert restriction.certificate == 0.0
            assert validate_bundle(vertical).success

    def test_vertical_of_bad_bundle_is_good(self, s2_z3_bad):
        """La acción sobre el espacio total es efectiva: VE es bueno aunque E sea malo"""
        assert classify(vertical_bundle(s2_z3_bad.bundle)).is_good

    def test_pullback_along_projection_is_vertical(self, s2_z3_bad, teardrop_3):
        assert pullback_matches_vertical(s2_z3_bad.bundle)
        assert pullback_matches_vertical(teardrop_3.bundle)

    def test_zero_section_restriction_needs_vertical(self, s2_trivial):
        with pytest.raises(BundleError):
            restrict_to_zero_section(s2_trivial.bundle)

    def test_fiber_kernel_acts_trivially_on_vertical(self):
        report = fiber_kernel_report(_good_unreduced())
        assert report.success
        assert report.content["charts"]["small"]["nontrivial"]


class TestReduceBundle:
    """Tests para el fibrado reducido"""

    def test_good_bundle_descends(self):
        reduced = reduce_bundle(_good_unreduced())
        assert all(chart.group.order == 1 for chart in reduced.base.charts)
        assert validate_bundle(reduced).success

    def test_bad_bundle_does_not_descend(self, bad_random):
        with pytest.raises(BundleError):
            reduce_bundle(bad_random.bundle)


class TestSections:
    """Tests para secciones, levantamiento y restricción"""

    def test_fixed_section_of_bad_bundle(self, bad_random):
        report = validate_section(bad_random.bundle, bad_random.section("fixed"))
        assert report.success
        assert report.content["nonvanishing"]

    def test_zero_section_vanishes(self, s2_z3_bad):
        section = s2_z3_bad.section("zero")
        report = validate_section(s2_z3_bad.bundle, section)
        assert report.success
        assert not report.content["nonvanishing"]
        with pytest.raises(SectionError):
            require_nonvanishing(s2_z3_bad.bundle, section)

    def test_constant_section_is_not_equivariant_under_rotation(self, s2_z3_bad):
        section = make_section("constante", s2_z3_bad.bundle, {"north": ("1", "0"), "south": ("1", "0")})
        report = validate_section(s2_z3_bad.bundle, section)
        assert any(v.kind == CheckKind.EQUIVARIANCE for v in report.violations)

    def test_missing_chart_component(self, s2_trivial):
        section = make_section("media", s2_trivial.bundle, {"north": ("1", "0")})
        report = validate_section(s2_trivial.bundle, section)
        assert report.subjects() == ["south"]

    def test_turning_section_on_torus(self, flat_torus):
        report = require_nonvanishing(flat_torus.bundle, flat_torus.section("turning"))
        assert report.content["min_norm"] == pytest.approx(1.0, abs=1e-12)

    def test_lift_then_restrict(self, s2_trivial):
        section = s2_trivial.section("constant")
        vertical = vertical_bundle(s2_trivial.bundle)
        lifted = lift_section(s2_trivial.bundle, section, vertical)
        assert validate_section(vertical, lifted).success
        back = restrict_section(vertical, lifted)
        assert back.name == "constant"
        assert back.to_dict() == section.to_dict()

    def test_lift_then_restrict_keeps_unfolded_constants(self, flat_torus):
        """2*pi*x1 vuelve tal como se escribió, sin plegar 2*pi"""
        section = flat_torus.section("turning")
        vertical = vertical_bundle(flat_torus.bundle)
        back = restrict_section(vertical, lift_section(flat_torus.bundle, section, vertical))
        assert back.components == section.components
        assert back.to_dict() == section.to_dict()
        assert "2 * 3.141592653589793 * x1" in back.to_dict()["square"][0]

    def test_restrict_substitutes_fiber_variables(self, s2_trivial):
        vertical = vertical_bundle(s2_trivial.bundle)
        components = {cid: ("1 + x3", "x1 * x4") for cid in ("north", "south")}
        back = restrict_section(vertical, make_section("v", vertical, components))
        assert back.name == "v|0"
        assert back.to_dict() == {"north": ["1", "0"], "south": ["1", "0"]}

    def test_restrict_needs_vertical_section(self, s2_trivial):
        with pytest.raises(SectionError):
            restrict_section(s2_trivial.bundle, s2_trivial.section("constant"))
