import json
from fractions import Fraction

import numpy as np
import pytest

from src.orbibundle.core.bundles import classify, validate_bundle
from src.orbibundle.core.forms import evaluate_matrix
from src.orbibundle.errors import DocumentError
from src.orbibundle.gallery import ExampleKind, example_registry, gallery_examples
from src.orbibundle.io.document import (
    build_document,
    dump_example,
    load_document,
    number_out,
    parse_document,
)


class TestExampleRegistry:
    """Tests para el registro de ejemplos"""

    def test_named_examples(self):
        for name in ("s2-z3-bad", "s2-tangent", "s2-trivial", "flat-torus", "bad-random"):
            assert example_registry.get_example(name).name == name

    def test_alias(self):
        assert example_registry.get_example("s2-tangentless").name == "s2-trivial"

    def test_teardrop_family(self):
        example = example_registry.get_example("teardrop-5")
        assert example.name == "teardrop-5"
        assert example.atlas.chart("cap").group.order == 5

    def test_random_family_starts_at_zero(self):
        example = example_registry.get_example("random-0")
        assert example.kind is ExampleKind.RANDOMIZED

    def test_family_parameter_below_minimum(self):
        with pytest.raises(DocumentError):
            example_registry.get_example("teardrop-0")

    def test_unknown_example(self):
        with pytest.raises(DocumentError) as info:
            example_registry.get_example("klein-bottle")
        assert info.value.location == "example"

    def test_listing_includes_families_and_aliases(self):
        listing = example_registry.list_all_examples()
        assert "teardrop-<n>" in listing
        assert listing["s2-tangentless"] == "alias de s2-trivial"

    def test_example_info(self, s2_z3_bad):
        info = s2_z3_bad.get_example_info()
        assert info["charts"] == ["north", "south"]
        assert info["sections"] == ["zero"]

    def test_unknown_section(self, s2_z3_bad):
        with pytest.raises(DocumentError):
            s2_z3_bad.section("ghost")


class TestDocumentRoundTrip:
    """Tests para volcar y volver a cargar documentos"""

    def test_gallery_documents_reload(self, example_file):
        for example in gallery_examples():
            loaded = load_document(example_file(example, f"{example.name}.json"))
            assert loaded.atlas.chart_ids == example.atlas.chart_ids
            assert loaded.bundle.rank == example.bundle.rank
            assert validate_bundle(loaded.bundle).success, example.name
            assert classify(loaded.bundle).verdict == classify(example.bundle).verdict

    def test_transitions_survive(self, example_file, teardrop_3):
        loaded = load_document(example_file(teardrop_3))
        arrow = teardrop_3.atlas.overlaps[0]
        points = arrow.sample_points()
        original = evaluate_matrix(teardrop_3.bundle.transitions[arrow.id], points)
        reloaded = evaluate_matrix(loaded.bundle.transitions[arrow.id], points)
        assert np.max(np.abs(original - reloaded)) <= 1e-12

    def test_sections_and_partition_survive(self, example_file, flat_torus):
        loaded = load_document(example_file(flat_torus))
        assert [s.name for s in loaded.sections] == ["constant", "turning"]
        assert loaded.partition is not None
        assert loaded.connection.name == "flat"

    def test_dump_is_json(self, bad_random):
        data = json.loads(json.dumps(dump_example(bad_random)))
        assert parse_document(data).name == "bad-random"

    def test_number_out(self):
        assert number_out(2.0) == 2
        assert number_out(Fraction(1, 3)) == "1/3"
        assert number_out(Fraction(4, 2)) == 2


class TestDocumentErrors:
    """Tests para los errores de documento con ubicación"""

    def test_missing_file(self, tmp_path):
        with pytest.raises(DocumentError):
            load_document(tmp_path / "nada.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "mal.json"
        path.write_text("{\n  \"groups\": [,\n}", encoding="utf-8")
        with pytest.raises(DocumentError) as info:
            load_document(path)
        assert info.value.location.startswith("mal.json:2:")

    def test_unparsable_transition(self, broken_document):
        with pytest.raises(DocumentError) as info:
            load_document(broken_document)
        assert info.value.location == "bundle.transitions.north>south"

    def test_schema_violation(self, s2_trivial):
        data = dump_example(s2_trivial)
        data["bundle"]["rank"] = -1
        with pytest.raises(DocumentError) as info:
            parse_document(data)
        assert info.value.location == "bundle.rank"

    def test_unknown_field(self, s2_trivial):
        data = dump_example(s2_trivial)
        data["charts"][0]["colour"] = "red"
        with pytest.raises(DocumentError) as info:
            parse_document(data)
        assert info.value.location == "charts.0.colour"

    def test_unknown_group(self, tmp_path, s2_trivial):
        data = dump_example(s2_trivial)
        data["charts"][1]["group"] = "Z7"
        path = tmp_path / "grupo.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(DocumentError) as info:
            load_document(path)
        assert info.value.location == "charts.1"

    def test_missing_fiber_action(self, tmp_path, s2_trivial):
        data = dump_example(s2_trivial)
        del data["bundle"]["fiber_actions"]["south"]
        path = tmp_path / "fibra.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(DocumentError) as info:
            load_document(path)
        assert info.value.location == "bundle.fiber_actions.south"

    def test_section_without_bundle(self, s2_trivial):
        data = dump_example(s2_trivial)
        del data["bundle"]
        data.pop("connection", None)
        with pytest.raises(DocumentError) as info:
            build_document(parse_document(data))
        assert info.value.location == "bundle"
