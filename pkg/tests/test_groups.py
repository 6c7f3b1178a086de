import numpy as np
import pytest

from src.orbibundle.core.groups import (
    FiniteGroup,
    Representation,
    Subgroup,
    action_kernel,
    centralizer,
    class_index,
    conjugacy_classes,
    cyclic_group,
    direct_product,
    direct_sum,
    fixed_subspace,
    is_homomorphism,
    is_injective,
    quotient_group,
    restrict_representation,
    rotation_representation,
    symmetric_group,
    trivial_group,
    trivial_representation,
)
from src.orbibundle.errors import GroupError, RepresentationError


class TestFiniteGroup:
    """Tests para grupos dados por tabla"""

    def test_cyclic_group(self):
        z5 = cyclic_group(5)
        assert z5.order == 5
        assert z5.is_abelian()
        assert z5.inverse(2) == 3
        assert z5.element_order(2) == 5
        assert z5.power(2, -1) == 3

    def test_symmetric_group_is_not_abelian(self):
        s3 = symmetric_group(3)
        assert s3.order == 6
        assert not s3.is_abelian()
        assert s3.validate().success

    def test_direct_product(self):
        klein = direct_product(cyclic_group(2), cyclic_group(2))
        assert klein.order == 4
        assert all(klein.element_order(g) <= 2 for g in klein.elements)

    def test_from_table_accepts_group(self):
        group = FiniteGroup.from_table("Z3", [[0, 1, 2], [1, 2, 0], [2, 0, 1]])
        assert group.identity == 0

    def test_from_table_rejects_non_associative(self):
        rows = [[0, 1, 2], [1, 0, 0], [2, 2, 0]]
        with pytest.raises(GroupError):
            FiniteGroup.from_table("roto", rows)

    def test_from_table_rejects_missing_identity(self):
        with pytest.raises(GroupError):
            FiniteGroup.from_table("roto", [[1, 0], [0, 0]])

    def test_zero_order_cyclic_group(self):
        with pytest.raises(GroupError):
            cyclic_group(0)


class TestSubgroups:
    """Tests para subgrupos, clases de conjugación y cocientes"""

    def test_conjugacy_classes_of_s3(self):
        s3 = symmetric_group(3)
        classes = conjugacy_classes(s3)
        assert sorted(len(c) for c in classes) == [1, 2, 3]
        assert class_index(s3, s3.identity) == 0

    def test_centralizer_of_transposition(self):
        s3 = symmetric_group(3)
        transposition = next(g for g in s3.elements if s3.element_order(g) == 2)
        assert centralizer(s3, transposition).order == 2

    def test_quotient_by_alternating_group(self):
        s3 = symmetric_group(3)
        a3 = Subgroup(s3, frozenset(g for g in s3.elements if s3.element_order(g) in (1, 3)))
        assert a3.is_closed() and a3.is_normal()
        quotient, projection = quotient_group(s3, a3)
        assert quotient.order == 2
        assert is_homomorphism(s3, quotient, projection)

    def test_quotient_needs_normal_subgroup(self):
        s3 = symmetric_group(3)
        transposition = next(g for g in s3.elements if s3.element_order(g) == 2)
        with pytest.raises(GroupError):
            quotient_group(s3, Subgroup(s3, frozenset({s3.identity, transposition})))

    def test_as_group_reindexes(self):
        z6 = cyclic_group(6)
        group, position = Subgroup(z6, frozenset({0, 2, 4})).as_group()
        assert group.order == 3
        assert group.mul(position[2], position[4]) == position[0]

    def test_injectivity(self):
        assert is_injective([0, 2, 1])
        assert not is_injective([0, 0])
        assert is_homomorphism(cyclic_group(2), cyclic_group(4), [0, 2])
        assert not is_homomorphism(cyclic_group(2), cyclic_group(4), [0, 1])


class TestRepresentation:
    """Tests para representaciones ortogonales"""

    def test_rotation_representation_is_valid(self):
        rep = rotation_representation(cyclic_group(5), 2)
        assert rep.validate().success
        assert rep.complex_dim == 1

    def test_invalid_matrices_are_reported(self):
        z2 = cyclic_group(2)
        bad = Representation(z2, 2, (np.eye(2), 2 * np.eye(2)))
        assert not bad.validate().success

    def test_wrong_number_of_matrices(self):
        with pytest.raises(RepresentationError):
            Representation(cyclic_group(3), 1, (np.eye(1),))

    def test_fixed_subspace_of_direct_sum_is_aligned(self):
        z3 = cyclic_group(3)
        rep = direct_sum(trivial_representation(z3, 1), rotation_representation(z3))
        basis = fixed_subspace(rep, 1)
        assert basis.shape == (3, 1)
        assert np.allclose(basis[:, 0], [1.0, 0.0, 0.0])

    def test_rotation_by_half_turn_fixes_nothing(self):
        rep = rotation_representation(cyclic_group(2))
        assert fixed_subspace(rep, 1).shape == (2, 0)
        assert fixed_subspace(rep, 0).shape == (2, 2)

    def test_action_kernel(self):
        z4 = cyclic_group(4)
        assert action_kernel(rotation_representation(z4, 2)).elements == frozenset({0, 2})
        assert action_kernel(trivial_representation(z4, 2)).order == 4
        assert action_kernel(trivial_representation(trivial_group(), 0)).is_trivial

    def test_restriction_to_centralizer(self):
        z4 = cyclic_group(4)
        rep = direct_sum(trivial_representation(z4, 1), rotation_representation(z4))
        basis = fixed_subspace(rep, 2)
        restricted, position = restrict_representation(rep, centralizer(z4, 2), basis)
        assert restricted.dim == 1
        assert restricted.validate().success
        assert len(position) == 4
