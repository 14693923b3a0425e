import cmath
import math

import numpy as np
import pytest
from sympy import Matrix
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from app.core.errors import DimensionMismatchError
from app.models.schemas_topology import Character, FinitePresentation, GroupWord, IntegerMatrix
from app.services.homology_engine import (
    abelianize,
    character_group,
    character_inverse,
    character_product,
    characters_equivalent,
    describe_group,
    enumerate_characters,
    evaluate_character,
    first_homology,
    homology_coordinates,
    smith_normal_form,
)


def presentation(n, *relators):
    return FinitePresentation(n_generators=n, relators=[list(r) for r in relators])


TORUS = presentation(2, [(0, 1), (1, 1), (0, -1), (1, -1)])
KLEIN = presentation(2, [(0, 1), (1, 1), (0, 1), (1, -1)])


def test_free_reduction():
    """Words are freely reduced on construction"""
    word = GroupWord(letters=((0, 1), (1, 2), (1, -2), (0, 2)))
    assert word.letters == ((0, 3),)
    assert (word * word.inverse()).is_identity


def test_abelianize_exponent_sums():
    """Relator matrix holds total exponents"""
    matrix = abelianize(KLEIN)
    assert matrix.tolist() == [[2, 0]]


@pytest.mark.parametrize("group, betti, torsion, name", [
    (presentation(1, [(0, 3)]), 0, (3,), "Z/3"),
    (presentation(1), 1, (), "Z^1"),
    (TORUS, 2, (), "Z^2"),
    (KLEIN, 1, (2,), "Z^1 + Z/2"),
    (presentation(2, [(0, 2)], [(1, 3)]), 0, (6,), "Z/6"),
    (presentation(2, [(0, 2)], [(1, 4)]), 0, (2, 4), "Z/2 + Z/4"),
    (presentation(0), 0, (), "0"),
])
def test_first_homology(group, betti, torsion, name):
    """Betti number and invariant factors of standard presentations"""
    h = first_homology(group)
    assert h.betti == betti
    assert h.torsion == torsion
    assert describe_group(h) == name


@pytest.mark.parametrize("rows", [
    [[2, 4, 4], [-6, 6, 12], [10, -4, -16]],
    [[6, 0], [0, 4]],
    [[3, 5, 7], [1, 1, 1], [2, 4, 6]],
    [[4, 6], [6, 9]],
])
def test_smith_normal_form_against_sympy(rows):
    """Invariant factors agree with sympy and U A V = D with unimodular V"""
    a = IntegerMatrix.from_rows(rows)
    snf = smith_normal_form(a)

    assert (snf.U @ a) @ snf.V == snf.D
    assert snf.V @ snf.V_inverse == IntegerMatrix.identity(a.cols)
    for first, second in zip(snf.invariant_factors, snf.invariant_factors[1:]):
        assert second % first == 0

    expected = sympy_snf(Matrix(rows))
    oracle = sorted(abs(int(expected[i, i])) for i in range(min(expected.shape)) if expected[i, i] != 0)
    assert sorted(snf.invariant_factors) == oracle


def test_relators_have_trivial_coordinates():
    """Every relator maps to zero in H_1"""
    for group in (TORUS, KLEIN, presentation(2, [(0, 2)], [(1, 4)])):
        h = first_homology(group)
        for relator in group.relators:
            free, torsion = homology_coordinates(h, relator)
            assert all(x == 0 for x in free)
            assert all(t == 0 for t in torsion)


def test_cyclic_character_values():
    """A non-trivial Z/3 character sends the generator to a primitive cube root of unity"""
    h = first_homology(presentation(1, [(0, 3)]))
    chi = Character(torsion_labels=(1,))
    value = evaluate_character(chi, h, (1,))
    assert abs(value - 1) > 0.5
    assert value ** 3 == pytest.approx(1)
    assert evaluate_character(chi, h, (3,)) == pytest.approx(1)


def test_character_is_homomorphism():
    """chi(x + y) = chi(x) chi(y) on the Klein bottle group"""
    h = first_homology(KLEIN)
    chi = Character(free_angles=(0.7,), torsion_labels=(1,))
    x, y = (1, 2), (-3, 1)
    total = tuple(a + b for a, b in zip(x, y))
    assert evaluate_character(chi, h, total) == pytest.approx(
        evaluate_character(chi, h, x) * evaluate_character(chi, h, y)
    )
    assert abs(evaluate_character(chi, h, x)) == pytest.approx(1)


def test_free_character_on_circle():
    """On Z the character is exp(i * angle * winding)"""
    h = first_homology(presentation(1))
    chi = Character(free_angles=(0.4,))
    assert evaluate_character(chi, h, (3,)) == pytest.approx(cmath.exp(1.2j))


def test_character_group_components():
    """Klein bottle: two bundle classes, one-dimensional moduli"""
    group = character_group(first_homology(KLEIN))
    assert group.n_components == 2
    assert group.identity_component_dim == 1
    assert [chi.torsion_labels for chi in group.component_representatives] == [(0,), (1,)]


def test_simply_connected_has_unique_character():
    group = character_group(first_homology(presentation(0)))
    assert group.n_components == 1
    assert group.identity_component_dim == 0


def test_enumerate_characters_grid():
    """One axis is reused for every free generator, crossed with every torsion label"""
    h = first_homology(KLEIN)
    characters = enumerate_characters(h, [[0.0, 1.0, 2.0]])
    assert len(characters) == 6
    torus = first_homology(TORUS)
    assert len(enumerate_characters(torus, [[0.0, 1.0]])) == 4
    assert enumerate_characters(torus) == []


def test_enumerate_rejects_grid_without_free_part():
    h = first_homology(presentation(1, [(0, 2)]))
    with pytest.raises(DimensionMismatchError):
        enumerate_characters(h, [[0.5]])


def test_angles_wrap_modulo_two_pi():
    """Free angles are stored in [0, 2 pi) and compared on the circle"""
    chi = Character(free_angles=(-0.5,))
    assert chi.free_angles[0] == pytest.approx(2 * math.pi - 0.5)
    assert characters_equivalent(Character(free_angles=(1e-12,)), Character(free_angles=(2 * math.pi - 1e-12,)))
    assert not characters_equivalent(Character(torsion_labels=(0,)), Character(torsion_labels=(1,)))


def test_product_and_inverse():
    """chi * chi^-1 is the trivial character"""
    h = first_homology(KLEIN)
    chi = Character(free_angles=(2.5,), torsion_labels=(1,))
    trivial = character_product(chi, character_inverse(chi, h), h)
    assert characters_equivalent(trivial, Character(free_angles=(0.0,), torsion_labels=(0,)))


def test_character_shape_mismatch():
    h = first_homology(TORUS)
    with pytest.raises(DimensionMismatchError):
        evaluate_character(Character(free_angles=(0.1,)), h, (1, 0))
    with pytest.raises(DimensionMismatchError):
        evaluate_character(Character(free_angles=(0.1, 0.2)), h, (1, 0, 0))


@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_cyclic_groups_have_p_bundle_classes(p):
    """<a | a^p>: p characters, each its own component"""
    h = first_homology(presentation(1, [(0, p)]))
    group = character_group(h)
    assert group.n_components == p
    assert group.identity_component_dim == 0
    values = [evaluate_character(chi, h, (1,)) for chi in group.component_representatives]
    assert len(values) == p
    for i, a in enumerate(values):
        assert a ** p == pytest.approx(1)
        for b in values[i + 1:]:
            assert abs(a - b) > 1e-6


def test_smith_normal_form_on_random_matrices():
    """U and V are unimodular and the invariants match sympy on random 4x4 matrices"""
    rng = np.random.default_rng(11)
    for _ in range(300):
        rows = rng.integers(-5, 6, size=(4, 4)).tolist()
        a = IntegerMatrix.from_rows(rows)
        snf = smith_normal_form(a)

        assert (snf.U @ a) @ snf.V == snf.D
        assert abs(Matrix(snf.U.tolist()).det()) == 1
        assert abs(Matrix(snf.V.tolist()).det()) == 1
        assert all(snf.D.entries[i][j] == 0 for i in range(4) for j in range(4) if i != j)

        expected = sympy_snf(Matrix(rows))
        oracle = sorted(abs(int(expected[i, i])) for i in range(4) if expected[i, i] != 0)
        assert sorted(snf.invariant_factors) == oracle


def test_characters_equivalent_is_symmetric_and_transitive():
    """Small perturbations and whole turns chain into equivalence; far angles do not"""
    h = first_homology(KLEIN)
    tol = 1e-9
    rng = np.random.default_rng(5)
    for _ in range(200):
        label = (int(rng.integers(2)),)
        a = rng.uniform(0, 2 * math.pi)
        chi1 = Character(free_angles=(a,), torsion_labels=label)
        chi2 = Character(free_angles=(a + 2 * math.pi + rng.uniform(-tol, tol) / 4,), torsion_labels=label)
        chi3 = Character(free_angles=(chi2.free_angles[0] - 2 * math.pi + rng.uniform(-tol, tol) / 4,), torsion_labels=label)
        other = Character(free_angles=(rng.uniform(0, 2 * math.pi),), torsion_labels=(1 - label[0],))

        for x, y in ((chi1, chi2), (chi2, chi3), (chi1, chi3), (chi1, other), (chi3, other)):
            assert characters_equivalent(x, y, tol) == characters_equivalent(y, x, tol)
        assert characters_equivalent(chi1, chi2, tol)
        assert characters_equivalent(chi2, chi3, tol)
        assert characters_equivalent(chi1, chi3, tol)
        assert not characters_equivalent(chi1, other, tol)
        check = character_product(chi1, character_inverse(chi3, h), h)
        assert characters_equivalent(check, Character(free_angles=(0.0,), torsion_labels=(0,)), tol)
