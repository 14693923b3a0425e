"""
Exact integer linear algebra behind the classification of prequantizations.

A finite presentation of pi_1 is abelianized into its relator matrix, the
Smith normal form of that matrix splits H_1 into a free part (betti
number b_1) and a torsion part (d_1 | d_2 | ...), and the characters
Hom(H_1, U(1)) are parametrized accordingly: b_1 flux angles in [0, 2*pi)
plus one label 0 <= k_i < d_i per torsion invariant.
"""
import cmath
import itertools
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from app.core.config import get_settings
from app.core.errors import DimensionMismatchError
from app.core.logger import log
from app.models.schemas_topology import (
    TWO_PI,
    Character,
    CharacterGroupSummary,
    FinitePresentation,
    FirstHomology,
    GroupWord,
    IntegerMatrix,
    SmithDecomposition,
)

settings = get_settings()

WordOrVector = Union[GroupWord, Sequence[int]]


def abelianize(p: FinitePresentation) -> IntegerMatrix:
    """Relator exponent-sum matrix: row r, column g = total exponent of g in relator r"""
    rows = [relator.exponent_vector(p.n_generators) for relator in p.relators]
    return IntegerMatrix.from_rows(rows, cols=p.n_generators)


class _SmithReducer:
    """Row/column reduction with the transforms tracked alongside.

    Pivots are chosen by minimal non-zero absolute value, ties broken by
    lowest row then lowest column, so a given input always produces the
    same decomposition.
    """

    def __init__(self, a: IntegerMatrix):
        self.m, self.n = a.rows, a.cols
        self.A = a.tolist()
        self.U = IntegerMatrix.identity(self.m).tolist()
        self.V = IntegerMatrix.identity(self.n).tolist()
        self.V_inv = IntegerMatrix.identity(self.n).tolist()

    def swap_rows(self, i: int, j: int):
        if i != j:
            self.A[i], self.A[j] = self.A[j], self.A[i]
            self.U[i], self.U[j] = self.U[j], self.U[i]

    def swap_cols(self, i: int, j: int):
        if i == j:
            return
        for matrix in (self.A, self.V):
            for row in matrix:
                row[i], row[j] = row[j], row[i]
        self.V_inv[i], self.V_inv[j] = self.V_inv[j], self.V_inv[i]

    def add_row(self, target: int, source: int, q: int):
        """row_target += q * row_source"""
        for matrix in (self.A, self.U):
            matrix[target] = [x + q * y for x, y in zip(matrix[target], matrix[source])]

    def add_col(self, target: int, source: int, q: int):
        """col_target += q * col_source; V_inv picks up the inverse row operation"""
        for matrix in (self.A, self.V):
            for row in matrix:
                row[target] += q * row[source]
        self.V_inv[source] = [x - q * y for x, y in zip(self.V_inv[source], self.V_inv[target])]

    def negate_row(self, i: int):
        self.A[i] = [-x for x in self.A[i]]
        self.U[i] = [-x for x in self.U[i]]

    def min_pivot(self, t: int) -> Optional[Tuple[int, int]]:
        best, best_abs = None, None
        for i in range(t, self.m):
            for j in range(t, self.n):
                value = abs(self.A[i][j])
                if value and (best_abs is None or value < best_abs):
                    best, best_abs = (i, j), value
        return best

    def clear_cross(self, t: int) -> bool:
        """Reduce column t and row t against the pivot; True when both are clear"""
        A = self.A
        clean = True
        for i in range(t + 1, self.m):
            if A[i][t]:
                self.add_row(i, t, -(A[i][t] // A[t][t]))
                clean = clean and A[i][t] == 0
        for j in range(t + 1, self.n):
            if A[t][j]:
                self.add_col(j, t, -(A[t][j] // A[t][t]))
                clean = clean and A[t][j] == 0
        return clean

    def promote_remainder(self, t: int):
        """Move the smallest remainder left in row/column t onto the diagonal"""
        A = self.A
        candidates = [(abs(A[i][t]), 0, i) for i in range(t + 1, self.m) if A[i][t]]
        candidates += [(abs(A[t][j]), 1, j) for j in range(t + 1, self.n) if A[t][j]]
        _, axis, index = min(candidates)
        if axis == 0:
            self.swap_rows(t, index)
        else:
            self.swap_cols(t, index)

    def first_non_multiple(self, t: int) -> Optional[int]:
        pivot = self.A[t][t]
        for i in range(t + 1, self.m):
            for j in range(t + 1, self.n):
                if self.A[i][j] % pivot:
                    return i
        return None

    def run(self) -> SmithDecomposition:
        t = 0
        while t < min(self.m, self.n):
            pivot = self.min_pivot(t)
            if pivot is None:
                break
            self.swap_rows(t, pivot[0])
            self.swap_cols(t, pivot[1])
            while True:
                if not self.clear_cross(t):
                    self.promote_remainder(t)
                    continue
                offender = self.first_non_multiple(t)
                if offender is None:
                    break
                self.add_row(t, offender, 1)
            if self.A[t][t] < 0:
                self.negate_row(t)
            t += 1

        return SmithDecomposition(
            U=IntegerMatrix.from_rows(self.U, cols=self.m),
            D=IntegerMatrix.from_rows(self.A, cols=self.n),
            V=IntegerMatrix.from_rows(self.V, cols=self.n),
            V_inverse=IntegerMatrix.from_rows(self.V_inv, cols=self.n),
        )


def smith_normal_form(a: IntegerMatrix) -> SmithDecomposition:
    """
    Smith normal form U * a * V = D over the integers

    D is diagonal with d_1 | d_2 | ... | d_r > 0 followed by zeros; U and V
    are unimodular. Arithmetic uses Python integers throughout, so entries
    never overflow.
    """
    decomposition = _SmithReducer(a).run()
    log.debug(f"Smith normal form of {a.rows}x{a.cols} matrix: invariants {decomposition.invariant_factors}")
    return decomposition


def first_homology(p: FinitePresentation) -> FirstHomology:
    """H_1 = pi_1 / [pi_1, pi_1] as Z^b1 + Tors, with the generator basis change"""
    snf = smith_normal_form(abelianize(p))
    factors = snf.invariant_factors
    unit_factors = sum(1 for d in factors if d == 1)
    torsion = tuple(d for d in factors if d >= 2)
    betti = p.n_generators - len(factors)
    log.info(f"First homology: betti={betti}, torsion={list(torsion)}")
    return FirstHomology(
        n_generators=p.n_generators,
        betti=betti,
        torsion=torsion,
        unit_factors=unit_factors,
        basis_map=snf.V,
        basis_inverse=snf.V_inverse,
    )


def describe_group(h: FirstHomology) -> str:
    """Human-readable invariant-factor form, e.g. 'Z^2 + Z/2'"""
    parts = []
    if h.betti:
        parts.append(f"Z^{h.betti}")
    parts.extend(f"Z/{d}" for d in h.torsion)
    return " + ".join(parts) if parts else "0"


def _exponent_vector(h: FirstHomology, g: WordOrVector) -> Tuple[int, ...]:
    if isinstance(g, GroupWord):
        try:
            return g.exponent_vector(h.n_generators)
        except ValueError as e:
            raise DimensionMismatchError(str(e)) from e
    vector = tuple(int(x) for x in g)
    if len(vector) != h.n_generators:
        raise DimensionMismatchError(
            f"homology vector has {len(vector)} coordinates, group has {h.n_generators} generators"
        )
    return vector


def homology_coordinates(h: FirstHomology, g: WordOrVector) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """(free coordinates, torsion residues) of a word or generator exponent vector"""
    x = _exponent_vector(h, g)
    basis = h.basis_map.entries
    y = [sum(x[i] * basis[i][j] for i in range(h.n_generators)) for j in range(h.n_generators)]
    free = tuple(y[j] for j in h.free_columns)
    torsion = tuple(y[j] % d for j, d in zip(h.torsion_columns, h.torsion))
    return free, torsion


def check_character(chi: Character, h: FirstHomology):
    """Raise DimensionMismatchError unless chi lives on h"""
    if len(chi.free_angles) != h.betti:
        raise DimensionMismatchError(
            f"character has {len(chi.free_angles)} free angles, homology has betti number {h.betti}"
        )
    if len(chi.torsion_labels) != len(h.torsion):
        raise DimensionMismatchError(
            f"character has {len(chi.torsion_labels)} torsion labels, homology has {len(h.torsion)} torsion invariants"
        )
    for k, d in zip(chi.torsion_labels, h.torsion):
        if k >= d:
            raise DimensionMismatchError(f"torsion label {k} out of range for Z/{d}")


def evaluate_character(chi: Character, h: FirstHomology, g: WordOrVector) -> complex:
    """chi(g) = exp(i sum_j a_j m_j) * exp(2 pi i sum_i k_i t_i / d_i)"""
    check_character(chi, h)
    free, torsion = homology_coordinates(h, g)
    phase = math.fsum(a * m for a, m in zip(chi.free_angles, free))
    fraction = sum((Fraction(k * t, d) for k, t, d in zip(chi.torsion_labels, torsion, h.torsion)), Fraction(0))
    fraction -= math.floor(fraction)
    return cmath.exp(1j * phase) * cmath.exp(1j * TWO_PI * float(fraction))


def character_group(h: FirstHomology) -> CharacterGroupSummary:
    """Components of the character group and one flux-free representative per component"""
    labels = itertools.product(*(range(d) for d in h.torsion))
    representatives = tuple(
        Character(free_angles=(0.0,) * h.betti, torsion_labels=label) for label in labels
    )
    return CharacterGroupSummary(
        n_components=math.prod(h.torsion),
        identity_component_dim=h.betti,
        component_representatives=representatives,
    )


def character_component(chi: Character) -> Tuple[int, ...]:
    """Component label; equal labels <=> topologically equivalent bundles"""
    return tuple(chi.torsion_labels)


def angle_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle"""
    d = math.fmod(abs(a - b), TWO_PI)
    return min(d, TWO_PI - d)


def characters_equivalent(chi1: Character, chi2: Character, tol: Optional[float] = None) -> bool:
    """Same torsion labels and free angles congruent mod 2*pi within tol"""
    tol = settings.ANGLE_TOL if tol is None else tol
    if len(chi1.free_angles) != len(chi2.free_angles):
        return False
    if tuple(chi1.torsion_labels) != tuple(chi2.torsion_labels):
        return False
    return all(angle_distance(a, b) <= tol for a, b in zip(chi1.free_angles, chi2.free_angles))


def enumerate_characters(
    h: FirstHomology,
    free_angle_grid: Sequence[Sequence[float]] = ()
) -> List[Character]:
    """
    Tabulate characters on a grid of free angles times every torsion label

    `free_angle_grid` gives one axis per free generator; a single axis is
    reused for every free generator. With betti > 0 an empty grid gives an
    empty list.
    """
    grid = [list(axis) for axis in free_angle_grid]
    if h.betti == 0:
        if any(grid):
            raise DimensionMismatchError("free-angle grid supplied for a group without free part")
        axes: List[List[float]] = []
    elif not grid:
        return []
    elif len(grid) == 1:
        axes = grid * h.betti
    elif len(grid) == h.betti:
        axes = grid
    else:
        raise DimensionMismatchError(f"grid has {len(grid)} axes, expected 1 or {h.betti}")

    labels = list(itertools.product(*(range(d) for d in h.torsion)))
    return [
        Character(free_angles=angles, torsion_labels=label)
        for angles in itertools.product(*axes)
        for label in labels
    ]


def character_product(chi1: Character, chi2: Character, h: FirstHomology) -> Character:
    """Pointwise product of two characters"""
    check_character(chi1, h)
    check_character(chi2, h)
    return Character(
        free_angles=tuple(a + b for a, b in zip(chi1.free_angles, chi2.free_angles)),
        torsion_labels=tuple((k + l) % d for k, l, d in zip(chi1.torsion_labels, chi2.torsion_labels, h.torsion)),
    )


def character_inverse(chi: Character, h: FirstHomology) -> Character:
    """Complex conjugate character"""
    check_character(chi, h)
    return Character(
        free_angles=tuple(-a for a in chi.free_angles),
        torsion_labels=tuple((-k) % d for k, d in zip(chi.torsion_labels, h.torsion)),
    )
