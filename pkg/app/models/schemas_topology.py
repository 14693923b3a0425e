"""
Algebraic data of the fundamental group: words, presentations, integer
matrices, Smith decompositions, first homology and U(1) characters.

All models are frozen; operations live in app.services.homology_engine.
"""
import math
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TWO_PI = 2.0 * math.pi

Letter = Tuple[int, int]


def wrap_angle(angle: float) -> float:
    """Reduce an angle into [0, 2*pi)"""
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def reduce_letters(letters: Sequence[Letter]) -> Tuple[Letter, ...]:
    """Freely reduce a syllable list: merge equal neighbours, drop zero powers"""
    stack: List[Letter] = []
    for generator, exponent in letters:
        if exponent == 0:
            continue
        if stack and stack[-1][0] == generator:
            merged = stack.pop()[1] + exponent
            if merged:
                stack.append((generator, merged))
        else:
            stack.append((generator, exponent))
    return tuple(stack)


class GroupWord(BaseModel):
    """Element of a free group, stored as freely reduced syllables (generator, exponent)"""
    model_config = ConfigDict(frozen=True)

    letters: Tuple[Letter, ...] = ()

    @field_validator("letters")
    @classmethod
    def _reduce(cls, letters):
        for generator, _ in letters:
            if generator < 0:
                raise ValueError(f"generator index must be non-negative, got {generator}")
        return reduce_letters(letters)

    @classmethod
    def generator(cls, index: int, exponent: int = 1) -> "GroupWord":
        return cls(letters=((index, exponent),))

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(letters=self.letters + other.letters)

    def inverse(self) -> "GroupWord":
        return GroupWord(letters=tuple((g, -e) for g, e in reversed(self.letters)))

    def __pow__(self, exponent: int) -> "GroupWord":
        if exponent < 0:
            return self.inverse() ** (-exponent)
        return GroupWord(letters=self.letters * exponent)

    def exponent_vector(self, n_generators: int) -> Tuple[int, ...]:
        """Abelianized image: total exponent of each generator"""
        totals = [0] * n_generators
        for generator, exponent in self.letters:
            if generator >= n_generators:
                raise ValueError(f"generator {generator} outside 0..{n_generators - 1}")
            totals[generator] += exponent
        return tuple(totals)

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        return " ".join(f"g{g}" if e == 1 else f"g{g}^{e}" for g, e in self.letters)


class FinitePresentation(BaseModel):
    """<generators | relators>"""
    model_config = ConfigDict(frozen=True)

    n_generators: int = Field(..., ge=0)
    relators: Tuple[GroupWord, ...] = ()

    @field_validator("relators", mode="before")
    @classmethod
    def _wrap_raw_words(cls, relators):
        wrapped = []
        for relator in relators:
            if isinstance(relator, (list, tuple)):
                relator = GroupWord(letters=tuple(tuple(letter) for letter in relator))
            wrapped.append(relator)
        return tuple(wrapped)

    @model_validator(mode="after")
    def _check_generators(self):
        for index, relator in enumerate(self.relators):
            for generator, _ in relator.letters:
                if generator >= self.n_generators:
                    raise ValueError(
                        f"relator {index} references generator {generator}, "
                        f"presentation has {self.n_generators}"
                    )
        return self


class IntegerMatrix(BaseModel):
    """Dense matrix of exact (arbitrary precision) integers"""
    model_config = ConfigDict(frozen=True)

    rows: int = Field(..., ge=0)
    cols: int = Field(..., ge=0)
    entries: Tuple[Tuple[int, ...], ...] = ()

    @model_validator(mode="after")
    def _check_shape(self):
        if len(self.entries) != self.rows:
            raise ValueError(f"expected {self.rows} rows, got {len(self.entries)}")
        for row in self.entries:
            if len(row) != self.cols:
                raise ValueError(f"expected {self.cols} columns, got a row of {len(row)}")
        return self

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: Optional[int] = None) -> "IntegerMatrix":
        entries = tuple(tuple(int(x) for x in row) for row in rows)
        if cols is None:
            cols = len(entries[0]) if entries else 0
        return cls(rows=len(entries), cols=cols, entries=entries)

    @classmethod
    def identity(cls, n: int) -> "IntegerMatrix":
        return cls.from_rows([[int(i == j) for j in range(n)] for i in range(n)], cols=n)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "IntegerMatrix":
        return cls.from_rows([[0] * cols for _ in range(rows)], cols=cols)

    def tolist(self) -> List[List[int]]:
        return [list(row) for row in self.entries]

    def column(self, j: int) -> Tuple[int, ...]:
        return tuple(row[j] for row in self.entries)

    def diagonal(self) -> Tuple[int, ...]:
        return tuple(self.entries[i][i] for i in range(min(self.rows, self.cols)))

    def __matmul__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        columns = [other.column(j) for j in range(other.cols)]
        product = [
            [sum(a * b for a, b in zip(row, col)) for col in columns]
            for row in self.entries
        ]
        return IntegerMatrix.from_rows(product, cols=other.cols)


class SmithDecomposition(BaseModel):
    """U * A * V = D with U, V unimodular; V_inverse is tracked exactly alongside V"""
    model_config = ConfigDict(frozen=True)

    U: IntegerMatrix
    D: IntegerMatrix
    V: IntegerMatrix
    V_inverse: IntegerMatrix

    @property
    def invariant_factors(self) -> Tuple[int, ...]:
        return tuple(d for d in self.D.diagonal() if d != 0)

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)


class FirstHomology(BaseModel):
    """H1 = Z^betti + Z/d_1 + ... + Z/d_k together with the basis change from generators

    A generator exponent row vector x maps to y = x * basis_map. The first
    `unit_factors` coordinates are trivial, the next len(torsion) are read
    modulo the torsion invariants, the last `betti` are free.
    """
    model_config = ConfigDict(frozen=True)

    n_generators: int = Field(..., ge=0)
    betti: int = Field(..., ge=0)
    torsion: Tuple[int, ...] = ()
    unit_factors: int = Field(0, ge=0)
    basis_map: IntegerMatrix
    basis_inverse: IntegerMatrix

    @model_validator(mode="after")
    def _check_invariants(self):
        for d in self.torsion:
            if d < 2:
                raise ValueError(f"torsion invariants must be >= 2, got {d}")
        for a, b in zip(self.torsion, self.torsion[1:]):
            if b % a:
                raise ValueError(f"torsion invariants must form a divisibility chain, {a} does not divide {b}")
        if self.unit_factors + len(self.torsion) + self.betti != self.n_generators:
            raise ValueError("unit factors, torsion and betti must account for every generator")
        return self

    @property
    def torsion_columns(self) -> range:
        return range(self.unit_factors, self.unit_factors + len(self.torsion))

    @property
    def free_columns(self) -> range:
        start = self.unit_factors + len(self.torsion)
        return range(start, start + self.betti)


class Character(BaseModel):
    """Homomorphism pi_1 -> U(1): free flux angles (flux/hbar mod 2*pi) and torsion labels"""
    model_config = ConfigDict(frozen=True)

    free_angles: Tuple[float, ...] = ()
    torsion_labels: Tuple[int, ...] = ()

    @field_validator("free_angles")
    @classmethod
    def _wrap(cls, angles):
        return tuple(wrap_angle(float(a)) for a in angles)

    @field_validator("torsion_labels")
    @classmethod
    def _non_negative(cls, labels):
        for label in labels:
            if label < 0:
                raise ValueError(f"torsion labels must be non-negative, got {label}")
        return labels


class CharacterGroupSummary(BaseModel):
    """Component structure of Hom(H1, U(1)) = (S^1)^betti x Tors H1"""
    model_config = ConfigDict(frozen=True)

    n_components: int = Field(..., ge=1)
    identity_component_dim: int = Field(..., ge=0)
    component_representatives: Tuple[Character, ...]
