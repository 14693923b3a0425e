"""
Discrete prequantum geometry: cochains, chart atlases and check reports.
"""
import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import OverlapError
from app.models.schemas_complex import EdgePath
from app.models.schemas_topology import Character, FirstHomology


class DiscreteOneForm(BaseModel):
    """Edge cochain in action units (same units as hbar)"""
    model_config = ConfigDict(frozen=True)

    values: Dict[int, float] = Field(default_factory=dict)

    @field_validator("values")
    @classmethod
    def _finite(cls, values):
        for edge, value in values.items():
            if edge < 0:
                raise ValueError(f"edge index must be non-negative, got {edge}")
            if not math.isfinite(value):
                raise ValueError(f"edge {edge} carries a non-finite value {value!r}")
        return values

    @classmethod
    def from_list(cls, values) -> "DiscreteOneForm":
        return cls(values={i: float(v) for i, v in enumerate(values)})

    @classmethod
    def zero(cls, n_edges: int) -> "DiscreteOneForm":
        return cls.from_list([0.0] * n_edges)

    def __getitem__(self, edge: int) -> float:
        return self.values[edge]

    def __add__(self, other: "DiscreteOneForm") -> "DiscreteOneForm":
        keys = set(self.values) | set(other.values)
        return DiscreteOneForm(values={k: self.values.get(k, 0.0) + other.values.get(k, 0.0) for k in keys})

    def scaled(self, factor: float) -> "DiscreteOneForm":
        return DiscreteOneForm(values={k: factor * v for k, v in self.values.items()})


class DiscreteTwoForm(BaseModel):
    """Face cochain in action units; the coupling constant is absorbed into the values"""
    model_config = ConfigDict(frozen=True)

    values: Dict[int, float] = Field(default_factory=dict)

    @field_validator("values")
    @classmethod
    def _finite(cls, values):
        for face, value in values.items():
            if face < 0 or not math.isfinite(value):
                raise ValueError(f"invalid face value {face}: {value!r}")
        return values

    @classmethod
    def from_list(cls, values) -> "DiscreteTwoForm":
        return cls(values={i: float(v) for i, v in enumerate(values)})

    def __getitem__(self, face: int) -> float:
        return self.values[face]

    def __add__(self, other: "DiscreteTwoForm") -> "DiscreteTwoForm":
        keys = set(self.values) | set(other.values)
        return DiscreteTwoForm(values={k: self.values.get(k, 0.0) + other.values.get(k, 0.0) for k in keys})


class Chart(BaseModel):
    """Vertex subset U_j with the potential theta_j on the edges inside it"""
    model_config = ConfigDict(frozen=True)

    vertices: Tuple[int, ...]
    potential: DiscreteOneForm = Field(default_factory=DiscreteOneForm)

    @field_validator("vertices")
    @classmethod
    def _canonical(cls, vertices):
        if not vertices:
            raise ValueError("chart must contain at least one vertex")
        return tuple(sorted(set(vertices)))

    def contains(self, vertex: int) -> bool:
        return vertex in self.vertices


class Transition(BaseModel):
    """Angles phi_jk(v) on U_j & U_k, with Z_jk = exp(i phi_jk) and psi_j = Z_jk psi_k"""
    model_config = ConfigDict(frozen=True)

    charts: Tuple[int, int]
    angles: Dict[int, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _distinct(self):
        if self.charts[0] == self.charts[1]:
            raise ValueError(f"transition must join two different charts, got {self.charts}")
        return self


class ChartAtlas(BaseModel):
    model_config = ConfigDict(frozen=True)

    charts: Tuple[Chart, ...]
    transitions: Tuple[Transition, ...] = ()

    @field_validator("charts")
    @classmethod
    def _non_empty(cls, charts):
        if not charts:
            raise ValueError("atlas needs at least one chart")
        return charts

    @model_validator(mode="after")
    def _check_indices(self):
        for transition in self.transitions:
            for j in transition.charts:
                if not 0 <= j < len(self.charts):
                    raise ValueError(f"transition references chart {j}, atlas has {len(self.charts)}")
        return self

    def overlap(self, *indices: int) -> Tuple[int, ...]:
        common = set(self.charts[indices[0]].vertices)
        for j in indices[1:]:
            common &= set(self.charts[j].vertices)
        return tuple(sorted(common))

    def transition_table(self, j: int, k: int) -> Optional[Dict[int, float]]:
        """phi_jk as stored, or the negated phi_kj; None when neither is given"""
        for transition in self.transitions:
            if transition.charts == (j, k):
                return dict(transition.angles)
        for transition in self.transitions:
            if transition.charts == (k, j):
                return {v: -a for v, a in transition.angles.items()}
        return None

    def transition_angle(self, j: int, k: int, vertex: int) -> float:
        """phi_jk(vertex); phi_jj = 0"""
        if j == k:
            return 0.0
        table = self.transition_table(j, k)
        if table is None or vertex not in table:
            raise OverlapError(f"no transition angle phi_{j}{k} at vertex {vertex}")
        return table[vertex]


class Prequantization(BaseModel):
    """Flat connection together with its classifying character"""
    model_config = ConfigDict(frozen=True)

    connection: DiscreteOneForm
    character: Character
    homology: FirstHomology
    hbar: float = Field(..., gt=0)


class EquivalenceReport(BaseModel):
    same_bundle: bool
    same_connection: bool


class LiftedPath(BaseModel):
    """Base path with one fiber angle per visited vertex"""
    model_config = ConfigDict(frozen=True)

    base: EdgePath
    fiber_angles: Tuple[float, ...]
    chart: int = 0

    @model_validator(mode="after")
    def _check_length(self):
        if len(self.fiber_angles) != len(self.base) + 1:
            raise ValueError(
                f"lift has {len(self.fiber_angles)} fiber angles for a path visiting {len(self.base) + 1} vertices"
            )
        return self

    @property
    def fiber_values(self) -> Tuple[complex, ...]:
        return tuple(complex(math.cos(a), math.sin(a)) for a in self.fiber_angles)


class CycleFlux(BaseModel):
    """Flux of one basis 2-cycle in units of 2*pi*hbar"""
    cycle: Tuple[int, ...]
    value: float
    nearest_integer: int
    deviation: float
    integral: bool


class WeilReport(BaseModel):
    accepted: bool
    hbar: float
    tol: float
    cycles: List[CycleFlux] = []

    @property
    def violations(self) -> List[CycleFlux]:
        return [cycle for cycle in self.cycles if not cycle.integral]


class AtlasViolation(BaseModel):
    kind: str
    charts: Tuple[int, ...] = ()
    edge: Optional[int] = None
    vertex: Optional[int] = None
    residual: float = 0.0
    message: str = ""


class AtlasReport(BaseModel):
    ok: bool
    violations: List[AtlasViolation] = []


class GluedFactor(BaseModel):
    """Feynman factor of a path lifted across charts"""
    value: complex
    first_chart: int
    last_chart: int
    schedule: Tuple[int, ...] = ()
