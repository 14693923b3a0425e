"""
Step rules, homology-sector propagators and chart-local wave functions.
"""
import cmath
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Sector = Tuple[int, ...]


def _frozen_array(value) -> np.ndarray:
    array = np.array(value, dtype=complex)
    array.setflags(write=False)
    return array


class StepRule(BaseModel):
    """One time step: amplitude per edge traversal (each direction) and per stay"""
    model_config = ConfigDict(frozen=True)

    forward: Tuple[complex, ...]
    backward: Tuple[complex, ...]
    stay: Tuple[complex, ...]

    @model_validator(mode="after")
    def _check(self):
        if len(self.forward) != len(self.backward):
            raise ValueError(f"{len(self.forward)} forward but {len(self.backward)} backward amplitudes")
        for amplitude in self.forward + self.backward + self.stay:
            if not cmath.isfinite(amplitude):
                raise ValueError(f"step amplitudes must be finite, got {amplitude!r}")
        return self

    def amplitude(self, edge: int, direction: int) -> complex:
        return self.forward[edge] if direction == 1 else self.backward[edge]


class SectorPropagator(BaseModel):
    """
    K[m][x', x]: summed amplitude of n-step paths x -> x' whose closure
    through the reference paths has generator exponent vector m
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sectors: Dict[Sector, np.ndarray]
    n_steps: int = Field(..., ge=0)
    n_vertices: int = Field(..., ge=1)
    generator_edges: Tuple[int, ...] = ()
    basepath_convention: str = "tree geodesics to vertex 0"
    engine: str = "cover"

    @field_validator("sectors", mode="before")
    @classmethod
    def _freeze(cls, sectors):
        return {tuple(int(x) for x in key): _frozen_array(value) for key, value in sectors.items()}

    @model_validator(mode="after")
    def _check_shapes(self):
        for key, matrix in self.sectors.items():
            if matrix.shape != (self.n_vertices, self.n_vertices):
                raise ValueError(f"sector {key} has shape {matrix.shape}, expected {self.n_vertices}x{self.n_vertices}")
            if len(key) != len(self.generator_edges):
                raise ValueError(f"sector key {key} does not match {len(self.generator_edges)} generators")
        return self

    def total(self) -> np.ndarray:
        """Sum over all sectors: the character-free propagator"""
        total = np.zeros((self.n_vertices, self.n_vertices), dtype=complex)
        for matrix in self.sectors.values():
            total = total + matrix
        return total

    def sector(self, key: Sector) -> np.ndarray:
        """Matrix of one sector, zero when no path reaches it"""
        if tuple(key) in self.sectors:
            return self.sectors[tuple(key)]
        return np.zeros((self.n_vertices, self.n_vertices), dtype=complex)


class WaveFunction(BaseModel):
    """Chart-local representative psi_j on the vertices of U_j"""
    model_config = ConfigDict(frozen=True)

    chart: int = Field(..., ge=0)
    amplitudes: Dict[int, complex] = Field(default_factory=dict)


class ExchangeReport(BaseModel):
    """Two identical particles on a graph: both statistics from the ordered-pair cover"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pair_labels: Tuple[Tuple[int, int], ...]
    n_steps: int
    direct: np.ndarray
    exchange: np.ndarray
    boson: np.ndarray
    fermion: np.ndarray
    boson_symmetry_residual: float
    fermion_antisymmetry_residual: float
    sector_sum_residual: float
    quotient_residual: float

    @field_validator("direct", "exchange", "boson", "fermion", mode="before")
    @classmethod
    def _freeze(cls, value):
        return _frozen_array(value)


class LiftInvarianceReport(BaseModel):
    reference: complex
    values: Tuple[complex, ...] = ()
    max_deviation: float
    n_lifts: int
    seed: Optional[int] = None
