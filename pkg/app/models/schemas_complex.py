"""
Two-dimensional CW complexes and edge paths on them.
"""
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.schemas_topology import FinitePresentation

SignedEdge = Tuple[int, int]


class CWComplex(BaseModel):
    """Vertices 0..n-1, oriented edges (tail, head), faces as closed signed edge words

    Structural validity (endpoints, closed faces, connectedness) is checked
    by complex_model.validate_complex, which reports instead of raising.
    """
    model_config = ConfigDict(frozen=True)

    n_vertices: int = Field(..., ge=1)
    edges: Tuple[Tuple[int, int], ...] = ()
    faces: Tuple[Tuple[SignedEdge, ...], ...] = ()

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


class EdgePath(BaseModel):
    """Walk along oriented edges: direction +1 goes tail -> head, -1 goes head -> tail

    The end vertex is recorded at construction (complex_model.make_path);
    an empty path may omit it.
    """
    model_config = ConfigDict(frozen=True)

    start: int = Field(..., ge=0)
    steps: Tuple[SignedEdge, ...] = ()
    end: int = Field(..., ge=0)

    @model_validator(mode="before")
    @classmethod
    def _default_end(cls, data):
        if isinstance(data, dict) and data.get("end") is None:
            if data.get("steps"):
                raise ValueError("end vertex required for a non-empty path; build it with make_path")
            data = {**data, "end": data.get("start")}
        return data

    @model_validator(mode="after")
    def _check_directions(self):
        for edge, direction in self.steps:
            if edge < 0 or direction not in (1, -1):
                raise ValueError(f"invalid step ({edge}, {direction})")
        return self

    def __len__(self) -> int:
        return len(self.steps)


class Loop(EdgePath):
    """Closed edge path"""

    @model_validator(mode="after")
    def _check_closed(self):
        if self.end != self.start:
            raise ValueError(f"loop must return to its start vertex {self.start}, ends at {self.end}")
        return self


class ComplexDiagnostic(BaseModel):
    """Outcome of validate_complex"""
    ok: bool
    defect: Optional[str] = None
    message: str = "ok"
    index: Optional[int] = None


class EdgePathGroup(BaseModel):
    """Presentation of pi_1 read off a spanning tree"""
    model_config = ConfigDict(frozen=True)

    presentation: FinitePresentation
    generator_edges: Tuple[int, ...]
    tree: Tuple[int, ...]
    basepoint: int = 0
