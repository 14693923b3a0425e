from pydantic import BaseModel, ConfigDict, Field
from typing import Optional, List, Dict, Any, Tuple
from datetime import datetime
from pathlib import Path
from enum import Enum

import pandas as pd

from app.models.schemas_bundle import ChartAtlas, DiscreteOneForm, DiscreteTwoForm
from app.models.schemas_complex import CWComplex, SignedEdge
from app.models.schemas_topology import FinitePresentation


class Command(str, Enum):
    """Batch commands of the command-line front door"""
    CLASSIFY = "classify"
    CHECK_WEIL = "check-weil"
    HOLONOMY = "holonomy"
    PROPAGATE = "propagate"
    DEMO_AB = "demo-ab"
    DEMO_EXCHANGE = "demo-exchange"
    CHECK_ATLAS = "check-atlas"


class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"


class Engine(str, Enum):
    """Sector propagator evaluation engine"""
    COVER = "cover"
    ENUMERATE = "enumerate"


class RunConfig(BaseModel):
    """One CLI run; unset values fall back to the input file, then to settings"""
    command: Command
    input: Optional[Path] = None
    hbar: Optional[float] = Field(None, gt=0, allow_inf_nan=False)
    tol: Optional[float] = Field(None, gt=0, allow_inf_nan=False)
    seed: Optional[int] = None
    steps: Optional[int] = Field(None, ge=0)
    flux_grid: Optional[str] = Field(None, description="start:stop:count, pi tokens scaled by hbar")
    output: Optional[Path] = None
    format: Optional[OutputFormat] = None
    engine: Engine = Engine.COVER
    source: Optional[int] = Field(None, ge=0)
    detector: Optional[int] = Field(None, ge=0)
    hopping: Optional[float] = Field(None, allow_inf_nan=False)
    lifts: int = Field(10, ge=0)


class RawPath(BaseModel):
    """Path as written in an input file; the end vertex is recovered against the complex"""
    start: int = Field(..., ge=0)
    steps: Tuple[SignedEdge, ...] = ()


class InputDocument(BaseModel):
    """One structured input file after normalization"""
    model_config = ConfigDict(frozen=True)

    name: Optional[str] = None
    description: Optional[str] = None
    hbar: Optional[float] = Field(None, gt=0)
    complex: Optional[CWComplex] = None
    presentation: Optional[FinitePresentation] = None
    connection: Optional[DiscreteOneForm] = None
    two_form: Optional[DiscreteTwoForm] = None
    atlas: Optional[ChartAtlas] = None
    torsion_label: Tuple[int, ...] = ()
    loops: Tuple[RawPath, ...] = ()
    paths: Tuple[RawPath, ...] = ()


class CommandResult(BaseModel):
    """Outcome of one command, renderable as text, json or csv"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: Command
    title: str
    lines: List[str] = Field(default_factory=list)
    payload: Dict[str, Any] = Field(default_factory=dict)
    table: Optional[pd.DataFrame] = None
    accepted: bool = True
    rejection: Optional[str] = None


# HTTP bodies

class ClassifyRequest(BaseModel):
    """Classify the prequantizations of a presentation or of a complex"""
    presentation: Optional[Dict[str, Any]] = Field(None, description='{"generators": n, "relators": [...]}')
    complex: Optional[Dict[str, Any]] = Field(None, description='{"vertices": n, "edges": [...], "faces": [...]}')
    connection: Optional[Dict[str, Any]] = Field(None, description='{"edges": {index: value}}')
    torsion_label: List[int] = Field(default_factory=list)
    hbar: Optional[float] = Field(None, gt=0)
    flux_grid: Optional[str] = None


class WeilRequest(BaseModel):
    complex: Dict[str, Any]
    form: Dict[str, Any] = Field(..., description='{"faces": {index: value}}')
    hbar: Optional[float] = Field(None, gt=0)
    tol: Optional[float] = Field(None, gt=0)


class ABScanRequest(BaseModel):
    complex: Optional[Dict[str, Any]] = Field(None, description="Annulus complex; the C6 ring when omitted")
    steps: int = Field(6, ge=0, le=64)
    source: int = Field(0, ge=0)
    detector: int = Field(3, ge=0)
    flux_grid: str = "0:4pi:25"
    hbar: Optional[float] = Field(None, gt=0)
    engine: Engine = Engine.COVER


class CommandResponse(BaseModel):
    """HTTP rendering of a CommandResult"""
    command: str
    title: str
    accepted: bool
    rejection: Optional[str] = None
    summary: List[str] = Field(default_factory=list)
    payload: Dict[str, Any] = Field(default_factory=dict)


class HealthResponse(BaseModel):
    """Health check response"""
    status: str
    app_name: str
    version: str
    hbar: float
    engines: List[str]
    timestamp: datetime
