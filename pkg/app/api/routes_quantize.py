from typing import Any, Dict

from fastapi import APIRouter, HTTPException

from app.core.errors import PrequantError
from app.core.logger import log
from app.models.schemas_api import (
    ABScanRequest,
    ClassifyRequest,
    Command,
    CommandResponse,
    RunConfig,
    WeilRequest,
)
from app.services.orchestrator import QuantizationOrchestrator

router = APIRouter(prefix="/quantize", tags=["Quantize"])

orchestrator = QuantizationOrchestrator()


def _document_data(**sections: Any) -> Dict[str, Any]:
    return {key: value for key, value in sections.items() if value is not None}


def _execute(config: RunConfig, data: Dict[str, Any]) -> CommandResponse:
    try:
        document = orchestrator.loader.parse_data(data, source="request")
        result = orchestrator.run(config, document)
        return orchestrator.reports.to_response(result)
    except PrequantError as e:
        log.warning(f"Rejected {config.command.value} request: {e.message}")
        raise HTTPException(status_code=422, detail=e.message)
    except Exception as e:
        log.error(f"Error in {config.command.value}: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/classify", response_model=CommandResponse)
async def classify(request: ClassifyRequest):
    """
    Classify prequantizations from a group presentation or a 2-complex

    Example:
    ```json
    {
        "presentation": {"generators": 1, "relators": [[[0, 3]]]}
    }
    ```
    """
    log.info("Received classify request")
    data = _document_data(
        presentation=request.presentation,
        complex=request.complex,
        connection=request.connection,
        torsion_label=request.torsion_label or None,
        hbar=request.hbar,
    )
    return _execute(RunConfig(command=Command.CLASSIFY, flux_grid=request.flux_grid), data)


@router.post("/weil", response_model=CommandResponse)
async def check_weil(request: WeilRequest):
    """
    Integrality of a face 2-form over every closed 2-cycle

    A non-integral flux is reported with accepted=false, not as an HTTP error.
    """
    log.info("Received Weil check request")
    data = _document_data(complex=request.complex, form=request.form, hbar=request.hbar)
    return _execute(RunConfig(command=Command.CHECK_WEIL, tol=request.tol), data)


@router.post("/ab-scan", response_model=CommandResponse)
async def ab_scan(request: ABScanRequest):
    """Aharonov-Bohm detector intensity over a grid of enclosed fluxes"""
    log.info(f"Received AB scan request: grid {request.flux_grid}, {request.steps} steps")
    config = RunConfig(
        command=Command.DEMO_AB,
        steps=request.steps,
        source=request.source,
        detector=request.detector,
        flux_grid=request.flux_grid,
        engine=request.engine,
    )
    if request.complex is None:
        try:
            base = orchestrator.loader.fixture("annulus")
        except PrequantError as e:
            raise HTTPException(status_code=500, detail=e.message)
        data = _document_data(complex=base.complex.model_dump(), hbar=request.hbar or base.hbar)
    else:
        data = _document_data(complex=request.complex, hbar=request.hbar)
    return _execute(config, data)
