from datetime import datetime, timezone

from fastapi import APIRouter

from app.core.config import get_settings
from app.models.schemas_api import Engine, HealthResponse

router = APIRouter(tags=["Health"])
settings = get_settings()


@router.get("/health", response_model=HealthResponse)
async def health_check():
    """Liveness probe plus the defaults a request falls back to"""
    return HealthResponse(
        status="healthy",
        app_name=settings.APP_NAME,
        version=settings.APP_VERSION,
        hbar=settings.HBAR,
        engines=[engine.value for engine in Engine],
        timestamp=datetime.now(timezone.utc)
    )
