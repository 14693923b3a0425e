from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Application
    APP_NAME: str = "Prequant Lab"
    APP_VERSION: str = "1.0.0"
    ENVIRONMENT: str = "development"

    # API
    API_V1_PREFIX: str = "/api/v1"
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    # Physics defaults
    HBAR: float = 1.0

    # Tolerances (dimensionless; form values are compared after division by hbar)
    ANGLE_TOL: float = 1e-9
    FLATNESS_TOL: float = 1e-9
    WEIL_TOL: float = 1e-9
    ATLAS_TOL: float = 1e-9

    # Propagators
    SEED: int = 0
    MAX_ENUMERATED_PATHS: int = 10_000_000
    MAX_COVER_SECTORS: int = 100_000
    DEFAULT_HOPPING: float = 0.1

    # Logging
    PREQUANT_LOG: str = "WARNING"
    LOG_FILE: str = ""

    class Config:
        env_file = ".env"
        case_sensitive = True


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
