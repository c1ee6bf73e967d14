"""Process configuration using Pydantic Settings."""
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    """Process settings loaded from SMECTIC_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="SMECTIC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # App settings
    app_name: str = "smectic-gsav"
    version: str = "1.0.0"

    # Output
    output_dir: str = "runs"
    metrics_file: str = "metrics.prom"

    # Transforms (scipy.fft worker threads)
    fft_workers: int = 1

    # Logging
    log_level: str = "INFO"
    log_json: bool = True

    # Optional run config used when the CLI is given no path
    default_config: Optional[str] = None


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
