"""Runtime settings read from the environment."""

import os
from functools import lru_cache

from pydantic import BaseModel, Field


class Settings(BaseModel):
    log_level: str = Field("INFO", description="Root logging level")
    log_file: str | None = Field(None, description="Optional log file path")
    threads: int = Field(1, ge=1, description="Worker cap for FFTs and parallel sweeps")
    output_dir: str = Field("output", description="Default root for run directories")
    cors_origins: list[str] = Field(default_factory=lambda: ["*"])


@lru_cache
def get_settings() -> Settings:
    """Build settings from environment variables (cached)."""
    cors_origins_str = os.getenv("CORS_ORIGINS", "*")
    cors_origins = [origin.strip() for origin in cors_origins_str.split(",")] if cors_origins_str != "*" else ["*"]
    return Settings(
        log_level=os.getenv("LOG_LEVEL", "INFO"),
        log_file=os.getenv("LOG_FILE") or None,
        threads=int(os.getenv("COUETTE3D_THREADS", "1")),
        output_dir=os.getenv("COUETTE3D_OUTPUT_DIR", "output"),
        cors_origins=cors_origins,
    )
