import logging
import os
from functools import lru_cache
from pathlib import Path

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from bgslab.schemas.layout import BlockLayout

APP_DIR = Path(__file__).resolve().parent


@lru_cache(maxsize=1)
def get_env_file() -> str:
    """
    Resolve the env file holding Settings overrides.
    BGSLAB_ENV_FILE wins when set; otherwise bgslab/.env (missing files are ignored).
    """
    override = os.environ.get("BGSLAB_ENV_FILE", "").strip()
    if override:
        return str(Path(override).expanduser().resolve())
    return str((APP_DIR / ".env").resolve())


class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = "INFO"
    CELL_LOGGING_ENABLED: bool = False
    SLOW_CELL_LOG_MS: int = 2000

    # Run defaults
    DEFAULT_SEED: int = 0
    DEFAULT_RPLTOL: float = 100.0
    DEFAULT_DIMS: str = "1000,10,5"
    OUTPUT_DIR: str = "results"
    MAX_WORKERS: int = 1

    # Numerics
    JACOBI_MAX_SWEEPS: int = 30
    MATRIX_CACHE_SIZE: int = 16

    # SVG canvas, in user units
    SVG_WIDTH: int = 640
    SVG_HEIGHT: int = 480

    @field_validator("MAX_WORKERS", "JACOBI_MAX_SWEEPS", "MATRIX_CACHE_SIZE", "SVG_WIDTH", "SVG_HEIGHT")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("DEFAULT_DIMS")
    @classmethod
    def validate_dims(cls, v: str) -> str:
        BlockLayout.parse(v)
        return v.strip()

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"unknown log level {v!r}")
        return level

    @property
    def default_layout(self) -> BlockLayout:
        return BlockLayout.parse(self.DEFAULT_DIMS)

    @property
    def log_level_value(self) -> int:
        return logging.getLevelName(self.LOG_LEVEL)

    model_config = SettingsConfigDict(
        env_file=get_env_file(),
        env_prefix="BGSLAB_",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
