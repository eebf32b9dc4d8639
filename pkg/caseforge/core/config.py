# caseforge/core/config.py
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Largest payload a single frame can carry (4 hex digits of length).
MAX_FRAME_PAYLOAD = 0xFFFF


class Settings(BaseSettings):
    """Runtime configuration, read from CASEFORGE_* environment variables or .env."""

    model_config = SettingsConfigDict(
        env_prefix="CASEFORGE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    case_dir: Path = Path("./case")
    host: str = "127.0.0.1"
    service_port: int = Field(5555, ge=0, le=65535)
    fastboot_port: int = Field(5554, ge=0, le=65535)
    forward_port: int = Field(7000, ge=0, le=65535)  # as in "adb forward tcp:7000"
    connect_timeout: float = Field(5.0, gt=0)
    log_level: str = "INFO"


@lru_cache
def get_settings() -> Settings:
    return Settings()
