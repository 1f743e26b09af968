from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from loguru import logger
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """ReplayLab configuration - library-wide defaults and storage layout"""

    app_name: str = "ReplayLab"
    app_version: str = "0.3.0"
    debug: bool = False
    log_level: str = "INFO"

    # Directory structure
    base_dir: Path = Path(__file__).parent.parent  # Go up from src/ to project root
    storage_dir: Path = base_dir / "storage"
    logs_dir: Path = storage_dir / "logs"
    results_dir: Path = storage_dir / "results"

    # Numeric defaults shared by every experiment
    gamma_d: float = 0.99              # discount used for occupancy measures
    h_record_length: int = 16          # distance-to-end values kept per (s, a)
    priority_floor: float = 1e-6       # added to every priority before tree insertion
    error_tracker_rate: float = 0.01   # EMA rate of the mean |TD error|
    lfiw_temperature: float = 7.5
    fast_buffer_fraction: float = 0.1

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="REPLAYLAB_", case_sensitive=False
    )


def setup_directories():
    """Create required directories for ReplayLab"""
    settings = Settings()

    directories = [
        settings.storage_dir,
        settings.logs_dir,
        settings.results_dir,
    ]

    for directory in directories:
        directory.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Directory ready: {directory}")


def setup_logging(level: Optional[str] = None):
    settings = Settings()
    level = level or settings.log_level

    settings.logs_dir.mkdir(parents=True, exist_ok=True)

    logger.remove()
    logger.add(
        settings.logs_dir / "replaylab.log",
        rotation="10 MB",
        retention="1 month",
        level=level,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{function}:{line} | {message}"
    )

    if settings.debug:
        logger.add(
            lambda msg: print(msg, end=""),
            level="DEBUG",
            format="{time:HH:mm:ss} | {level} | {message}"
        )


settings = Settings()
