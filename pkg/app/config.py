import os
import logging

from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Runtime defaults; CLI flags and request fields override them."""

    tol: float = Field(1e-4, gt=0)
    max_sweeps: int = Field(1000, ge=1)
    threads: int = Field(1, ge=1)
    grid_size: int = Field(30, ge=2)
    out_dir: str = "out"
    log_level: str = "INFO"
    host: str = "0.0.0.0"
    port: int = 8000


def get_settings() -> Settings:
    """Build settings from the environment (call load_dotenv() first)"""
    env = {
        "tol": os.getenv("PDAG_TOL"),
        "max_sweeps": os.getenv("PDAG_MAX_SWEEPS"),
        "threads": os.getenv("PDAG_THREADS"),
        "grid_size": os.getenv("PDAG_GRID_SIZE"),
        "out_dir": os.getenv("PDAG_OUT_DIR"),
        "log_level": os.getenv("PDAG_LOG_LEVEL"),
        "host": os.getenv("PDAG_HOST"),
        "port": os.getenv("PDAG_PORT"),
    }
    return Settings(**{k: v for k, v in env.items() if v is not None})


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
